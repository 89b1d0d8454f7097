//! Event logs and their tab-separated text form.
//!
//! One record per line after a single header line:
//!
//! ```text
//! #shelving-event-log v1	time	kind	epoch	atom	clicks	strong	weak	aux
//! 0	epoch_start	0	0	0	0	0	0.5488135039273248
//! 2.1875	hit	0	0	1	1	0	0.5488135039273248
//! ```
//!
//! Reals are written with Rust's `Display` for `f64`, the shortest decimal
//! string that parses back to the same bits, never in exponent form. `atom`
//! is the level index 0, 1 or 2. For a hit `aux` is the target's mass at the
//! hit, for a weak crossing it is the posterior weight of that crossing
//! instant, and for an epoch start it is the trigger threshold drawn for the
//! epoch.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::state::{AtomLevel, ComponentLabel, DetectorCount, PhotonLedger, ReadyMarks};

pub const LOG_HEADER: &str = "#shelving-event-log v1\ttime\tkind\tepoch\tatom\tclicks\tstrong\tweak\taux";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Hit,
    WeakCrossing,
    EpochStart,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Hit => "hit",
            RecordKind::WeakCrossing => "weak_crossing",
            RecordKind::EpochStart => "epoch_start",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hit" => Ok(RecordKind::Hit),
            "weak_crossing" => Ok(RecordKind::WeakCrossing),
            "epoch_start" => Ok(RecordKind::EpochStart),
            other => Err(format!("unknown record kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub time: f64,
    pub kind: RecordKind,
    pub epoch: u64,
    pub atom: AtomLevel,
    pub clicks: u32,
    pub strong: u32,
    pub weak: u32,
    pub aux: f64,
}

impl Record {
    pub fn new(time: f64, kind: RecordKind, epoch: u64, label: &ComponentLabel, aux: f64) -> Self {
        Record {
            time,
            kind,
            epoch,
            atom: label.atom,
            clicks: label.clicks(),
            strong: label.photons.strong,
            weak: label.photons.weak,
            aux,
        }
    }

    /// The realized label this record refers to.
    pub fn label(&self) -> ComponentLabel {
        ComponentLabel {
            atom: self.atom,
            detector: DetectorCount(self.clicks),
            photons: PhotonLedger {
                strong: self.strong,
                weak: self.weak,
            },
            ready: ReadyMarks::NONE,
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            self.kind,
            self.epoch,
            self.atom.index(),
            self.clicks,
            self.strong,
            self.weak,
            self.aux
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<Record>) -> Self {
        EventLog { records }
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn hits(&self) -> impl Iterator<Item = &Record> + '_ {
        self.of_kind(RecordKind::Hit)
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &Record> + '_ {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{LOG_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("log text is UTF-8")
    }

    /// Parses the text written by [`EventLog::write_tsv`]. Line numbers in
    /// errors are 1-based and count the header.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header == LOG_HEADER => {}
            _ => {
                return Err(Error::LogFormat {
                    line: 1,
                    message: "missing or unsupported header".into(),
                })
            }
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            records.push(parse_record(line).map_err(|message| Error::LogFormat { line: i + 1, message })?);
        }
        Ok(EventLog { records })
    }
}

fn parse_record(line: &str) -> std::result::Result<Record, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    }
    fn num<T: FromStr>(name: &str, s: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("bad {name} `{s}`"))
    }
    let atom: u8 = num("atom", fields[3])?;
    Ok(Record {
        time: num("time", fields[0])?,
        kind: fields[1].parse()?,
        epoch: num("epoch", fields[2])?,
        atom: AtomLevel::from_index(atom).ok_or_else(|| format!("bad atom `{atom}`"))?,
        clicks: num("clicks", fields[4])?,
        strong: num("strong", fields[5])?,
        weak: num("weak", fields[6])?,
        aux: num("aux", fields[7])?,
    })
}
