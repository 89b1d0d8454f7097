//! Telegraph segmentation, interval statistics and weak-photon timing.
//!
//! Hits are detector clicks. Consecutive hits closer than the threshold gap
//! belong to one bright interval; a longer gap is a dark interval. The
//! intervals tile the span from the first to the last hit.

use std::collections::HashMap;

use serde::Serialize;

use crate::configurations::{ConfigKind, Lasers};
use crate::dynamics::RateSet;
use crate::error::{Error, Result};
use crate::log::{EventLog, RecordKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub phase: Phase,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelegraphSegmentation {
    pub intervals: Vec<Interval>,
    pub threshold_gap: f64,
}

impl TelegraphSegmentation {
    pub fn dark(&self) -> impl Iterator<Item = &Interval> + '_ {
        self.intervals.iter().filter(|i| i.phase == Phase::Dark)
    }

    pub fn bright(&self) -> impl Iterator<Item = &Interval> + '_ {
        self.intervals.iter().filter(|i| i.phase == Phase::Bright)
    }

    pub fn dark_count(&self) -> usize {
        self.dark().count()
    }
}

/// Twenty mean bright inter-hit gaps, one strong cycle each.
pub fn default_threshold_gap(rates: &RateSet) -> f64 {
    20.0 * rates.strong_cycle_time()
}

pub fn segment_telegraph(log: &EventLog, threshold_gap: f64) -> Result<TelegraphSegmentation> {
    if !(threshold_gap > 0.0 && threshold_gap.is_finite()) {
        return Err(Error::InvalidThreshold(threshold_gap));
    }
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let hits: Vec<f64> = log.hits().map(|r| r.time).collect();
    let mut intervals = Vec::new();
    if let Some(&first) = hits.first() {
        let mut bright_start = first;
        for w in hits.windows(2) {
            if w[1] - w[0] > threshold_gap {
                intervals.push(Interval {
                    start: bright_start,
                    end: w[0],
                    phase: Phase::Bright,
                });
                intervals.push(Interval {
                    start: w[0],
                    end: w[1],
                    phase: Phase::Dark,
                });
                bright_start = w[1];
            }
        }
        intervals.push(Interval {
            start: bright_start,
            end: *hits.last().expect("non-empty"),
            phase: Phase::Bright,
        });
    }
    Ok(TelegraphSegmentation {
        intervals,
        threshold_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeakTiming {
    AtStart,
    AtEnd,
    Ambiguous,
}

/// How close the emission must lie to a dark boundary to be attributed to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingWindows {
    /// One strong cycle.
    pub end: f64,
    /// One weak-absorption time.
    pub start: f64,
}

impl TimingWindows {
    pub fn from_rates(rates: &RateSet) -> Self {
        TimingWindows {
            end: rates.strong_cycle_time(),
            start: 1.0 / rates.weak_absorb,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        TimingWindows {
            end: self.end * factor,
            start: self.start * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DarkTiming {
    pub dark_start: f64,
    pub dark_end: f64,
    pub weak_crossing_time: Option<f64>,
    pub classification: WeakTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub intervals: Vec<DarkTiming>,
}

impl TimingReport {
    pub fn count(&self, class: WeakTiming) -> usize {
        self.intervals.iter().filter(|d| d.classification == class).count()
    }

    pub fn ambiguous_fraction(&self) -> f64 {
        if self.intervals.is_empty() {
            0.0
        } else {
            self.count(WeakTiming::Ambiguous) as f64 / self.intervals.len() as f64
        }
    }
}

/// Places the weak photon of every dark interval at the weight median of
/// the crossings logged in the epoch that the interval's closing hit ends.
pub fn classify_weak_timing(
    log: &EventLog,
    seg: &TelegraphSegmentation,
    kind: ConfigKind,
    windows: TimingWindows,
) -> Result<TimingReport> {
    if kind.lasers != Lasers::Both {
        return Err(Error::NoWeakBranch);
    }
    let mut crossings: HashMap<u64, Vec<(f64, f64)>> = HashMap::new();
    let mut closing_epoch: HashMap<u64, u64> = HashMap::new();
    for r in log.records() {
        match r.kind {
            RecordKind::WeakCrossing => crossings.entry(r.epoch).or_default().push((r.time, r.aux)),
            RecordKind::Hit => {
                closing_epoch.insert(r.time.to_bits(), r.epoch);
            }
            RecordKind::EpochStart => {}
        }
    }
    let intervals = seg
        .dark()
        .map(|d| {
            let crossing = closing_epoch
                .get(&d.end.to_bits())
                .and_then(|e| crossings.get(e))
                .and_then(|c| weighted_median(c));
            let classification = match crossing {
                None => WeakTiming::Ambiguous,
                Some(s) => {
                    let to_end = (d.end - s).abs();
                    let to_start = (s - d.start).abs();
                    if to_end <= windows.end && to_end < to_start {
                        WeakTiming::AtEnd
                    } else if to_start <= windows.start && to_start < to_end {
                        WeakTiming::AtStart
                    } else {
                        WeakTiming::Ambiguous
                    }
                }
            };
            DarkTiming {
                dark_start: d.start,
                dark_end: d.end,
                weak_crossing_time: crossing,
                classification,
            }
        })
        .collect();
    Ok(TimingReport { intervals })
}

fn weighted_median(points: &[(f64, f64)]) -> Option<f64> {
    let mut sorted: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1 > 0.0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for &(t, w) in &sorted {
        acc += w;
        if acc >= total / 2.0 {
            return Some(t);
        }
    }
    sorted.last().map(|p| p.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationStats {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Sorted durations; the empirical CDF steps by 1/count at each.
    pub sorted: Vec<f64>,
}

impl DurationStats {
    fn from_durations(mut d: Vec<f64>) -> Self {
        d.sort_by(f64::total_cmp);
        let count = d.len();
        let (mean, std_dev) = if count == 0 {
            (0.0, 0.0)
        } else {
            let n = count as f64;
            let mean = d.iter().sum::<f64>() / n;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        DurationStats {
            count,
            mean,
            std_dev,
            sorted: d,
        }
    }

    /// Fraction of durations ≤ `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sorted.partition_point(|&d| d <= x) as f64 / self.count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalStats {
    pub bright: DurationStats,
    pub dark: DurationStats,
    /// Maximum-likelihood exponential rate of the dark durations.
    pub dark_rate: Option<f64>,
}

pub fn interval_stats(seg: &TelegraphSegmentation) -> IntervalStats {
    let bright = DurationStats::from_durations(seg.bright().map(Interval::duration).collect());
    let dark = DurationStats::from_durations(seg.dark().map(Interval::duration).collect());
    let dark_rate = (dark.count > 0 && dark.mean > 0.0).then(|| 1.0 / dark.mean);
    IntervalStats {
        bright,
        dark,
        dark_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configurations::LevelScheme;
    use crate::log::Record;
    use crate::state::ComponentLabel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hits(times: &[f64]) -> EventLog {
        let g = ComponentLabel::ground();
        let mut log = EventLog::new();
        log.push(Record::new(0.0, RecordKind::EpochStart, 0, &g, 0.5));
        for (i, &t) in times.iter().enumerate() {
            log.push(Record::new(t, RecordKind::Hit, i as u64, &g, 0.5));
        }
        log
    }

    #[test]
    fn uniform_hits_are_one_bright_interval() {
        let times: Vec<f64> = (0..100).map(|i| 2.0 * i as f64).collect();
        let seg = segment_telegraph(&hits(&times), 40.0).unwrap();
        assert_eq!(seg.intervals.len(), 1);
        assert_eq!(seg.intervals[0].phase, Phase::Bright);
    }

    #[test]
    fn constructed_gap_is_dark() {
        let seg = segment_telegraph(&hits(&[0.0, 2.0, 4.0, 4000.0, 4002.0]), 40.0).unwrap();
        let expect = [
            (0.0, 4.0, Phase::Bright),
            (4.0, 4000.0, Phase::Dark),
            (4000.0, 4002.0, Phase::Bright),
        ];
        let got: Vec<_> = seg.intervals.iter().map(|i| (i.start, i.end, i.phase)).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn empty_log_rejected() {
        assert_eq!(segment_telegraph(&EventLog::new(), 40.0), Err(Error::EmptyLog));
    }

    #[test]
    fn single_interval_stats() {
        let seg = segment_telegraph(&hits(&[1.0, 3.0, 6.0]), 40.0).unwrap();
        let s = interval_stats(&seg);
        assert_eq!(s.bright.count, 1);
        assert_eq!(s.bright.mean, 5.0);
        assert_eq!(s.bright.std_dev, 0.0);
        assert_eq!(s.dark_rate, None);
    }

    #[test]
    fn exponential_dark_rate_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = 0.0;
        let mut intervals = Vec::new();
        for _ in 0..500 {
            let u: f64 = rng.gen();
            let d = -2000.0 * (1.0 - u).ln();
            intervals.push(Interval {
                start: t,
                end: t + 2.0,
                phase: Phase::Bright,
            });
            intervals.push(Interval {
                start: t + 2.0,
                end: t + 2.0 + d,
                phase: Phase::Dark,
            });
            t += 2.0 + d;
        }
        let seg = TelegraphSegmentation {
            intervals,
            threshold_gap: 40.0,
        };
        let rate = interval_stats(&seg).dark_rate.unwrap();
        assert!((rate * 2000.0 - 1.0).abs() < 0.1, "{rate}");
    }

    fn dark_with_crossing(s: f64) -> (EventLog, TelegraphSegmentation) {
        let g = ComponentLabel::ground();
        let mut log = EventLog::new();
        log.push(Record::new(0.0, RecordKind::EpochStart, 0, &g, 0.5));
        log.push(Record::new(10.0, RecordKind::Hit, 0, &g, 0.5));
        log.push(Record::new(10.0, RecordKind::EpochStart, 1, &g, 0.5));
        log.push(Record::new(s - 0.1, RecordKind::WeakCrossing, 1, &g, 0.25));
        log.push(Record::new(s, RecordKind::WeakCrossing, 1, &g, 0.5));
        log.push(Record::new(s + 0.1, RecordKind::WeakCrossing, 1, &g, 0.25));
        log.push(Record::new(2010.0, RecordKind::Hit, 1, &g, 0.5));
        let seg = segment_telegraph(&log, 40.0).unwrap();
        (log, seg)
    }

    #[test]
    fn classification_by_nearest_boundary() {
        let windows = TimingWindows::from_rates(&RateSet::default());
        let kind = ConfigKind::both(LevelScheme::V);
        for (s, expect) in [
            (2008.5, WeakTiming::AtEnd),
            (11.0, WeakTiming::AtStart),
            (1500.0, WeakTiming::Ambiguous),
        ] {
            let (log, seg) = dark_with_crossing(s);
            let report = classify_weak_timing(&log, &seg, kind, windows).unwrap();
            assert_eq!(report.intervals[0].classification, expect, "{s}");
            assert_eq!(report.intervals[0].weak_crossing_time, Some(s));
        }
    }

    #[test]
    fn classification_survives_rescaling() {
        let kind = ConfigKind::both(LevelScheme::V);
        let windows = TimingWindows::from_rates(&RateSet::default());
        for s in [2008.5, 11.0, 1500.0] {
            let (log, seg) = dark_with_crossing(s);
            let base = classify_weak_timing(&log, &seg, kind, windows).unwrap();
            let c = 7.25;
            let scaled_log = EventLog::from_records(
                log.records()
                    .iter()
                    .map(|r| Record {
                        time: r.time * c,
                        ..*r
                    })
                    .collect(),
            );
            let scaled_seg = segment_telegraph(&scaled_log, 40.0 * c).unwrap();
            let scaled = classify_weak_timing(&scaled_log, &scaled_seg, kind, windows.scaled(c)).unwrap();
            assert_eq!(
                base.intervals[0].classification,
                scaled.intervals[0].classification
            );
        }
    }

    #[test]
    fn strong_only_has_no_weak_branch() {
        let (log, seg) = dark_with_crossing(11.0);
        let kind = ConfigKind::strong_only(LevelScheme::V);
        let windows = TimingWindows::from_rates(&RateSet::default());
        assert_eq!(classify_weak_timing(&log, &seg, kind, windows), Err(Error::NoWeakBranch));
    }
}
