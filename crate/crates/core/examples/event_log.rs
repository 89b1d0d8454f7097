// Writes a short event log as text and reads it back bit for bit.
//
//     cargo run --example event_log

use shelving::{EventLog, RecordKind, SimOptions, Trajectory};

pub fn run_example() -> shelving::Result<()> {
    let mut traj = Trajectory::seeded(SimOptions::default(), 3, 0)?;
    traj.run_until(12.0)?;
    let text = traj.log().to_tsv();
    print!("{text}");

    let parsed = EventLog::parse_tsv(&text)?;
    assert_eq!(&parsed, traj.log());
    println!(
        "{} records, {} hits, round trip exact",
        parsed.len(),
        parsed.of_kind(RecordKind::Hit).count()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> shelving::Result<()> {
    run_example()
}
