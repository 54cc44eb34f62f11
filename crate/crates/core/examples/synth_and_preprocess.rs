//! Generate synthetic monitor streams, parse them back and build DS1/DS2.
//!
//! ```bash
//! cargo run --example synth_and_preprocess
//! ```

use alarm_annotator::env::VitalThresholds;
use alarm_annotator::ingest::{build_ds2, merge_by_timestamp, parse_records, write_dataset_csv, Split};
use alarm_annotator::synthgen::{generate, SynthConfig};

fn main() -> alarm_annotator::Result<()> {
    let mut config = SynthConfig::new(1_000, 0.2, 7);
    config.indeterminate_rate = 0.1;
    config.label_noise = 0.05;
    let data = generate(&config, &VitalThresholds::default())?;

    println!("severity counts");
    for (severity, count) in data.severity_counts() {
        println!("  {:<13} {count}", severity.as_str());
    }

    // The streams are plain JSON lines; parse them as if read from disk.
    let (vitals, annotations) = data.to_streams();
    let raw = parse_records(vitals.as_bytes(), &b""[..], annotations.as_bytes())?;
    println!(
        "parsed {} vitals and {} annotations",
        raw.vitals.len(),
        raw.annotations.len()
    );

    let ds1 = merge_by_timestamp(&raw.vitals, &raw.annotations, Split::Train, 500)?;
    let ds2 = build_ds2(&ds1);
    for (name, ds) in [("DS1", &ds1), ("DS2", &ds2)] {
        let c = ds.class_counts();
        println!(
            "{name}: {} rows, {} alarms, {} non-alarms",
            ds.len(),
            c.alarms,
            c.non_alarms
        );
    }

    let mut csv = Vec::new();
    write_dataset_csv(&ds2.with_events(ds2.events[..3].to_vec()), &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
