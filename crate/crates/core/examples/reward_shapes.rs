//! The two reward schemes and a walk through one environment episode.
//!
//! ```bash
//! cargo run --example reward_shapes
//! ```

use alarm_annotator::env::{normalcy_score, Action, AnnotationEnv, Normalizer, RewardScheme, VitalThresholds};
use alarm_annotator::ingest::{AnnotatedEvent, SeverityClass, VitalsSample};

fn sample(hr: f64, sbp: f64, dbp: f64) -> VitalsSample {
    VitalsSample {
        hr,
        rr: 14.0,
        sbp,
        dbp,
        map: 90.0,
        spo2: 97.0,
    }
}

fn main() -> alarm_annotator::Result<()> {
    let t = VitalThresholds::default();
    let [(_, hr), (_, sbp), (_, dbp)] = t.bands();

    let cases = [
        ("mid-band", sample(hr.midpoint(), sbp.midpoint(), dbp.midpoint())),
        ("at v_min", sample(hr.min, sbp.min, dbp.min)),
        (
            "far out",
            sample(
                hr.max + 3.0 * hr.width(),
                sbp.max + 3.0 * sbp.width(),
                dbp.max + 3.0 * dbp.width(),
            ),
        ),
        (
            "hr high",
            sample(hr.max + 0.3 * hr.width(), sbp.midpoint(), dbp.midpoint()),
        ),
    ];
    println!("normalcy score");
    for (name, v) in &cases {
        println!("  {name:<9} {:6.2}", normalcy_score(v, &t));
    }

    let simple = RewardScheme::SimpleMatch;
    let vitals = RewardScheme::vitals(t);
    println!(
        "{:<9} {:>8} {:>8} {:>8} {:>8}",
        "event", "simple/N", "simple/A", "vitals/N", "vitals/A"
    );
    for (name, v) in &cases {
        let severity = if t.violates(v) {
            SeverityClass::Emergent
        } else {
            SeverityClass::NoEvent
        };
        let e = AnnotatedEvent::new(0, *v, severity);
        println!(
            "{name:<9} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            simple.reward(&e, Action::NonAlarm),
            simple.reward(&e, Action::Alarm),
            vitals.reward(&e, Action::NonAlarm),
            vitals.reward(&e, Action::Alarm),
        );
    }

    // Play a short episode, alarming on every threshold violation.
    let episode: Vec<AnnotatedEvent> = cases
        .iter()
        .enumerate()
        .map(|(i, (_, v))| {
            let severity = if t.violates(v) {
                SeverityClass::Urgent
            } else {
                SeverityClass::NoEvent
            };
            AnnotatedEvent::new(i as i64 * 1000, *v, severity)
        })
        .collect();
    let normalizer = Normalizer::identity();
    let mut env = AnnotationEnv::new(&episode, simple, &normalizer);
    env.reset();
    let mut total = 0.0;
    while let Some(event) = env.current_event() {
        let action = if t.violates(&event.vitals) {
            Action::Alarm
        } else {
            Action::NonAlarm
        };
        let step = env.step(action)?;
        total += step.transition.reward;
        println!(
            "  {:?} -> reward {} terminal {}",
            action, step.transition.reward, step.transition.terminal
        );
    }
    println!("episode return {total}");
    Ok(())
}
