//! Synthetic vitals/annotation streams with threshold-consistent labels.
//!
//! Non-alarm events keep heart rate and both blood pressures inside their
//! bands; alarm events push one of them out by at least a tenth of the band
//! width. With no label noise a band check recovers every label, so whether
//! an agent learns is a property of the agent.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::{Band, VitalThresholds};
use crate::error::{Error, Result};
use crate::ingest::{
    annotation_lines, build_ds2, merge_by_timestamp, vitals_lines, Annotation, Dataset, SeverityClass, Split,
    TimedVitals, VitalsSample,
};

pub const RR_BAND: Band = Band { min: 8.0, max: 25.0 };
pub const MAP_BAND: Band = Band { min: 65.0, max: 110.0 };
pub const SPO2_BAND: Band = Band { min: 92.0, max: 100.0 };

/// Minimum excursion of an alarm variable beyond its band, as a fraction of the width.
pub const ALARM_MARGIN: f64 = 0.1;
/// Maximum excursion, same units.
pub const ALARM_REACH: f64 = 0.5;

const REQUIRED_FIELDS: [&str; 6] = [
    "n_events",
    "alarm_rate",
    "label_noise",
    "indeterminate_rate",
    "seed",
    "vitals_noise_sd",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_events: usize,
    /// Fraction of events whose vitals are alarming.
    pub alarm_rate: f64,
    /// Probability that an event's annotation contradicts its vitals.
    pub label_noise: f64,
    /// Fraction of alarm annotations downgraded to indeterminate.
    pub indeterminate_rate: f64,
    pub seed: u64,
    /// Standard deviation of the Gaussian jitter added to every field.
    pub vitals_noise_sd: f64,
    /// Probability that a non-alarm event carries a `non_urgent` annotation
    /// rather than none at all.
    #[serde(default = "default_non_urgent_rate")]
    pub non_urgent_rate: f64,
    #[serde(default = "default_start_ms")]
    pub start_ms: i64,
    #[serde(default = "default_interval_ms")]
    pub interval_ms: i64,
}

fn default_non_urgent_rate() -> f64 {
    0.5
}

fn default_start_ms() -> i64 {
    1_500_000_000_000
}

fn default_interval_ms() -> i64 {
    1000
}

impl SynthConfig {
    pub fn new(n_events: usize, alarm_rate: f64, seed: u64) -> Self {
        Self {
            n_events,
            alarm_rate,
            label_noise: 0.0,
            indeterminate_rate: 0.0,
            seed,
            vitals_noise_sd: 1.0,
            non_urgent_rate: default_non_urgent_rate(),
            start_ms: default_start_ms(),
            interval_ms: default_interval_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("alarm_rate", self.alarm_rate),
            ("label_noise", self.label_noise),
            ("indeterminate_rate", self.indeterminate_rate),
            ("non_urgent_rate", self.non_urgent_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::config(field, format!("{value} is outside [0, 1]")));
            }
        }
        if !(self.vitals_noise_sd.is_finite() && self.vitals_noise_sd >= 0.0) {
            return Err(Error::config("vitals_noise_sd", "must be finite and non-negative"));
        }
        if self.interval_ms <= 0 {
            return Err(Error::config("interval_ms", "must be positive"));
        }
        Ok(())
    }

    /// Parses a JSON config, naming the first missing or invalid field.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(map) = &value else {
            return Err(Error::config("<root>", "expected a JSON object"));
        };
        if let Some(missing) = REQUIRED_FIELDS.iter().find(|f| !map.contains_key(**f)) {
            return Err(Error::config(*missing, "required field is missing"));
        }
        let config: SynthConfig =
            serde_json::from_value(value).map_err(|e| Error::config("<config>", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

/// One generated event with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthEvent {
    pub timestamp: i64,
    pub vitals: VitalsSample,
    /// Whether the vitals were generated as alarming.
    pub true_alarm: bool,
    /// The (possibly noisy) annotation.
    pub severity: SeverityClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub events: Vec<SynthEvent>,
}

impl SynthData {
    pub fn vitals(&self) -> Vec<TimedVitals> {
        self.events
            .iter()
            .map(|e| TimedVitals {
                timestamp: e.timestamp,
                vitals: e.vitals,
            })
            .collect()
    }

    /// Annotation records; `NoEvent` events produce no line.
    pub fn annotations(&self) -> Vec<Annotation> {
        self.events
            .iter()
            .filter(|e| e.severity != SeverityClass::NoEvent)
            .map(|e| Annotation {
                timestamp: e.timestamp,
                severity: e.severity,
            })
            .collect()
    }

    /// The two normalized ingest streams: `(vitals, annotations)`.
    pub fn to_streams(&self) -> (String, String) {
        (vitals_lines(&self.vitals()), annotation_lines(&self.annotations()))
    }

    /// Merges the generated streams and builds DS2 for `split`.
    pub fn dataset(&self, split: Split) -> Result<Dataset> {
        let tolerance = self
            .events
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .min()
            .unwrap_or(1)
            / 2;
        Ok(build_ds2(&merge_by_timestamp(
            &self.vitals(),
            &self.annotations(),
            split,
            tolerance,
        )?))
    }

    pub fn severity_counts(&self) -> [(SeverityClass, usize); 5] {
        SeverityClass::ALL.map(|s| (s, self.events.iter().filter(|e| e.severity == s).count()))
    }
}

/// Generates `config.n_events` events, deterministically from the seed.
pub fn generate(config: &SynthConfig, thresholds: &VitalThresholds) -> Result<SynthData> {
    config.validate()?;
    thresholds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter =
        Normal::new(0.0, config.vitals_noise_sd).map_err(|e| Error::config("vitals_noise_sd", e.to_string()))?;

    let n_alarms = ((config.n_events as f64) * config.alarm_rate).round() as usize;
    let mut is_alarm = vec![false; config.n_events];
    for i in index::sample(&mut rng, config.n_events, n_alarms.min(config.n_events)) {
        is_alarm[i] = true;
    }

    let mut events = Vec::with_capacity(config.n_events);
    for (i, &alarm) in is_alarm.iter().enumerate() {
        let vitals = if alarm {
            alarm_vitals(&mut rng, &jitter, thresholds)
        } else {
            normal_vitals(&mut rng, &jitter, thresholds)
        };
        let flipped = rng.random_bool(config.label_noise);
        let annotated_alarm = alarm != flipped;
        let severity = if annotated_alarm {
            if rng.random_bool(config.indeterminate_rate) {
                SeverityClass::Indeterminate
            } else if rng.random_bool(0.5) {
                SeverityClass::Emergent
            } else {
                SeverityClass::Urgent
            }
        } else if rng.random_bool(config.non_urgent_rate) {
            SeverityClass::NonUrgent
        } else {
            SeverityClass::NoEvent
        };
        events.push(SynthEvent {
            timestamp: config.start_ms + i as i64 * config.interval_ms,
            vitals,
            true_alarm: alarm,
            severity,
        });
    }
    Ok(SynthData { events })
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn in_band<R: Rng>(rng: &mut R, jitter: &Normal<f64>, band: Band) -> f64 {
    let v = rng.random_range(band.min..=band.max) + jitter.sample(rng);
    round2(v.clamp(band.min, band.max))
}

fn normal_vitals<R: Rng>(rng: &mut R, jitter: &Normal<f64>, t: &VitalThresholds) -> VitalsSample {
    VitalsSample {
        hr: in_band(rng, jitter, t.hr),
        rr: in_band(rng, jitter, RR_BAND),
        sbp: in_band(rng, jitter, t.sbp),
        dbp: in_band(rng, jitter, t.dbp),
        map: in_band(rng, jitter, MAP_BAND),
        spo2: in_band(rng, jitter, SPO2_BAND),
    }
}

fn alarm_vitals<R: Rng>(rng: &mut R, jitter: &Normal<f64>, t: &VitalThresholds) -> VitalsSample {
    let mut v = normal_vitals(rng, jitter, t);
    let which = rng.random_range(0..3);
    let band = t.bands()[which].1;
    let w = band.width();
    let excursion = rng.random_range(ALARM_MARGIN * w..=ALARM_REACH * w);
    let value = if rng.random_bool(0.5) {
        (band.min - excursion + jitter.sample(rng))
            .min(band.min - ALARM_MARGIN * w)
            .max(0.0)
    } else {
        (band.max + excursion + jitter.sample(rng)).max(band.max + ALARM_MARGIN * w)
    };
    let value = round2(value);
    match which {
        0 => v.hr = value,
        1 => v.sbp = value,
        _ => v.dbp = value,
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_records;

    fn noiseless(n: usize, rate: f64, seed: u64) -> SynthConfig {
        SynthConfig::new(n, rate, seed)
    }

    #[test]
    fn exact_alarm_count_and_separable() {
        let t = VitalThresholds::default();
        let data = generate(&noiseless(1000, 0.5, 3), &t).unwrap();
        let alarms: Vec<_> = data.events.iter().filter(|e| e.severity.label().is_alarm()).collect();
        assert_eq!(alarms.len(), 500);
        for e in &data.events {
            assert_eq!(t.violates(&e.vitals), e.true_alarm);
            assert_eq!(e.severity.label().is_alarm(), e.true_alarm);
        }
        // every alarm clears its band by the margin
        for e in alarms {
            let clear = t
                .monitored(&e.vitals)
                .iter()
                .any(|(v, b)| *v <= b.min - ALARM_MARGIN * b.width() || *v >= b.max + ALARM_MARGIN * b.width());
            assert!(clear);
        }
    }

    #[test]
    fn zero_alarm_rate() {
        let data = generate(&noiseless(300, 0.0, 1), &VitalThresholds::default()).unwrap();
        assert!(data.annotations().iter().all(|a| !a.severity.label().is_alarm()));
    }

    #[test]
    fn dataset_keeps_one_row_per_event() {
        let data = generate(&noiseless(400, 0.3, 5), &VitalThresholds::default()).unwrap();
        let ds = data.dataset(Split::Test).unwrap();
        assert_eq!(ds.len(), 400);
        for (row, e) in ds.events.iter().zip(&data.events) {
            assert_eq!(row.label.is_alarm(), e.true_alarm);
        }
    }

    #[test]
    fn deterministic_streams() {
        let mut cfg = noiseless(200, 0.2, 77);
        cfg.label_noise = 0.1;
        cfg.indeterminate_rate = 0.2;
        let t = VitalThresholds::default();
        let a = generate(&cfg, &t).unwrap().to_streams();
        let b = generate(&cfg, &t).unwrap().to_streams();
        assert_eq!(a, b);
        cfg.seed = 78;
        assert_ne!(generate(&cfg, &t).unwrap().to_streams(), a);
    }

    #[test]
    fn streams_round_trip_through_ingest() {
        let mut cfg = noiseless(500, 0.1, 5);
        cfg.label_noise = 0.2;
        cfg.indeterminate_rate = 0.3;
        cfg.vitals_noise_sd = 3.0;
        let data = generate(&cfg, &VitalThresholds::default()).unwrap();
        let (vitals, annotations) = data.to_streams();
        let raw = parse_records(vitals.as_bytes(), &b""[..], annotations.as_bytes()).unwrap();
        assert_eq!(raw.vitals.len(), 500);
        let ds = merge_by_timestamp(&raw.vitals, &raw.annotations, Split::Train, 500).unwrap();
        let severities: Vec<_> = ds.events.iter().map(|e| e.severity).collect();
        let expected: Vec<_> = data.events.iter().map(|e| e.severity).collect();
        assert_eq!(severities, expected);
    }

    #[test]
    fn config_errors_name_fields() {
        let err = SynthConfig::from_json(
            r#"{"n_events": 10, "alarm_rate": 0.1, "label_noise": 0, "indeterminate_rate": 0, "vitals_noise_sd": 1}"#,
        )
        .unwrap_err();
        assert!(matches!(&err, Error::InvalidConfig { field, .. } if field == "seed"));

        let err = SynthConfig::from_json(
            r#"{"n_events": 10, "alarm_rate": 1.5, "label_noise": 0, "indeterminate_rate": 0, "seed": 1, "vitals_noise_sd": 1}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("alarm_rate"));

        let ok = SynthConfig::from_json(
            r#"{"n_events": 10, "alarm_rate": 0.1, "label_noise": 0, "indeterminate_rate": 0, "seed": 1, "vitals_noise_sd": 1}"#,
        )
        .unwrap();
        assert_eq!(ok.interval_ms, 1000);
    }
}
