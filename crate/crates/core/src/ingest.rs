//! Normalized ingest: line-delimited JSON streams in, DS1/DS2 datasets out.
//!
//! Three streams feed the pipeline, one JSON object per line:
//!
//! ```text
//! vitals:      {"t": 1000, "hr": 80, "rr": 14, "sbp": 120, "dbp": 80, "map": 93, "spo2": 98}
//! annotations: {"t": 1000, "severity": "emergent"}
//! alarms:      {"t": 1000, "code": "HR HIGH"}
//! ```
//!
//! Timestamps are integer milliseconds and must strictly increase within a
//! stream. Alarm lines are carried as metadata only; labels come from the
//! annotations.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Default annotation-to-vitals matching tolerance.
pub const DEFAULT_MATCH_TOLERANCE_MS: i64 = 500;

/// Number of scalars in a vitals sample (and in the agents' state vector).
pub const VITALS_DIM: usize = 6;

/// The six monitored physiological scalars at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalsSample {
    /// Heart rate, beats/min.
    pub hr: f64,
    /// Respiratory rate, breaths/min.
    pub rr: f64,
    /// Systolic blood pressure, mmHg.
    pub sbp: f64,
    /// Diastolic blood pressure, mmHg.
    pub dbp: f64,
    /// Mean arterial pressure, mmHg.
    pub map: f64,
    /// Peripheral oxygen saturation, percent.
    pub spo2: f64,
}

impl VitalsSample {
    pub const FIELDS: [&'static str; VITALS_DIM] = ["hr", "rr", "sbp", "dbp", "map", "spo2"];

    pub fn to_array(&self) -> [f64; VITALS_DIM] {
        [self.hr, self.rr, self.sbp, self.dbp, self.map, self.spo2]
    }

    pub fn from_array(v: [f64; VITALS_DIM]) -> Self {
        Self {
            hr: v[0],
            rr: v[1],
            sbp: v[2],
            dbp: v[3],
            map: v[4],
            spo2: v[5],
        }
    }

    /// Checks finiteness and physical ranges; returns the offending field.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        for (name, value) in Self::FIELDS.iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err((name, format!("{value} is not finite")));
            }
            if value < 0.0 {
                return Err((name, format!("{value} is negative")));
            }
        }
        if self.spo2 > 100.0 {
            return Err(("spo2", format!("{} exceeds 100", self.spo2)));
        }
        Ok(())
    }
}

/// Annotated clinical severity of an event, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityClass {
    NoEvent,
    NonUrgent,
    Indeterminate,
    Urgent,
    Emergent,
}

impl SeverityClass {
    pub const ALL: [SeverityClass; 5] = [
        SeverityClass::NoEvent,
        SeverityClass::NonUrgent,
        SeverityClass::Indeterminate,
        SeverityClass::Urgent,
        SeverityClass::Emergent,
    ];

    /// Emergent and urgent events are alarms; everything else is not.
    pub fn label(self) -> BinaryLabel {
        match self {
            SeverityClass::Emergent | SeverityClass::Urgent => BinaryLabel::Alarm,
            SeverityClass::Indeterminate | SeverityClass::NonUrgent | SeverityClass::NoEvent => BinaryLabel::NonAlarm,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityClass::NoEvent => "no_event",
            SeverityClass::NonUrgent => "non_urgent",
            SeverityClass::Indeterminate => "indeterminate",
            SeverityClass::Urgent => "urgent",
            SeverityClass::Emergent => "emergent",
        }
    }
}

impl fmt::Display for SeverityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SeverityClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown severity `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    NonAlarm,
    Alarm,
}

impl BinaryLabel {
    pub fn is_alarm(self) -> bool {
        self == BinaryLabel::Alarm
    }

    pub fn as_u8(self) -> u8 {
        match self {
            BinaryLabel::NonAlarm => 0,
            BinaryLabel::Alarm => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEvent {
    /// Milliseconds since the epoch.
    pub timestamp: i64,
    pub vitals: VitalsSample,
    pub severity: SeverityClass,
    pub label: BinaryLabel,
}

impl AnnotatedEvent {
    pub fn new(timestamp: i64, vitals: VitalsSample, severity: SeverityClass) -> Self {
        Self {
            timestamp,
            vitals,
            severity,
            label: severity.label(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetVariant {
    /// Merged data at native resolution, indeterminate events kept.
    Ds1,
    /// Indeterminate events removed, one event per second.
    Ds2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train|test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    Millisecond,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub events: Vec<AnnotatedEvent>,
    pub variant: DatasetVariant,
    pub split: Split,
    pub resolution: Resolution,
}

/// Per-label event counts, as tabulated for the train/test summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub alarms: usize,
    pub non_alarms: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.alarms + self.non_alarms
    }
}

impl Dataset {
    pub fn new(events: Vec<AnnotatedEvent>, variant: DatasetVariant, split: Split, resolution: Resolution) -> Self {
        Self {
            events,
            variant,
            split,
            resolution,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn class_counts(&self) -> ClassCounts {
        let alarms = self.events.iter().filter(|e| e.label.is_alarm()).count();
        ClassCounts {
            alarms,
            non_alarms: self.events.len() - alarms,
        }
    }

    /// Same metadata, different events.
    pub fn with_events(&self, events: Vec<AnnotatedEvent>) -> Self {
        Self { events, ..self.clone() }
    }

    pub fn vitals(&self) -> impl Iterator<Item = &VitalsSample> {
        self.events.iter().map(|e| &e.vitals)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedVitals {
    pub timestamp: i64,
    pub vitals: VitalsSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub timestamp: i64,
    pub severity: SeverityClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmRecord {
    pub timestamp: i64,
    pub code: String,
}

/// Parsed, timestamp-ordered contents of the three ingest streams.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawStreams {
    pub vitals: Vec<TimedVitals>,
    pub alarms: Vec<AlarmRecord>,
    pub annotations: Vec<Annotation>,
}

/// Parses the three normalized streams.
///
/// Blank lines are skipped. Every error carries the stream name and the
/// 1-based line number.
pub fn parse_records(vitals: impl BufRead, alarms: impl BufRead, annotations: impl BufRead) -> Result<RawStreams> {
    let vitals = parse_stream("vitals", vitals, |line, obj| {
        let mut values = [0.0; VITALS_DIM];
        for (slot, field) in values.iter_mut().zip(VitalsSample::FIELDS) {
            *slot = number_field("vitals", line, obj, field)?;
        }
        let vitals = VitalsSample::from_array(values);
        vitals.validate().map_err(|(field, reason)| Error::Parse {
            stream: "vitals",
            line,
            message: format!("field `{field}`: {reason}"),
        })?;
        Ok(vitals)
    })?
    .into_iter()
    .map(|(timestamp, vitals)| TimedVitals { timestamp, vitals })
    .collect();

    let alarms = parse_stream("alarms", alarms, |line, obj| {
        string_field("alarms", line, obj, "code").map(str::to_owned)
    })?
    .into_iter()
    .map(|(timestamp, code)| AlarmRecord { timestamp, code })
    .collect();

    let annotations = parse_stream("annotations", annotations, |line, obj| {
        let raw = string_field("annotations", line, obj, "severity")?;
        match raw.parse::<SeverityClass>() {
            Ok(SeverityClass::NoEvent) | Err(_) => Err(Error::Parse {
                stream: "annotations",
                line,
                message: format!("field `severity`: `{raw}` is not one of emergent|urgent|indeterminate|non_urgent"),
            }),
            Ok(severity) => Ok(severity),
        }
    })?
    .into_iter()
    .map(|(timestamp, severity)| Annotation { timestamp, severity })
    .collect();

    Ok(RawStreams {
        vitals,
        alarms,
        annotations,
    })
}

fn parse_stream<T>(
    stream: &'static str,
    reader: impl BufRead,
    mut record: impl FnMut(usize, &Map<String, Value>) -> Result<T>,
) -> Result<Vec<(i64, T)>> {
    let mut out = Vec::new();
    let mut previous: Option<i64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            stream,
            line: line_no,
            message: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(Error::Parse {
                stream,
                line: line_no,
                message: "expected a JSON object".into(),
            });
        };
        let t = match obj.get("t") {
            None => {
                return Err(Error::MissingField {
                    stream,
                    line: line_no,
                    field: "t",
                })
            }
            Some(v) => v.as_i64().ok_or_else(|| Error::Parse {
                stream,
                line: line_no,
                message: format!("field `t`: expected integer milliseconds, got {v}"),
            })?,
        };
        if let Some(prev) = previous {
            if t <= prev {
                return Err(Error::Ordering {
                    stream,
                    line: line_no,
                    previous: prev,
                    current: t,
                });
            }
        }
        previous = Some(t);
        out.push((t, record(line_no, &obj)?));
    }
    Ok(out)
}

fn number_field(stream: &'static str, line: usize, obj: &Map<String, Value>, field: &'static str) -> Result<f64> {
    let value = obj.get(field).ok_or(Error::MissingField { stream, line, field })?;
    value.as_f64().ok_or_else(|| Error::Parse {
        stream,
        line,
        message: format!("field `{field}`: expected a number, got {value}"),
    })
}

fn string_field<'a>(
    stream: &'static str,
    line: usize,
    obj: &'a Map<String, Value>,
    field: &'static str,
) -> Result<&'a str> {
    let value = obj.get(field).ok_or(Error::MissingField { stream, line, field })?;
    value.as_str().ok_or_else(|| Error::Parse {
        stream,
        line,
        message: format!("field `{field}`: expected a string, got {value}"),
    })
}

/// Joins annotations onto vitals samples, producing DS1.
///
/// Each annotation attaches to the nearest vitals sample within
/// `tolerance_ms` (earlier sample on equal distance). When several
/// annotations land on one sample the most severe wins. Samples without an
/// annotation are `NoEvent`.
pub fn merge_by_timestamp(
    vitals: &[TimedVitals],
    annotations: &[Annotation],
    split: Split,
    tolerance_ms: i64,
) -> Result<Dataset> {
    let mut severities = vec![SeverityClass::NoEvent; vitals.len()];
    let mut unmatched = Vec::new();

    for ann in annotations {
        match nearest_within(vitals, ann.timestamp, tolerance_ms) {
            Some(idx) => severities[idx] = severities[idx].max(ann.severity),
            None => unmatched.push(ann.timestamp),
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedAnnotations { timestamps: unmatched });
    }

    let events = vitals
        .iter()
        .zip(severities)
        .map(|(v, severity)| AnnotatedEvent::new(v.timestamp, v.vitals, severity))
        .collect();
    Ok(Dataset::new(
        events,
        DatasetVariant::Ds1,
        split,
        Resolution::Millisecond,
    ))
}

fn nearest_within(vitals: &[TimedVitals], t: i64, tolerance_ms: i64) -> Option<usize> {
    let pos = vitals.partition_point(|v| v.timestamp < t);
    let before = pos.checked_sub(1).map(|i| (i, t - vitals[i].timestamp));
    let after = vitals.get(pos).map(|v| (pos, v.timestamp - t));
    let best = match (before, after) {
        (Some(b), Some(a)) => {
            if a.1 < b.1 {
                a
            } else {
                b
            }
        }
        (Some(b), None) => b,
        (None, Some(a)) => a,
        (None, None) => return None,
    };
    (best.1 <= tolerance_ms).then_some(best.0)
}

/// Removes every indeterminate event, preserving order.
pub fn drop_indeterminate(dataset: &Dataset) -> Dataset {
    dataset.with_events(
        dataset
            .events
            .iter()
            .filter(|e| e.severity != SeverityClass::Indeterminate)
            .copied()
            .collect(),
    )
}

/// Collapses events into whole-second buckets.
///
/// Vitals are averaged within a bucket; the bucket's severity is the most
/// severe one present and its label follows from that. The output timestamp
/// is the start of the second. Seconds without samples are omitted.
pub fn downsample_to_seconds(dataset: &Dataset) -> Dataset {
    let mut events = Vec::new();
    let mut iter = dataset.events.iter().peekable();
    while let Some(first) = iter.next() {
        let second = first.timestamp.div_euclid(1000);
        let mut sums = first.vitals.to_array();
        let mut count = 1usize;
        let mut severity = first.severity;
        while let Some(next) = iter.next_if(|e| e.timestamp.div_euclid(1000) == second) {
            for (s, v) in sums.iter_mut().zip(next.vitals.to_array()) {
                *s += v;
            }
            count += 1;
            severity = severity.max(next.severity);
        }
        let means = sums.map(|s| s / count as f64);
        events.push(AnnotatedEvent::new(
            second * 1000,
            VitalsSample::from_array(means),
            severity,
        ));
    }
    Dataset {
        events,
        resolution: Resolution::Second,
        ..dataset.clone()
    }
}

/// DS2: indeterminate events removed, then per-second mean downsampling.
pub fn build_ds2(ds1: &Dataset) -> Dataset {
    let mut ds2 = downsample_to_seconds(&drop_indeterminate(ds1));
    ds2.variant = DatasetVariant::Ds2;
    ds2
}

pub const CSV_HEADER: [&str; 9] = ["t", "hr", "rr", "sbp", "dbp", "map", "spo2", "severity", "label"];

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: i64,
    hr: f64,
    rr: f64,
    sbp: f64,
    dbp: f64,
    map: f64,
    spo2: f64,
    severity: String,
    label: u8,
}

/// Writes `t,hr,rr,sbp,dbp,map,spo2,severity,label`, one row per event.
pub fn write_dataset_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in &dataset.events {
        let v = e.vitals;
        w.serialize(CsvRow {
            t: e.timestamp,
            hr: v.hr,
            rr: v.rr,
            sbp: v.sbp,
            dbp: v.dbp,
            map: v.map,
            spo2: v.spo2,
            severity: e.severity.as_str().to_owned(),
            label: e.label.as_u8(),
        })?;
    }
    if dataset.events.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV written by [`write_dataset_csv`].
///
/// The file does not record the variant: a file whose timestamps all fall on
/// whole seconds and that holds no indeterminate event is taken to be DS2 at
/// second resolution, anything else DS1.
pub fn read_dataset_csv(reader: impl Read, split: Split) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            stream: "dataset",
            line: 1,
            message: format!("expected header `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut events = Vec::new();
    for (idx, row) in r.deserialize::<CsvRow>().enumerate() {
        let line = idx + 2;
        let row = row?;
        let severity: SeverityClass = row.severity.parse().map_err(|message| Error::Parse {
            stream: "dataset",
            line,
            message,
        })?;
        let event = AnnotatedEvent::new(
            row.t,
            VitalsSample {
                hr: row.hr,
                rr: row.rr,
                sbp: row.sbp,
                dbp: row.dbp,
                map: row.map,
                spo2: row.spo2,
            },
            severity,
        );
        if event.label.as_u8() != row.label {
            return Err(Error::Parse {
                stream: "dataset",
                line,
                message: format!("label {} contradicts severity {severity}", row.label),
            });
        }
        if let Some(prev) = events.last().map(|e: &AnnotatedEvent| e.timestamp) {
            if event.timestamp <= prev {
                return Err(Error::Ordering {
                    stream: "dataset",
                    line,
                    previous: prev,
                    current: event.timestamp,
                });
            }
        }
        events.push(event);
    }
    let on_seconds = events.iter().all(|e| e.timestamp.rem_euclid(1000) == 0);
    let has_indeterminate = events.iter().any(|e| e.severity == SeverityClass::Indeterminate);
    let (variant, resolution) = if on_seconds && !has_indeterminate && !events.is_empty() {
        (DatasetVariant::Ds2, Resolution::Second)
    } else {
        (DatasetVariant::Ds1, Resolution::Millisecond)
    };
    Ok(Dataset::new(events, variant, split, resolution))
}

/// Serializes vitals samples as normalized ingest lines.
pub fn vitals_lines(samples: &[TimedVitals]) -> String {
    let mut out = String::new();
    for s in samples {
        let v = &s.vitals;
        let line = serde_json::json!({
            "t": s.timestamp, "hr": v.hr, "rr": v.rr, "sbp": v.sbp,
            "dbp": v.dbp, "map": v.map, "spo2": v.spo2,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Serializes annotations as normalized ingest lines.
pub fn annotation_lines(annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        let line = serde_json::json!({ "t": a.timestamp, "severity": a.severity.as_str() });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
