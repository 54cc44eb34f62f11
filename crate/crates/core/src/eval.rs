//! Binary classification metrics with Alarm as the positive class.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::ingest::{BinaryLabel, Dataset, VitalsSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `tp / (tp + fn)`; 0 when there are no positives.
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; 0 when there are no negatives.
    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(labels: &[BinaryLabel], predictions: &[BinaryLabel]) -> Result<ConfusionMatrix> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (l, p) in labels.iter().zip(predictions) {
        match (l.is_alarm(), p.is_alarm()) {
            (true, true) => m.tp += 1,
            (false, true) => m.fp += 1,
            (true, false) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(m: &ConfusionMatrix) -> f64 {
    let (tp, fp, fn_, tn) = (m.tp as f64, m.fp as f64, m.fn_ as f64, m.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

/// Area under the ROC curve via the rank-sum (Mann–Whitney) statistic.
///
/// Tied scores receive their average rank, which credits a tied
/// positive/negative pair with one half.
pub fn auc(labels: &[BinaryLabel], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    let positives = labels.iter().filter(|l| l.is_alarm()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled ranks keeps the tie midpoints integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end; doubled midpoint = start + 1 + end
        let doubled_mid = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i].is_alarm()).count();
        doubled_rank_sum += doubled_mid * pos_in_group as u128;
        start = end;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// F1 per class, averaged with weights equal to each class's prevalence in `labels`.
pub fn weighted_f1(labels: &[BinaryLabel], predictions: &[BinaryLabel]) -> Result<f64> {
    let m = confusion(labels, predictions)?;
    let n = m.total() as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        let den = 2 * tp + fp + fn_;
        ratio(2 * tp, den)
    };
    let f1_alarm = f1(m.tp, m.fp, m.fn_);
    let f1_non_alarm = f1(m.tn, m.fn_, m.fp);
    let w_alarm = (m.tp + m.fn_) as f64 / n;
    let w_non_alarm = (m.tn + m.fp) as f64 / n;
    Ok(w_alarm * f1_alarm + w_non_alarm * f1_non_alarm)
}

/// Anything that labels a vitals sample and ranks it by alarm likelihood.
pub trait AlarmModel {
    /// Higher means more alarm-like.
    fn score(&self, vitals: &VitalsSample) -> f64;
    /// Greedy (exploration-free) decision.
    fn predict(&self, vitals: &VitalsSample) -> Action;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub mcc: f64,
    pub weighted_f1: f64,
    /// Training epoch of the evaluated snapshot.
    pub epoch: usize,
}

impl EvalReport {
    pub fn from_predictions(
        labels: &[BinaryLabel],
        predictions: &[BinaryLabel],
        scores: &[f64],
        epoch: usize,
    ) -> Result<Self> {
        let confusion = confusion(labels, predictions)?;
        Ok(Self {
            confusion,
            sensitivity: confusion.sensitivity(),
            specificity: confusion.specificity(),
            auc: auc(labels, scores)?,
            mcc: mcc(&confusion),
            weighted_f1: weighted_f1(labels, predictions)?,
            epoch,
        })
    }
}

/// Greedy predictions for the confusion metrics, scores for AUC.
pub fn evaluate<M: AlarmModel + ?Sized>(model: &M, test: &Dataset, epoch: usize) -> Result<EvalReport> {
    let labels: Vec<BinaryLabel> = test.events.iter().map(|e| e.label).collect();
    let predictions: Vec<BinaryLabel> = test
        .events
        .iter()
        .map(|e| model.predict(&e.vitals).as_label())
        .collect();
    let scores: Vec<f64> = test.events.iter().map(|e| model.score(&e.vitals)).collect();
    EvalReport::from_predictions(&labels, &predictions, &scores, epoch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    pub reports: Vec<EvalReport>,
    /// Fewer than `k` reports were available.
    pub short: bool,
}

/// The `k` reports with highest AUC; ties go to higher MCC, then the earlier epoch.
pub fn top_k_reports(reports: &[EvalReport], k: usize) -> Result<TopK> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| {
        b.auc
            .total_cmp(&a.auc)
            .then_with(|| b.mcc.total_cmp(&a.mcc))
            .then_with(|| a.epoch.cmp(&b.epoch))
    });
    let short = sorted.len() < k;
    sorted.truncate(k);
    Ok(TopK { reports: sorted, short })
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub agent: String,
    pub range: String,
    pub auc: f64,
    pub mcc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl TableRow {
    pub fn new(agent: impl Into<String>, range: impl Into<String>, report: &EvalReport) -> Self {
        Self {
            agent: agent.into(),
            range: range.into(),
            auc: report.auc,
            mcc: report.mcc,
            sensitivity: report.sensitivity,
            specificity: report.specificity,
        }
    }
}

/// Orders rows by `(range, agent)`, keeping the input order within a group.
///
/// Ranges sort numerically (`n-0 < n-3 < n-10`), with `n-mixed` and any
/// unrecognised label after the numbered ones.
pub fn sort_rows(rows: &mut [TableRow]) {
    rows.sort_by(|a, b| match range_key(&a.range).cmp(&range_key(&b.range)) {
        Ordering::Equal => a.agent.cmp(&b.agent),
        other => other,
    });
}

fn range_key(range: &str) -> (u8, usize, &str) {
    match range.strip_prefix("n-").map(str::parse::<usize>) {
        Some(Ok(k)) => (0, k, range),
        _ if range == "n-mixed" => (1, 0, range),
        _ => (2, 0, range),
    }
}

/// `agent,range,auc,mcc,sensitivity,specificity`.
pub fn write_table_csv(rows: &[TableRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["agent", "range", "auc", "mcc", "sensitivity", "specificity"])?;
    for r in rows {
        w.write_record([
            r.agent.clone(),
            r.range.clone(),
            format!("{:.3}", r.auc),
            format!("{:.3}", r.mcc),
            format!("{:.3}", r.sensitivity),
            format!("{:.3}", r.specificity),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryLabel::{Alarm as A, NonAlarm as N};

    fn report(auc: f64, mcc: f64, epoch: usize) -> EvalReport {
        EvalReport {
            confusion: ConfusionMatrix::default(),
            sensitivity: 0.0,
            specificity: 0.0,
            auc,
            mcc,
            weighted_f1: 0.0,
            epoch,
        }
    }

    #[test]
    fn confusion_enumeration() {
        let m = confusion(&[A, A, N, N], &[A, N, A, N]).unwrap();
        assert_eq!(
            m,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        let m = confusion(&[A, N, N], &[A, N, N]).unwrap();
        assert_eq!((m.fp, m.fn_), (0, 0));
        assert!(confusion(&[A], &[A, N]).is_err());
    }

    #[test]
    fn mcc_values() {
        let perfect = ConfusionMatrix {
            tp: 5,
            fp: 0,
            fn_: 0,
            tn: 7,
        };
        assert_eq!(mcc(&perfect), 1.0);
        let m = ConfusionMatrix {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 2,
        };
        assert!((mcc(&m) - 1.0 / 3.0).abs() < 1e-15);
        let one_class = ConfusionMatrix {
            tp: 4,
            fp: 6,
            fn_: 0,
            tn: 0,
        };
        assert_eq!(mcc(&one_class), 0.0);
    }

    #[test]
    fn auc_values() {
        assert_eq!(auc(&[A, A, N, N], &[0.9, 0.9, 0.1, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[A, N, A, N], &[0.5; 4]).unwrap(), 0.5);
        assert_eq!(auc(&[A, N, A, N], &[0.8, 0.7, 0.6, 0.2]).unwrap(), 0.75);
        assert!(matches!(auc(&[A, A], &[0.1, 0.2]), Err(Error::UndefinedAuc { .. })));
    }

    #[test]
    fn weighted_f1_values() {
        assert_eq!(weighted_f1(&[A, N, A], &[A, N, A]).unwrap(), 1.0);
        let v = weighted_f1(&[A, A, N], &[A, A, A]).unwrap();
        assert!((v - (2.0 / 3.0) * 0.8).abs() < 1e-12);
        assert_eq!(weighted_f1(&[N, N], &[N, N]).unwrap(), 1.0);
    }

    #[test]
    fn top_k_ordering() {
        let r = [report(0.6, 0.1, 1), report(0.7, 0.1, 2), report(0.65, 0.1, 3)];
        let top = top_k_reports(&r, 3).unwrap();
        assert_eq!(top.reports.iter().map(|r| r.auc).collect::<Vec<_>>(), [0.7, 0.65, 0.6]);
        assert!(!top.short);
        let top1 = top_k_reports(&r, 1).unwrap();
        assert_eq!(top1.reports[0].auc, 0.7);

        let tied = [report(0.7, 0.2, 1), report(0.7, 0.4, 2)];
        assert_eq!(top_k_reports(&tied, 2).unwrap().reports[0].mcc, 0.4);
        let tied_epoch = [report(0.7, 0.2, 9), report(0.7, 0.2, 4)];
        assert_eq!(top_k_reports(&tied_epoch, 1).unwrap().reports[0].epoch, 4);

        let short = top_k_reports(&r, 5).unwrap();
        assert!(short.short);
        assert_eq!(short.reports.len(), 3);
        assert!(top_k_reports(&r, 0).is_err());
    }

    #[test]
    fn table_csv_layout() {
        let mut rows = vec![
            TableRow::new("svm", "n-3", &report(0.723, 0.469, 0)),
            TableRow::new("a2c", "n-3", &report(0.661, 0.319, 0)),
            TableRow::new("a2c", "n-0", &report(0.641, 0.306, 0)),
            TableRow::new("a2c", "n-mixed", &report(0.669, 0.382, 0)),
            TableRow::new("mlp", "n-10", &report(0.691, 0.429, 0)),
        ];
        sort_rows(&mut rows);
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "agent,range,auc,mcc,sensitivity,specificity");
        assert!(lines[1].starts_with("a2c,n-0,0.641"));
        assert!(lines[2].starts_with("a2c,n-3"));
        assert!(lines[3].starts_with("svm,n-3,0.723,0.469"));
        assert!(lines[4].starts_with("mlp,n-10"));
        assert!(lines[5].starts_with("a2c,n-mixed"));
    }
}
