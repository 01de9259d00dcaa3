//! Episode matching and confusion-matrix metrics.

use chrono::{DateTime, Duration, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::{AlarmEvent, EventKind};

/// Default tolerance for alarms raised ahead of an episode.
pub fn default_lead_window() -> Duration {
    Duration::minutes(30)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    #[serde(rename = "OutC")]
    OutOfControl,
    #[serde(rename = "InC")]
    InControl,
}

/// Ground-truth interval: an out-of-control episode or a labelled in-control stretch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLabel {
    pub start: DateTime<FixedOffset>,
    pub end: DateTime<FixedOffset>,
    pub truth: Truth,
    /// Free-form origin, e.g. the simulated regime that produced the interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl EpisodeLabel {
    pub fn new(start: DateTime<FixedOffset>, end: DateTime<FixedOffset>, truth: Truth) -> Self {
        Self {
            start,
            end,
            truth,
            tag: None,
        }
    }

    pub fn contains(&self, ts: &DateTime<FixedOffset>) -> bool {
        self.start <= *ts && *ts <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("labels overlap: {first} .. {first_end} and {second} .. {second_end}")]
    OverlappingLabels {
        first: DateTime<FixedOffset>,
        first_end: DateTime<FixedOffset>,
        second: DateTime<FixedOffset>,
        second_end: DateTime<FixedOffset>,
    },
    #[error("label ends before it starts: {start} .. {end}")]
    InvertedLabel {
        start: DateTime<FixedOffset>,
        end: DateTime<FixedOffset>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fn_ + o.fn_, self.fp + o.fp, self.tn + o.tn)
    }
}

/// Matches alarms against ground truth.
///
/// An out-of-control episode with at least one alarm in
/// `[start - lead_window, end]` is a true positive, otherwise a false
/// negative. Each alarm that matches no episode is a false positive. An
/// in-control stretch without any alarm is a true negative. Forecast events
/// are ignored.
pub fn match_episodes(
    alarms: &[AlarmEvent],
    labels: &[EpisodeLabel],
    lead_window: Duration,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut labels: Vec<&EpisodeLabel> = labels.iter().collect();
    labels.sort_by_key(|l| l.start);
    for l in &labels {
        if l.end < l.start {
            return Err(MetricsError::InvertedLabel {
                start: l.start,
                end: l.end,
            });
        }
    }
    for w in labels.windows(2) {
        if w[1].start <= w[0].end {
            return Err(MetricsError::OverlappingLabels {
                first: w[0].start,
                first_end: w[0].end,
                second: w[1].start,
                second_end: w[1].end,
            });
        }
    }

    let mut times: Vec<DateTime<FixedOffset>> = alarms
        .iter()
        .filter(|a| a.kind == EventKind::Alarm)
        .map(|a| a.timestamp)
        .collect();
    times.sort();

    let episodes: Vec<&EpisodeLabel> = labels
        .iter()
        .copied()
        .filter(|l| l.truth == Truth::OutOfControl)
        .collect();
    let in_window = |ts: &DateTime<FixedOffset>, e: &EpisodeLabel| {
        e.start - lead_window <= *ts && *ts <= e.end
    };

    let mut cm = ConfusionMatrix::default();
    for e in &episodes {
        if times.iter().any(|t| in_window(t, e)) {
            cm.tp += 1;
        } else {
            cm.fn_ += 1;
        }
    }
    cm.fp = times
        .iter()
        .filter(|t| !episodes.iter().any(|e| in_window(t, e)))
        .count() as u64;
    cm.tn = labels
        .iter()
        .filter(|l| l.truth == Truth::InControl)
        .filter(|l| !times.iter().any(|t| l.contains(t)))
        .count() as u64;
    Ok(cm)
}

/// Every rate and index derived from a confusion matrix.
///
/// `None` marks a metric whose denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    #[serde(rename = "TPR")]
    pub tpr: Option<f64>,
    #[serde(rename = "TNR")]
    pub tnr: Option<f64>,
    #[serde(rename = "FNR")]
    pub fnr: Option<f64>,
    #[serde(rename = "FPR")]
    pub fpr: Option<f64>,
    #[serde(rename = "Prev")]
    pub prev: Option<f64>,
    #[serde(rename = "PPV")]
    pub ppv: Option<f64>,
    #[serde(rename = "NPV")]
    pub npv: Option<f64>,
    #[serde(rename = "FDR")]
    pub fdr: Option<f64>,
    #[serde(rename = "FOR")]
    pub for_: Option<f64>,
    #[serde(rename = "LRplus")]
    pub lr_plus: Option<f64>,
    #[serde(rename = "LRminus")]
    pub lr_minus: Option<f64>,
    #[serde(rename = "Acc")]
    pub acc: Option<f64>,
    #[serde(rename = "BAcc")]
    pub bacc: Option<f64>,
    #[serde(rename = "BM")]
    pub bm: Option<f64>,
    #[serde(rename = "MK")]
    pub mk: Option<f64>,
    #[serde(rename = "PT")]
    pub pt: Option<f64>,
    #[serde(rename = "DOR")]
    pub dor: Option<f64>,
    #[serde(rename = "F1")]
    pub f1: Option<f64>,
    #[serde(rename = "FM")]
    pub fm: Option<f64>,
    #[serde(rename = "CSI")]
    pub csi: Option<f64>,
    #[serde(rename = "MCC")]
    pub mcc: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

fn ratio_opt(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    ratio(num?, den?)
}

impl MetricSet {
    /// `(name, value)` pairs in display order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 21] {
        [
            ("TPR", self.tpr),
            ("TNR", self.tnr),
            ("FNR", self.fnr),
            ("FPR", self.fpr),
            ("Prev", self.prev),
            ("PPV", self.ppv),
            ("NPV", self.npv),
            ("FDR", self.fdr),
            ("FOR", self.for_),
            ("LRplus", self.lr_plus),
            ("LRminus", self.lr_minus),
            ("Acc", self.acc),
            ("BAcc", self.bacc),
            ("BM", self.bm),
            ("MK", self.mk),
            ("PT", self.pt),
            ("DOR", self.dor),
            ("F1", self.f1),
            ("FM", self.fm),
            ("CSI", self.csi),
            ("MCC", self.mcc),
        ]
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricSet {
    let tp = cm.tp as f64;
    let fn_ = cm.fn_ as f64;
    let fp = cm.fp as f64;
    let tn = cm.tn as f64;
    let p = tp + fn_;
    let n = fp + tn;

    let tpr = ratio(tp, p);
    let tnr = ratio(tn, n);
    let fnr = ratio(fn_, p);
    let fpr = ratio(fp, n);
    let ppv = ratio(tp, tp + fp);
    let npv = ratio(tn, tn + fn_);
    let fdr = ratio(fp, tp + fp);
    let for_ = ratio(fn_, tn + fn_);
    let lr_plus = ratio_opt(tpr, fpr);
    let lr_minus = ratio_opt(fnr, tnr);

    let both = |a: Option<f64>, b: Option<f64>| a.zip(b);
    let bacc = both(tpr, tnr).map(|(a, b)| (a + b) / 2.0);
    let bm = both(tpr, tnr).map(|(a, b)| a + b - 1.0);
    let mk = both(ppv, npv).map(|(a, b)| a + b - 1.0);
    let pt = both(tpr, fpr).and_then(|(a, b)| ratio((a * b).sqrt() - b, a - b));
    let fm = both(ppv, tpr).map(|(a, b)| (a * b).sqrt());
    let mcc = match (tpr, tnr, ppv, npv, fnr, fpr, for_, fdr) {
        (Some(a), Some(b), Some(c), Some(d), Some(e), Some(f), Some(g), Some(h)) => {
            Some((a * b * c * d).sqrt() - (e * f * g * h).sqrt())
        }
        _ => None,
    };

    MetricSet {
        tpr,
        tnr,
        fnr,
        fpr,
        prev: ratio(p, p + n),
        ppv,
        npv,
        fdr,
        for_,
        lr_plus,
        lr_minus,
        acc: ratio(tp + tn, p + n),
        bacc,
        bm,
        mk,
        pt,
        dor: ratio_opt(lr_plus, lr_minus),
        f1: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
        fm,
        csi: ratio(tp, tp + fn_ + fp),
        mcc,
    }
}

/// Matthews correlation in covariance form.
pub fn mcc_standard(cm: &ConfusionMatrix) -> Option<f64> {
    let (tp, fn_, fp, tn) = (cm.tp as f64, cm.fn_ as f64, cm.fp as f64, cm.tn as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    ratio(tp * tn - fp * fn_, den)
}
