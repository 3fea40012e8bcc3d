//! Evaluation statistics: confusion counts, derived rates, bootstrap
//! intervals, exact McNemar tests and per-CWE breakdowns.
//!
//! The positive class is "vulnerable". Rates with a zero denominator are
//! reported as 0 and flagged in [`MetricSet::undefined`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, Manifest};
use crate::cwe::Cwe;
use crate::extraction::{cwe_match, CweHierarchy, Prediction};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction for unknown sample `{0}`")]
    UnknownSample(String),
    #[error("more than one prediction for sample `{0}`")]
    DuplicatePrediction(String),
    #[error("no prediction for sample `{0}`")]
    MissingPrediction(String),
    #[error("bootstrap needs at least one resample")]
    NoResamples,
    #[error("bootstrap needs a non-empty dataset")]
    EmptyDataset,
    #[error("{metric} undefined on {skipped} of {resamples} resamples (limit 10%)")]
    TooManyUndefined {
        metric: Metric,
        skipped: usize,
        resamples: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: Label, predicted_vulnerable: bool) {
        match (truth, predicted_vulnerable) {
            (Label::Vulnerable, true) => self.tp += 1,
            (Label::Vulnerable, false) => self.fn_ += 1,
            (Label::Benign, true) => self.fp += 1,
            (Label::Benign, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(
            2.0 * self.tp as f64,
            (2 * self.tp + self.fp + self.fn_) as f64,
        )
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp as f64, (self.fp + self.tn) as f64)
    }

    pub fn mcc(&self) -> Option<f64> {
        let (tp, fp, tn, fn_) = (
            self.tp as f64,
            self.fp as f64,
            self.tn as f64,
            self.fn_ as f64,
        );
        let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
        ratio(tp * tn - fp * fn_, den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    F1,
    Fpr,
    Mcc,
    CweMatchRate,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Precision,
        Metric::Recall,
        Metric::F1,
        Metric::Fpr,
        Metric::Mcc,
        Metric::CweMatchRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Fpr => "fpr",
            Metric::Mcc => "mcc",
            Metric::CweMatchRate => "cwe_match_rate",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub mcc: f64,
    /// Absent when there are no true positives.
    pub cwe_match_rate: Option<f64>,
    /// Metrics whose denominator vanished; their value above is 0.
    #[serde(default)]
    pub undefined: BTreeSet<Metric>,
    #[serde(default)]
    pub ci: BTreeMap<Metric, (f64, f64)>,
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Precision => Some(self.precision),
            Metric::Recall => Some(self.recall),
            Metric::F1 => Some(self.f1),
            Metric::Fpr => Some(self.fpr),
            Metric::Mcc => Some(self.mcc),
            Metric::CweMatchRate => self.cwe_match_rate,
        }
    }
}

/// Rates for `cm`. `cwe_match_rate` is left absent; see [`cwe_match_rate`].
pub fn metric_set(cm: &ConfusionMatrix) -> MetricSet {
    let mut undefined = BTreeSet::new();
    let mut take = |m: Metric, v: Option<f64>| {
        v.unwrap_or_else(|| {
            undefined.insert(m);
            0.0
        })
    };
    let precision = take(Metric::Precision, cm.precision());
    let recall = take(Metric::Recall, cm.recall());
    let f1 = take(Metric::F1, cm.f1());
    let fpr = take(Metric::Fpr, cm.fpr());
    let mcc = take(Metric::Mcc, cm.mcc());
    MetricSet {
        precision,
        recall,
        f1,
        fpr,
        mcc,
        cwe_match_rate: None,
        undefined,
        ci: BTreeMap::new(),
    }
}

/// One prediction joined with its ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub truth: Label,
    pub cwe: Cwe,
    pub predicted_vulnerable: bool,
    pub cwe_hit: bool,
}

/// Join predictions with the manifest, one per sample, in manifest order.
pub fn outcomes(
    predictions: &[Prediction],
    manifest: &Manifest,
    hierarchy: &CweHierarchy,
) -> Result<Vec<Outcome>, MetricsError> {
    let by_id = index_predictions(predictions, manifest)?;
    manifest
        .samples()
        .iter()
        .map(|s| {
            let p = by_id
                .get(s.id.as_str())
                .ok_or_else(|| MetricsError::MissingPrediction(s.id.clone()))?;
            Ok(Outcome {
                truth: s.label,
                cwe: s.cwe,
                predicted_vulnerable: p.predicted_vulnerable,
                cwe_hit: p.predicted_vulnerable && cwe_match(&p.effective_cwes(), s.cwe, hierarchy),
            })
        })
        .collect()
}

fn index_predictions<'a>(
    predictions: &'a [Prediction],
    manifest: &Manifest,
) -> Result<HashMap<&'a str, &'a Prediction>, MetricsError> {
    let mut by_id = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if manifest.get(&p.sample_id).is_none() {
            return Err(MetricsError::UnknownSample(p.sample_id.clone()));
        }
        if by_id.insert(p.sample_id.as_str(), p).is_some() {
            return Err(MetricsError::DuplicatePrediction(p.sample_id.clone()));
        }
    }
    Ok(by_id)
}

fn confusion_of<'a>(items: impl IntoIterator<Item = &'a Outcome>) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for o in items {
        cm.add(o.truth, o.predicted_vulnerable);
    }
    cm
}

/// Confusion counts; every manifest sample needs exactly one prediction.
pub fn confusion(
    predictions: &[Prediction],
    manifest: &Manifest,
) -> Result<ConfusionMatrix, MetricsError> {
    let joined = outcomes(predictions, manifest, &CweHierarchy::flat())?;
    Ok(confusion_of(&joined))
}

fn match_rate<'a>(items: impl IntoIterator<Item = &'a Outcome>) -> Option<f64> {
    let (mut tp, mut hits) = (0u64, 0u64);
    for o in items {
        if o.truth == Label::Vulnerable && o.predicted_vulnerable {
            tp += 1;
            hits += u64::from(o.cwe_hit);
        }
    }
    ratio(hits as f64, tp as f64)
}

/// Share of true positives whose predicted CWEs match the truth; `None`
/// without true positives.
pub fn cwe_match_rate(
    predictions: &[Prediction],
    manifest: &Manifest,
    hierarchy: &CweHierarchy,
) -> Result<Option<f64>, MetricsError> {
    Ok(match_rate(&outcomes(predictions, manifest, hierarchy)?))
}

/// Confusion matrix plus every rate, including the CWE match rate.
pub fn evaluate(
    predictions: &[Prediction],
    manifest: &Manifest,
    hierarchy: &CweHierarchy,
) -> Result<(ConfusionMatrix, MetricSet), MetricsError> {
    let joined = outcomes(predictions, manifest, hierarchy)?;
    let cm = confusion_of(&joined);
    let mut set = metric_set(&cm);
    set.cwe_match_rate = match_rate(&joined);
    Ok((cm, set))
}

fn metric_on<'a>(
    metric: Metric,
    items: impl IntoIterator<Item = &'a Outcome> + Clone,
) -> Option<f64> {
    match metric {
        Metric::CweMatchRate => match_rate(items),
        _ => {
            let cm = confusion_of(items);
            match metric {
                Metric::Precision => cm.precision(),
                Metric::Recall => cm.recall(),
                Metric::F1 => cm.f1(),
                Metric::Fpr => cm.fpr(),
                Metric::Mcc => cm.mcc(),
                Metric::CweMatchRate => unreachable!(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lo: f64,
    pub hi: f64,
    /// Resamples on which the metric was undefined.
    pub skipped: usize,
}

/// Percentile of sorted `values` with linear interpolation between order
/// statistics: rank `q·(m−1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over pre-joined outcomes.
///
/// Resample `r` draws from ChaCha8 seeded with `seed` on stream `r`, so the
/// interval does not depend on evaluation order.
pub fn bootstrap_outcomes(
    metric: Metric,
    items: &[Outcome],
    config: &BootstrapConfig,
) -> Result<BootstrapInterval, MetricsError> {
    if config.resamples == 0 {
        return Err(MetricsError::NoResamples);
    }
    if items.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let n = items.len();
    let mut values = Vec::with_capacity(config.resamples);
    let mut draw = Vec::with_capacity(n);
    for r in 0..config.resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(r as u64);
        draw.clear();
        draw.extend((0..n).map(|_| items[rng.gen_range(0..n)]));
        if let Some(v) = metric_on(metric, draw.iter()) {
            values.push(v);
        }
    }
    let skipped = config.resamples - values.len();
    if skipped * 10 > config.resamples || values.is_empty() {
        return Err(MetricsError::TooManyUndefined {
            metric,
            skipped,
            resamples: config.resamples,
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        lo: percentile(&values, 0.025),
        hi: percentile(&values, 0.975),
        skipped,
    })
}

/// 95% percentile bootstrap interval for `metric` over the joined data.
pub fn bootstrap_ci(
    metric: Metric,
    predictions: &[Prediction],
    manifest: &Manifest,
    hierarchy: &CweHierarchy,
    config: &BootstrapConfig,
) -> Result<BootstrapInterval, MetricsError> {
    bootstrap_outcomes(metric, &outcomes(predictions, manifest, hierarchy)?, config)
}

/// Two-sided exact McNemar p-value from the discordant counts.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let tail = if n <= 1000 {
        // P(X = 0) is exact in binary; later terms by the ratio C(n,i+1)/C(n,i).
        let mut term = 0.5f64.powi(n as i32);
        let mut sum = term;
        for i in 0..k {
            term *= (n - i) as f64 / (i + 1) as f64;
            sum += term;
        }
        sum
    } else {
        let mut log_term = n as f64 * 0.5f64.ln();
        let mut logs = vec![log_term];
        for i in 0..k {
            log_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
            logs.push(log_term);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>()
    };
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub a: String,
    pub b: String,
    /// Samples only `a` got right.
    pub only_a: u64,
    /// Samples only `b` got right.
    pub only_b: u64,
    pub p_value: f64,
}

/// Discordant counts (only-A-correct, only-B-correct) over the manifest.
pub fn discordant_counts(
    a: &[Prediction],
    b: &[Prediction],
    manifest: &Manifest,
) -> Result<(u64, u64), MetricsError> {
    let flat = CweHierarchy::flat();
    let oa = outcomes(a, manifest, &flat)?;
    let ob = outcomes(b, manifest, &flat)?;
    let correct = |o: &Outcome| o.predicted_vulnerable == (o.truth == Label::Vulnerable);
    let mut counts = (0, 0);
    for (x, y) in oa.iter().zip(&ob) {
        match (correct(x), correct(y)) {
            (true, false) => counts.0 += 1,
            (false, true) => counts.1 += 1,
            _ => {}
        }
    }
    Ok(counts)
}

/// McNemar test for every unordered pair of named prediction sets.
pub fn pairwise_mcnemar(
    systems: &[(String, Vec<Prediction>)],
    manifest: &Manifest,
) -> Result<Vec<McNemarResult>, MetricsError> {
    let mut out = Vec::new();
    for (i, (name_a, a)) in systems.iter().enumerate() {
        for (name_b, b) in &systems[i + 1..] {
            let (only_a, only_b) = discordant_counts(a, b, manifest)?;
            out.push(McNemarResult {
                a: name_a.clone(),
                b: name_b.clone(),
                only_a,
                only_b,
                p_value: mcnemar_exact(only_a, only_b),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CweRow {
    pub cwe: Cwe,
    pub tp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
    pub fpr: Option<f64>,
    pub recall: Option<f64>,
}

/// Confusion counts per ground-truth CWE over the samples that have a
/// prediction, in CWE order.
pub fn per_cwe_breakdown(
    predictions: &[Prediction],
    manifest: &Manifest,
) -> Result<Vec<CweRow>, MetricsError> {
    let by_id = index_predictions(predictions, manifest)?;
    let mut table: BTreeMap<Cwe, ConfusionMatrix> = BTreeMap::new();
    for s in manifest.samples() {
        if let Some(p) = by_id.get(s.id.as_str()) {
            table
                .entry(s.cwe)
                .or_default()
                .add(s.label, p.predicted_vulnerable);
        }
    }
    Ok(table
        .into_iter()
        .map(|(cwe, cm)| CweRow {
            cwe,
            tp: cm.tp,
            fn_: cm.fn_,
            tn: cm.tn,
            fp: cm.fp,
            fpr: cm.fpr(),
            recall: cm.recall(),
        })
        .collect())
}
