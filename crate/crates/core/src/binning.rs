//! Binned calibration statistics over equal-width prediction bins.
//!
//! Bin `b` (1-based) of `B` covers `[(b-1)/B, b/B)`. Both ECE and SMECE are
//! bin-weighted mean absolute gaps,
//!
//! ```text
//! metric = Σ_b (|S_b| / n) · |p̂_b − t̄_b|
//! ```
//!
//! where `t̄_b` is the hard-label positive fraction (ECE) or the mean soft
//! label (SMECE). Both targets go through the same accumulator so that binary
//! soft labels give a bit-identical SMECE and ECE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NUM_BINS: usize = 10;

/// One evaluation record: prediction, soft label and optional hard label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    prediction: f64,
    soft_label: f64,
    hard_label: Option<bool>,
}

fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must lie in [0, 1], got {value}"
        )))
    }
}

impl EvalSample {
    pub fn new(prediction: f64, soft_label: f64) -> Result<Self> {
        check_probability("prediction", prediction)?;
        check_probability("soft_label", soft_label)?;
        Ok(Self {
            prediction,
            soft_label,
            hard_label: None,
        })
    }

    /// Builds a sample carrying a hard label, which must be exactly 0 or 1.
    pub fn with_hard(prediction: f64, soft_label: f64, hard_label: f64) -> Result<Self> {
        let hard = if hard_label == 0.0 {
            false
        } else if hard_label == 1.0 {
            true
        } else {
            return Err(Error::domain(format!(
                "hard_label must be 0 or 1, got {hard_label}"
            )));
        };
        Ok(Self {
            hard_label: Some(hard),
            ..Self::new(prediction, soft_label)?
        })
    }

    pub fn prediction(&self) -> f64 {
        self.prediction
    }

    pub fn soft_label(&self) -> f64 {
        self.soft_label
    }

    pub fn hard_label(&self) -> Option<bool> {
        self.hard_label
    }

    fn hard_value(&self) -> Option<f64> {
        self.hard_label.map(|y| if y { 1.0 } else { 0.0 })
    }
}

/// What happens to a prediction of exactly 1.0.
///
/// `Closed` puts it in the last bin. `Open` keeps every bin strictly
/// half-open, so such predictions fall in no bin: they contribute nothing to
/// any bin term but still count towards `n`. The experiment runners default
/// to `Open`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpperEdge {
    #[default]
    Closed,
    Open,
}

impl std::str::FromStr for UpperEdge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(UpperEdge::Closed),
            "open" => Ok(UpperEdge::Open),
            other => Err(Error::config(format!(
                "upper edge must be `closed` or `open`, got `{other}`"
            ))),
        }
    }
}

/// Equal-width binning of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    num_bins: usize,
    upper_edge: UpperEdge,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            num_bins: DEFAULT_NUM_BINS,
            upper_edge: UpperEdge::Closed,
        }
    }
}

impl Binning {
    pub fn new(num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::domain("bin count must be at least 1"));
        }
        Ok(Self {
            num_bins,
            upper_edge: UpperEdge::Closed,
        })
    }

    pub fn with_upper_edge(mut self, upper_edge: UpperEdge) -> Self {
        self.upper_edge = upper_edge;
        self
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn upper_edge(&self) -> UpperEdge {
        self.upper_edge
    }

    /// Lower edge of 1-based bin `b`, as `(b-1)/B`.
    pub fn lower_edge(&self, bin: usize) -> f64 {
        (bin - 1) as f64 / self.num_bins as f64
    }

    /// 1-based bin holding `p`, or `None` for `p == 1.0` under [`UpperEdge::Open`].
    ///
    /// Membership is decided against the floating-point edges `i / B`, not
    /// against the rounded product `p * B`.
    pub fn bin_of(&self, p: f64) -> Result<Option<usize>> {
        check_probability("prediction", p)?;
        let nb = self.num_bins;
        if p == 1.0 {
            return Ok(match self.upper_edge {
                UpperEdge::Closed => Some(nb),
                UpperEdge::Open => None,
            });
        }
        let edge = |i: usize| i as f64 / nb as f64;
        let mut idx = ((p * nb as f64).floor() as usize).min(nb - 1);
        while idx > 0 && p < edge(idx) {
            idx -= 1;
        }
        while idx + 1 < nb && p >= edge(idx + 1) {
            idx += 1;
        }
        Ok(Some(idx + 1))
    }
}

/// Bin index in `[1, B]` for `p`, with the last bin closed at 1.0.
pub fn assign_bin(p: f64, num_bins: usize) -> Result<usize> {
    let bin = Binning::new(num_bins)?.bin_of(p)?;
    Ok(bin.expect("closed binning assigns every probability"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin_index: usize,
    pub count: usize,
    /// Mean prediction; 0 when `count == 0`.
    pub mean_prediction: f64,
    /// Mean soft label; 0 when `count == 0`.
    pub mean_soft_label: f64,
    /// Fraction of hard positives, present only if every sample has a hard label.
    pub hard_fraction: Option<f64>,
}

impl BinSummary {
    fn weight(&self, n: usize) -> f64 {
        self.count as f64 / n as f64
    }
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    count: usize,
    prediction: f64,
    soft: f64,
    hard: f64,
}

/// Returns whether all samples carry hard labels, rejecting mixed inputs.
fn hard_labels_present(samples: &[EvalSample]) -> Result<bool> {
    let with_hard = samples.iter().filter(|s| s.hard_label.is_some()).count();
    if with_hard == 0 {
        Ok(false)
    } else if with_hard == samples.len() {
        Ok(true)
    } else {
        Err(Error::domain(format!(
            "{with_hard} of {} samples carry a hard label; either all or none must",
            samples.len()
        )))
    }
}

/// Per-bin counts and means, exactly `B` entries in bin order.
pub fn summarize_bins(samples: &[EvalSample], binning: &Binning) -> Result<Vec<BinSummary>> {
    if samples.is_empty() {
        return Err(Error::domain("cannot summarise an empty sample list"));
    }
    let has_hard = hard_labels_present(samples)?;

    let mut acc = vec![Accumulator::default(); binning.num_bins()];
    for s in samples {
        let Some(bin) = binning.bin_of(s.prediction)? else {
            continue;
        };
        let a = &mut acc[bin - 1];
        a.count += 1;
        a.prediction += s.prediction;
        a.soft += s.soft_label;
        if let Some(y) = s.hard_value() {
            a.hard += y;
        }
    }

    Ok(acc
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mean = |sum: f64| {
                if a.count == 0 {
                    0.0
                } else {
                    sum / a.count as f64
                }
            };
            BinSummary {
                bin_index: i + 1,
                count: a.count,
                mean_prediction: mean(a.prediction),
                mean_soft_label: mean(a.soft),
                hard_fraction: has_hard.then(|| mean(a.hard)),
            }
        })
        .collect())
}

/// Weighted sum over non-empty bins in index order.
fn weighted_gap(bins: &[BinSummary], n: usize, target: impl Fn(&BinSummary) -> f64) -> f64 {
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| b.weight(n) * (b.mean_prediction - target(b)).abs())
        .sum()
}

fn smece_from_bins(bins: &[BinSummary], n: usize) -> f64 {
    weighted_gap(bins, n, |b| b.mean_soft_label)
}

fn ece_from_bins(bins: &[BinSummary], n: usize) -> Option<f64> {
    if bins.iter().any(|b| b.hard_fraction.is_none()) {
        return None;
    }
    Some(weighted_gap(bins, n, |b| {
        b.hard_fraction.unwrap_or_default()
    }))
}

/// Expected calibration error against hard labels.
pub fn ece(samples: &[EvalSample], binning: &Binning) -> Result<f64> {
    if samples.iter().any(|s| s.hard_label.is_none()) {
        return Err(Error::domain("ECE needs a hard label on every sample"));
    }
    let bins = summarize_bins(samples, binning)?;
    Ok(ece_from_bins(&bins, samples.len()).expect("hard labels checked above"))
}

/// Soft-label expected calibration error: ECE with the per-bin hard-label
/// fraction replaced by the mean soft label.
pub fn smece(samples: &[EvalSample], binning: &Binning) -> Result<f64> {
    let bins = summarize_bins(samples, binning)?;
    Ok(smece_from_bins(&bins, samples.len()))
}

/// Mean squared difference between predictions and (possibly soft) targets.
pub fn brier(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::domain(format!(
            "brier: {} predictions but {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::domain("brier: empty input"));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReliabilityTarget {
    Soft,
    Hard,
}

impl std::str::FromStr for ReliabilityTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(ReliabilityTarget::Soft),
            "hard" => Ok(ReliabilityTarget::Hard),
            other => Err(Error::config(format!(
                "target must be `soft` or `hard`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub mean_prediction: f64,
    pub mean_target: f64,
    /// `|S_b| / n`; the weights sum to 1 unless predictions of 1.0 were left unbinned.
    pub weight: f64,
}

/// One point per non-empty bin, for a standard (hard) or soft reliability diagram.
pub fn reliability_points(
    samples: &[EvalSample],
    binning: &Binning,
    target: ReliabilityTarget,
) -> Result<Vec<ReliabilityPoint>> {
    let bins = summarize_bins(samples, binning)?;
    if target == ReliabilityTarget::Hard && bins.iter().any(|b| b.hard_fraction.is_none()) {
        return Err(Error::domain("hard reliability diagram needs hard labels"));
    }
    let n = samples.len();
    Ok(bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| ReliabilityPoint {
            mean_prediction: b.mean_prediction,
            mean_target: match target {
                ReliabilityTarget::Soft => b.mean_soft_label,
                ReliabilityTarget::Hard => b.hard_fraction.unwrap_or_default(),
            },
            weight: b.weight(n),
        })
        .collect())
}

/// Every metric for one sample set, plus the bins they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub smece: f64,
    pub ece: Option<f64>,
    pub brier_soft: f64,
    pub brier_hard: Option<f64>,
    pub bins: Vec<BinSummary>,
    pub n: usize,
    pub num_bins: usize,
    pub upper_edge: UpperEdge,
}

impl CalibrationReport {
    pub fn compute(samples: &[EvalSample], binning: &Binning) -> Result<Self> {
        let bins = summarize_bins(samples, binning)?;
        let n = samples.len();
        let predictions: Vec<f64> = samples.iter().map(|s| s.prediction).collect();
        let soft: Vec<f64> = samples.iter().map(|s| s.soft_label).collect();
        let hard: Option<Vec<f64>> = samples.iter().map(|s| s.hard_value()).collect();

        Ok(Self {
            smece: smece_from_bins(&bins, n),
            ece: ece_from_bins(&bins, n),
            brier_soft: brier(&predictions, &soft)?,
            brier_hard: hard.map(|h| brier(&predictions, &h)).transpose()?,
            bins,
            n,
            num_bins: binning.num_bins(),
            upper_edge: binning.upper_edge(),
        })
    }

    /// SMECE recomputed from the stored bins.
    pub fn smece_from_bins(&self) -> f64 {
        smece_from_bins(&self.bins, self.n)
    }
}

/// SMECE and ECE from a single pass over the bins. Requires hard labels.
pub(crate) fn smece_and_ece(samples: &[EvalSample], binning: &Binning) -> Result<(f64, f64)> {
    let bins = summarize_bins(samples, binning)?;
    let n = samples.len();
    let ece = ece_from_bins(&bins, n)
        .ok_or_else(|| Error::domain("ECE needs a hard label on every sample"))?;
    Ok((smece_from_bins(&bins, n), ece))
}
