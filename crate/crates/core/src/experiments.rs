//! Seeded Monte Carlo runners for the four experiments.
//!
//! Every replication gets its own generator, seeded by
//! [`derive_replication_seed`] from the master seed and the replication's
//! position in the `(k, n, replication)` grid. Replications run on a rayon
//! pool, results are collected in index order and reduced serially, so output
//! does not depend on thread count or scheduling.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{self, Binning, EvalSample, UpperEdge, DEFAULT_NUM_BINS};
use crate::error::{Error, Result};
use crate::generative::{make_dataset, GenerativeConfig, HardMode};
use crate::models::{ModelKind, ModelSpec};

pub const DEFAULT_MASTER_SEED: u64 = 20_240_601;
pub const DEFAULT_K_VALUES: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 50.0];
pub const DEFAULT_N_VALUES: [usize; 5] = [500, 1_000, 2_000, 5_000, 10_000];

const K_INDEX_BITS: u32 = 8;
const N_INDEX_BITS: u32 = 8;
const REPLICATION_BITS: u32 = 64 - K_INDEX_BITS - N_INDEX_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Smece,
    Ece,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Smece, Metric::Ece];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Smece => "SMECE",
            Metric::Ece => "ECE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: u8,
    pub k_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub num_bins: usize,
    pub master_seed: u64,
    pub hard_mode: HardMode,
    pub upper_edge: UpperEdge,
}

impl ExperimentConfig {
    /// Standard setup of experiment `id`: k, n, replication counts and threshold labels.
    pub fn standard(id: u8) -> Result<Self> {
        let (k_values, n_values, replications) = match id {
            1 => (vec![2.0], vec![5_000], 1),
            2 => (DEFAULT_K_VALUES.to_vec(), vec![5_000], 1),
            3 => (DEFAULT_K_VALUES.to_vec(), vec![1_000], 1_000),
            4 => (vec![2.0], DEFAULT_N_VALUES.to_vec(), 500),
            other => {
                return Err(Error::config(format!(
                    "experiment id must be 1, 2, 3 or 4, got {other}"
                )))
            }
        };
        Ok(Self {
            experiment_id: id,
            k_values,
            n_values,
            replications,
            num_bins: DEFAULT_NUM_BINS,
            master_seed: DEFAULT_MASTER_SEED,
            hard_mode: HardMode::Threshold,
            upper_edge: UpperEdge::Open,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn binning(&self) -> Result<Binning> {
        Ok(Binning::new(self.num_bins)?.with_upper_edge(self.upper_edge))
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.experiment_id;
        if !(1..=4).contains(&id) {
            return Err(Error::config(format!(
                "experiment id must be 1..=4, got {id}"
            )));
        }
        if self.k_values.is_empty() || self.n_values.is_empty() {
            return Err(Error::config("k and n lists must be non-empty"));
        }
        if let Some(k) = self.k_values.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
            return Err(Error::config(format!("k values must be positive, got {k}")));
        }
        if self.n_values.contains(&0) {
            return Err(Error::config("n values must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if self.num_bins == 0 {
            return Err(Error::config("bin count must be at least 1"));
        }
        if self.k_values.len() > 1 << K_INDEX_BITS || self.n_values.len() > 1 << N_INDEX_BITS {
            return Err(Error::config("at most 256 k values and 256 n values"));
        }
        if self.replications as u64 > 1 << REPLICATION_BITS {
            return Err(Error::config("too many replications"));
        }
        let single = |what: &str, len: usize| {
            if len == 1 {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "experiment {id} takes exactly one {what} value, got {len}"
                )))
            }
        };
        match id {
            1 => {
                single("k", self.k_values.len())?;
                single("n", self.n_values.len())?;
            }
            2 | 3 => single("n", self.n_values.len())?,
            _ => single("k", self.k_values.len())?,
        }
        if matches!(id, 1 | 2) && self.replications != 1 {
            return Err(Error::config(format!(
                "experiment {id} reports single draws; replications must be 1"
            )));
        }
        Ok(())
    }

    fn expect_id(&self, id: u8) -> Result<()> {
        if self.experiment_id != id {
            return Err(Error::config(format!(
                "config is for experiment {}, not {id}",
                self.experiment_id
            )));
        }
        self.validate()
    }
}

/// Thread count for replication fan-out. `None` uses rayon's default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parallelism {
    pub threads: Option<usize>,
}

impl Parallelism {
    pub fn serial() -> Self {
        Self { threads: Some(1) }
    }

    pub fn threads(n: usize) -> Self {
        Self { threads: Some(n) }
    }

    fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            builder = builder.num_threads(n.max(1));
        }
        let pool = builder
            .build()
            .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// SplitMix64 finaliser; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one replication.
///
/// The indices are packed into disjoint bit fields (8 bits k, 8 bits n,
/// 48 bits replication), multiplied by an odd constant, offset by the master
/// seed and passed through the SplitMix64 finaliser. Each step is a bijection
/// on `u64`, so distinct index triples always get distinct seeds.
pub fn derive_replication_seed(
    master_seed: u64,
    k_index: usize,
    n_index: usize,
    replication_index: usize,
) -> u64 {
    assert!(
        k_index < 1 << K_INDEX_BITS,
        "k index {k_index} out of range"
    );
    assert!(
        n_index < 1 << N_INDEX_BITS,
        "n index {n_index} out of range"
    );
    assert!(
        (replication_index as u64) < 1 << REPLICATION_BITS,
        "replication index {replication_index} out of range"
    );
    let packed = (k_index as u64) << (N_INDEX_BITS + REPLICATION_BITS)
        | (n_index as u64) << REPLICATION_BITS
        | replication_index as u64;
    mix64(master_seed.wrapping_add(packed.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Master seed specialised to one experiment, so experiments sharing a
/// master seed draw from unrelated streams.
fn experiment_seed(master_seed: u64, experiment_id: u8) -> u64 {
    mix64(master_seed ^ mix64(0xe7_0000 + experiment_id as u64))
}

/// SMECE and ECE for each model on one freshly drawn dataset, in model order.
pub type ReplicationScores = [[f64; 2]; 5];

/// Draw one dataset and score every model on it.
///
/// The generator is consumed in a fixed order: inputs, then Bernoulli labels
/// (if any), then the random model's predictions.
pub fn score_replication(
    k: f64,
    n: usize,
    hard_mode: HardMode,
    binning: &Binning,
    seed: u64,
) -> Result<ReplicationScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = make_dataset(&GenerativeConfig::new(k, n)?, hard_mode, &mut rng)?;
    let mut scores = [[0.0; 2]; 5];
    for spec in ModelSpec::zoo() {
        let predictions = spec.predict_all(&data.inputs, k, &mut rng);
        let samples = predictions
            .iter()
            .zip(&data.soft_labels)
            .zip(&data.hard_labels)
            .map(|((&p, &s), &y)| EvalSample::with_hard(p, s, if y { 1.0 } else { 0.0 }))
            .collect::<Result<Vec<_>>>()?;
        let (smece, ece) = binning::smece_and_ece(&samples, binning)?;
        scores[spec.kind.index()] = [smece, ece];
    }
    Ok(scores)
}

fn run_replications(
    config: &ExperimentConfig,
    k_index: usize,
    n_index: usize,
    parallelism: &Parallelism,
) -> Result<Vec<ReplicationScores>> {
    let binning = config.binning()?;
    let k = config.k_values[k_index];
    let n = config.n_values[n_index];
    let master = experiment_seed(config.master_seed, config.experiment_id);
    parallelism.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let seed = derive_replication_seed(master, k_index, n_index, r);
                score_replication(k, n, config.hard_mode, &binning, seed)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub model: ModelKind,
    pub metric: Metric,
    pub mean: f64,
    /// Sample standard deviation over replications; 0 for a single replication.
    pub std: f64,
    pub rank: Option<usize>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-model, per-metric mean and std over replications, in model then metric order.
fn summarize(replications: &[ReplicationScores]) -> Vec<MetricCell> {
    let mut cells = Vec::with_capacity(10);
    for model in ModelKind::ALL {
        for (m, metric) in Metric::ALL.into_iter().enumerate() {
            let values: Vec<f64> = replications.iter().map(|r| r[model.index()][m]).collect();
            let (mean, std) = mean_std(&values);
            cells.push(MetricCell {
                model,
                metric,
                mean,
                std,
                rank: None,
            });
        }
    }
    cells
}

/// Ranks 1..=5 by ascending mean per metric; ties go to the earlier letter.
fn assign_ranks(cells: &mut [MetricCell]) {
    for metric in Metric::ALL {
        let mut order: Vec<usize> = (0..cells.len())
            .filter(|&i| cells[i].metric == metric)
            .collect();
        order.sort_by(|&a, &b| {
            cells[a]
                .mean
                .total_cmp(&cells[b].mean)
                .then(cells[a].model.cmp(&cells[b].model))
        });
        for (rank, i) in order.into_iter().enumerate() {
            cells[i].rank = Some(rank + 1);
        }
    }
}

/// Scores for one `(k, n)` condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionScores {
    pub k: f64,
    pub n: usize,
    pub cells: Vec<MetricCell>,
}

impl ConditionScores {
    pub fn cell(&self, model: ModelKind, metric: Metric) -> &MetricCell {
        self.cells
            .iter()
            .find(|c| c.model == model && c.metric == metric)
            .expect("every model and metric is scored")
    }

    pub fn mean(&self, model: ModelKind, metric: Metric) -> f64 {
        self.cell(model, metric).mean
    }
}

/// Which of two models the reference order prefers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairTruth {
    FirstBetter,
    SecondBetter,
    Tied,
}

/// The reference order A > B ≈ C > D > E.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthOrder;

impl GroundTruthOrder {
    /// Lower tier is better calibrated.
    pub fn tier(&self, model: ModelKind) -> u8 {
        match model {
            ModelKind::PosteriorMatching => 0,
            ModelKind::Overconfident | ModelKind::Underconfident => 1,
            ModelKind::BiasedHigh => 2,
            ModelKind::Random => 3,
        }
    }

    pub fn compare(&self, a: ModelKind, b: ModelKind) -> PairTruth {
        match self.tier(a).cmp(&self.tier(b)) {
            std::cmp::Ordering::Less => PairTruth::FirstBetter,
            std::cmp::Ordering::Greater => PairTruth::SecondBetter,
            std::cmp::Ordering::Equal => PairTruth::Tied,
        }
    }

    /// The 10 unordered pairs, each with the earlier letter first.
    pub fn pairs(&self) -> Vec<(ModelKind, ModelKind)> {
        let all = ModelKind::ALL;
        (0..all.len())
            .flat_map(|i| (i + 1..all.len()).map(move |j| (all[i], all[j])))
            .collect()
    }
}

pub fn ground_truth_order() -> GroundTruthOrder {
    GroundTruthOrder
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracy {
    pub first: ModelKind,
    pub second: ModelKind,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub k: f64,
    pub per_pair: Vec<PairAccuracy>,
    pub overall: f64,
}

impl RankingResult {
    pub fn pair(&self, a: ModelKind, b: ModelKind) -> f64 {
        self.per_pair
            .iter()
            .find(|p| (p.first, p.second) == (a, b) || (p.first, p.second) == (b, a))
            .map(|p| p.accuracy)
            .expect("all 10 pairs are present")
    }
}

/// Fraction of replications in which each pair is ordered as the reference
/// order says, by strictly lower score. The tied pair always counts as correct.
pub fn pairwise_accuracy(
    scores_per_replication: &[BTreeMap<ModelKind, f64>],
    k: f64,
) -> Result<RankingResult> {
    if scores_per_replication.is_empty() {
        return Err(Error::domain(
            "pairwise accuracy needs at least one replication",
        ));
    }
    for (r, scores) in scores_per_replication.iter().enumerate() {
        if let Some(m) = ModelKind::ALL.iter().find(|m| !scores.contains_key(m)) {
            return Err(Error::domain(format!(
                "replication {r} has no score for model {m}"
            )));
        }
    }
    let truth = ground_truth_order();
    let reps = scores_per_replication.len() as f64;
    let per_pair: Vec<PairAccuracy> = truth
        .pairs()
        .into_iter()
        .map(|(a, b)| {
            let correct = |s: &BTreeMap<ModelKind, f64>| match truth.compare(a, b) {
                PairTruth::FirstBetter => s[&a] < s[&b],
                PairTruth::SecondBetter => s[&b] < s[&a],
                PairTruth::Tied => true,
            };
            let hits = scores_per_replication.iter().filter(|s| correct(s)).count();
            PairAccuracy {
                first: a,
                second: b,
                accuracy: hits as f64 / reps,
            }
        })
        .collect();
    let overall = per_pair.iter().map(|p| p.accuracy).sum::<f64>() / per_pair.len() as f64;
    Ok(RankingResult {
        k,
        per_pair,
        overall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingCondition {
    pub k: f64,
    pub n: usize,
    pub smece: RankingResult,
    pub ece: RankingResult,
}

impl RankingCondition {
    pub fn metric(&self, metric: Metric) -> &RankingResult {
        match metric {
            Metric::Smece => &self.smece,
            Metric::Ece => &self.ece,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentResult {
    Scores {
        experiment_id: u8,
        replications: usize,
        conditions: Vec<ConditionScores>,
    },
    Ranking {
        experiment_id: u8,
        replications: usize,
        conditions: Vec<RankingCondition>,
    },
}

impl ExperimentResult {
    pub fn experiment_id(&self) -> u8 {
        match self {
            ExperimentResult::Scores { experiment_id, .. }
            | ExperimentResult::Ranking { experiment_id, .. } => *experiment_id,
        }
    }

    pub fn score_conditions(&self) -> &[ConditionScores] {
        match self {
            ExperimentResult::Scores { conditions, .. } => conditions,
            ExperimentResult::Ranking { .. } => &[],
        }
    }

    pub fn ranking_conditions(&self) -> &[RankingCondition] {
        match self {
            ExperimentResult::Ranking { conditions, .. } => conditions,
            ExperimentResult::Scores { .. } => &[],
        }
    }
}

fn run_score_grid(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<Vec<ConditionScores>> {
    let mut conditions = Vec::new();
    for (ki, &k) in config.k_values.iter().enumerate() {
        for (ni, &n) in config.n_values.iter().enumerate() {
            let reps = run_replications(config, ki, ni, parallelism)?;
            conditions.push(ConditionScores {
                k,
                n,
                cells: summarize(&reps),
            });
        }
    }
    Ok(conditions)
}

/// One dataset at a single `(k, n)`; both metrics and per-metric ranks for every model.
pub fn run_experiment1(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<ExperimentResult> {
    config.expect_id(1)?;
    let mut conditions = run_score_grid(config, parallelism)?;
    for c in &mut conditions {
        assign_ranks(&mut c.cells);
    }
    Ok(ExperimentResult::Scores {
        experiment_id: 1,
        replications: config.replications,
        conditions,
    })
}

/// One fresh dataset per `k`.
pub fn run_experiment2(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<ExperimentResult> {
    config.expect_id(2)?;
    Ok(ExperimentResult::Scores {
        experiment_id: 2,
        replications: config.replications,
        conditions: run_score_grid(config, parallelism)?,
    })
}

/// Pairwise ranking accuracy per `k` over many replications.
pub fn run_experiment3(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<ExperimentResult> {
    config.expect_id(3)?;
    let n = config.n_values[0];
    let mut conditions = Vec::with_capacity(config.k_values.len());
    for (ki, &k) in config.k_values.iter().enumerate() {
        let reps = run_replications(config, ki, 0, parallelism)?;
        let per_metric = |m: usize| -> Vec<BTreeMap<ModelKind, f64>> {
            reps.iter()
                .map(|r| {
                    ModelKind::ALL
                        .iter()
                        .map(|&model| (model, r[model.index()][m]))
                        .collect()
                })
                .collect()
        };
        conditions.push(RankingCondition {
            k,
            n,
            smece: pairwise_accuracy(&per_metric(0), k)?,
            ece: pairwise_accuracy(&per_metric(1), k)?,
        });
    }
    Ok(ExperimentResult::Ranking {
        experiment_id: 3,
        replications: config.replications,
        conditions,
    })
}

/// Mean and sample std of both metrics per model across `n`.
pub fn run_experiment4(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<ExperimentResult> {
    config.expect_id(4)?;
    Ok(ExperimentResult::Scores {
        experiment_id: 4,
        replications: config.replications,
        conditions: run_score_grid(config, parallelism)?,
    })
}

/// Dispatch on `config.experiment_id`.
pub fn run_experiment(
    config: &ExperimentConfig,
    parallelism: &Parallelism,
) -> Result<ExperimentResult> {
    config.validate()?;
    match config.experiment_id {
        1 => run_experiment1(config, parallelism),
        2 => run_experiment2(config, parallelism),
        3 => run_experiment3(config, parallelism),
        _ => run_experiment4(config, parallelism),
    }
}
