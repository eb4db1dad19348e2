//! Two Gaussian classes `N(±μ, σ²)` with equal priors.
//!
//! The positive-class posterior is the sigmoid `σ(kx)` with steepness
//! `k = 2μ/σ²`. Inputs are drawn uniformly over a fixed interval rather than
//! from the mixture, so every level of posterior uncertainty is covered.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1 / (1 + exp(-z))`.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Posterior probability of the positive class at input `x`.
pub fn posterior(x: f64, k: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!(
            "posterior: input must be finite, got {x}"
        )));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!(
            "posterior: k must be positive, got {k}"
        )));
    }
    Ok(sigmoid(k * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    mu: f64,
    sigma: f64,
}

impl GaussianPair {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite() && sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "Gaussian pair needs mu > 0 and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Implied posterior steepness `2μ/σ²`.
    pub fn steepness(&self) -> f64 {
        2.0 * self.mu / (self.sigma * self.sigma)
    }

    /// Checks that this pair implies the steepness `k`.
    pub fn check_steepness(&self, k: f64) -> Result<()> {
        let implied = self.steepness();
        if (implied - k).abs() <= 1e-12 * k.abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "mu={}, sigma={} imply k={implied}, not {k}",
                self.mu, self.sigma
            )))
        }
    }

    fn log_density(&self, x: f64, mean: f64) -> f64 {
        let z = (x - mean) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Posterior by Bayes' rule on the two class densities, never forming a sigmoid.
///
/// Works with log densities and shifts both by their maximum before
/// exponentiating; raw densities underflow once `|x ∓ μ|` passes ~38σ.
pub fn posterior_oracle(x: f64, pair: &GaussianPair) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!(
            "posterior_oracle: input must be finite, got {x}"
        )));
    }
    let log_pos = pair.log_density(x, pair.mu);
    let log_neg = pair.log_density(x, -pair.mu);
    // Equal priors cancel.
    let shift = log_pos.max(log_neg);
    let pos = (log_pos - shift).exp();
    let neg = (log_neg - shift).exp();
    Ok(pos / (pos + neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardMode {
    /// `y = 1[x >= 0]`.
    #[default]
    Threshold,
    /// `y ~ Bernoulli(p*(x))`.
    Bernoulli,
}

impl std::str::FromStr for HardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(HardMode::Threshold),
            "bernoulli" => Ok(HardMode::Bernoulli),
            other => Err(Error::config(format!(
                "hard mode must be `threshold` or `bernoulli`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for HardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HardMode::Threshold => "threshold",
            HardMode::Bernoulli => "bernoulli",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeConfig {
    pub k: f64,
    pub input_low: f64,
    pub input_high: f64,
    pub n: usize,
}

impl GenerativeConfig {
    pub const DEFAULT_INPUT_LOW: f64 = -3.0;
    pub const DEFAULT_INPUT_HIGH: f64 = 3.0;

    pub fn new(k: f64, n: usize) -> Result<Self> {
        let config = Self {
            k,
            input_low: Self::DEFAULT_INPUT_LOW,
            input_high: Self::DEFAULT_INPUT_HIGH,
            n,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(format!("k must be positive, got {}", self.k)));
        }
        if !(self.input_low.is_finite()
            && self.input_high.is_finite()
            && self.input_low < self.input_high)
        {
            return Err(Error::config(format!(
                "input range [{}, {}] is empty or not finite",
                self.input_low, self.input_high
            )));
        }
        if self.n == 0 {
            return Err(Error::config("sample count n must be at least 1"));
        }
        Ok(())
    }
}

/// `n` i.i.d. uniform inputs over the configured interval.
pub fn sample_inputs<R: Rng + ?Sized>(config: &GenerativeConfig, rng: &mut R) -> Result<Vec<f64>> {
    config.validate()?;
    let dist = Uniform::new(config.input_low, config.input_high);
    Ok((0..config.n).map(|_| dist.sample(rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub k: f64,
    pub inputs: Vec<f64>,
    pub soft_labels: Vec<f64>,
    pub hard_labels: Vec<bool>,
    pub hard_mode: HardMode,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Draws inputs, then (in Bernoulli mode) one uniform per sample for its label.
pub fn make_dataset<R: Rng + ?Sized>(
    config: &GenerativeConfig,
    hard_mode: HardMode,
    rng: &mut R,
) -> Result<LabeledDataset> {
    let inputs = sample_inputs(config, rng)?;
    let soft_labels: Vec<f64> = inputs.iter().map(|&x| sigmoid(config.k * x)).collect();
    let hard_labels = match hard_mode {
        HardMode::Threshold => inputs.iter().map(|&x| x >= 0.0).collect(),
        HardMode::Bernoulli => soft_labels.iter().map(|&p| rng.gen::<f64>() < p).collect(),
    };
    Ok(LabeledDataset {
        k: config.k,
        inputs,
        soft_labels,
        hard_labels,
        hard_mode,
    })
}
