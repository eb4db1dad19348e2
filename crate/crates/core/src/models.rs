//! The five reference predictors, parameterised by the generative steepness `k`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// `σ(kx)`, the true posterior.
    #[serde(rename = "A")]
    PosteriorMatching,
    /// `σ(3kx)`.
    #[serde(rename = "B")]
    Overconfident,
    /// `σ(0.4kx)`.
    #[serde(rename = "C")]
    Underconfident,
    /// `min(σ(kx) + 0.15, 1)`.
    #[serde(rename = "D")]
    BiasedHigh,
    /// `Uniform(0, 1)`, ignoring `x`.
    #[serde(rename = "E")]
    Random,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::PosteriorMatching,
        ModelKind::Overconfident,
        ModelKind::Underconfident,
        ModelKind::BiasedHigh,
        ModelKind::Random,
    ];

    pub fn letter(self) -> char {
        match self {
            ModelKind::PosteriorMatching => 'A',
            ModelKind::Overconfident => 'B',
            ModelKind::Underconfident => 'C',
            ModelKind::BiasedHigh => 'D',
            ModelKind::Random => 'E',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PosteriorMatching => "Posterior-matching",
            ModelKind::Overconfident => "Overconfident",
            ModelKind::Underconfident => "Underconfident",
            ModelKind::BiasedHigh => "Biased high",
            ModelKind::Random => "Random",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.letter() == c)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub over_factor: f64,
    pub under_factor: f64,
    pub bias: f64,
}

impl ModelSpec {
    pub const OVER_FACTOR: f64 = 3.0;
    pub const UNDER_FACTOR: f64 = 0.4;
    pub const BIAS: f64 = 0.15;

    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            over_factor: Self::OVER_FACTOR,
            under_factor: Self::UNDER_FACTOR,
            bias: Self::BIAS,
        }
    }

    /// The five models with their default parameters, in letter order.
    pub fn zoo() -> [ModelSpec; 5] {
        ModelKind::ALL.map(ModelSpec::new)
    }

    /// Predicted probability at `x`. `rng` must be given for the random model
    /// and is ignored otherwise.
    pub fn predict(&self, x: f64, k: f64, rng: Option<&mut dyn RngCore>) -> Result<f64> {
        let p = match self.kind {
            ModelKind::PosteriorMatching => sigmoid(k * x),
            ModelKind::Overconfident => sigmoid(self.over_factor * k * x),
            ModelKind::Underconfident => sigmoid(self.under_factor * k * x),
            ModelKind::BiasedHigh => (sigmoid(k * x) + self.bias).min(1.0),
            ModelKind::Random => {
                let rng =
                    rng.ok_or_else(|| Error::domain("the random model needs a seeded generator"))?;
                rng.gen::<f64>()
            }
        };
        Ok(p)
    }

    /// Predictions for every input; the random model draws one value per input in order.
    pub fn predict_all(&self, inputs: &[f64], k: f64, rng: &mut dyn RngCore) -> Vec<f64> {
        match self.kind {
            ModelKind::Random => inputs.iter().map(|_| rng.gen::<f64>()).collect(),
            _ => inputs
                .iter()
                .map(|&x| self.predict(x, k, None).expect("deterministic model"))
                .collect(),
        }
    }
}
