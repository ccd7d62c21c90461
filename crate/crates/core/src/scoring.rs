//! Gaussian tail-probability outlier scores.
//!
//! `S(x) = -ln Φ(-z)` with `z = |x - μ| / σ`, evaluated in the log domain so
//! that it stays finite and monotone far into the tail.

use serde::{Deserialize, Serialize};

use crate::dag::NodeId;
use crate::error::Result;
use crate::mechanism::MechanismModel;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Above this z the continued fraction for the Mills ratio is used.
const TAIL_SWITCH: f64 = 8.0;
const MILLS_DEPTH: usize = 160;

/// Marginal mean and standard deviation of one node under normal operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalStats {
    pub mean: f64,
    pub std: f64,
}

impl MarginalStats {
    pub fn new(mean: f64, std: f64) -> Self {
        debug_assert!(std > 0.0);
        MarginalStats { mean, std }
    }

    /// Maximum-likelihood mean and standard deviation of a sample.
    pub fn from_sample(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.into_iter().collect();
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        (std > 0.0 && std.is_finite()).then_some(MarginalStats { mean, std })
    }
}

pub fn z_value(stats: MarginalStats, x: f64) -> f64 {
    ((x - stats.mean) / stats.std).abs()
}

/// Mills ratio `Φ(-z)/φ(z)` by backward evaluation of its continued fraction.
fn mills_ratio(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=MILLS_DEPTH).rev() {
        t = z + k as f64 / t;
    }
    1.0 / t
}

/// `ln Φ(-z)`, finite for every finite z.
pub fn log_upper_tail(z: f64) -> f64 {
    if z < TAIL_SWITCH {
        (0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)).ln()
    } else {
        -0.5 * z * z - LN_SQRT_2PI + mills_ratio(z).ln()
    }
}

/// Inverse Mills ratio `φ(z)/Φ(-z)`.
pub fn hazard(z: f64) -> f64 {
    if z < TAIL_SWITCH {
        (-0.5 * z * z - LN_SQRT_2PI - log_upper_tail(z)).exp()
    } else {
        1.0 / mills_ratio(z)
    }
}

/// Outlier score of a standardized distance.
pub fn score_from_z(z: f64) -> f64 {
    -log_upper_tail(z)
}

pub fn outlier_score(stats: MarginalStats, x: f64) -> f64 {
    score_from_z(z_value(stats, x))
}

/// `dS/dx`. The subgradient at `x == mean` is taken as 0.
pub fn outlier_score_derivative(stats: MarginalStats, x: f64) -> f64 {
    let d = x - stats.mean;
    if d == 0.0 {
        return 0.0;
    }
    d.signum() / stats.std * hazard(d.abs() / stats.std)
}

pub fn score_of_leaf(model: &MechanismModel, target: NodeId, x: f64) -> Result<f64> {
    Ok(outlier_score(model.marginal(target)?, x))
}

/// A differentiable scalar function of the target value that attributions explain.
pub trait LeafScore: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// The tail-probability outlier score under fixed marginal stats.
#[derive(Debug, Clone, Copy)]
pub struct OutlierScore(pub MarginalStats);

impl LeafScore for OutlierScore {
    fn value(&self, x: f64) -> f64 {
        outlier_score(self.0, x)
    }

    fn derivative(&self, x: f64) -> f64 {
        outlier_score_derivative(self.0, x)
    }
}

/// The raw target value; IG over it must satisfy completeness exactly up to quadrature.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityScore;

impl LeafScore for IdentityScore {
    fn value(&self, x: f64) -> f64 {
        x
    }

    fn derivative(&self, _x: f64) -> f64 {
        1.0
    }
}

/// `factor * inner(x)`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledScore<S> {
    pub factor: f64,
    pub inner: S,
}

impl<S: LeafScore> LeafScore for ScaledScore<S> {
    fn value(&self, x: f64) -> f64 {
        self.factor * self.inner.value(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.factor * self.inner.derivative(x)
    }
}
