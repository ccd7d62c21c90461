//! Noisy linear causal mechanisms.
//!
//! Each node follows `X_j = (μ_j + ξ_j)ᵀ X_pa(j) + ε_j` with edge noise
//! `ξ_j ~ N(0, α⁻¹ I)` and node noise `ε_j` (Gaussian with precision β by
//! default). Weights are fitted with conjugate Bayesian linear regression:
//!
//! ```text
//! H = P₀ + β XᵀX          (posterior precision, P₀ = αI for a fresh prior)
//! μ = H⁻¹ (P₀ μ₀ + β Xᵀy)
//! ```
//!
//! `H` is always a precision matrix; the covariance is `H⁻¹`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dag::{Dag, NodeId};
use crate::data::Dataset;
use crate::error::{RcaError, Result};
use crate::noise::{propagate, NoiseAssignment};
use crate::scoring::MarginalStats;

/// Fixed precisions: `alpha` for edge noise, `beta` for node noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(alpha) || !ok(beta) {
            return Err(RcaError::InvalidConfig(format!(
                "precisions must be positive and finite (alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Hyperparams { alpha, beta })
    }

    pub fn edge_std(&self) -> f64 {
        self.alpha.sqrt().recip()
    }

    pub fn node_std(&self) -> f64 {
        self.beta.sqrt().recip()
    }
}

/// Distribution of a node's additive noise. Only used when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeNoise {
    Gaussian { std: f64 },
    Gamma { shape: f64, scale: f64 },
}

impl NodeNoise {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NodeNoise::Gaussian { std } => {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            }
            NodeNoise::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            NodeNoise::Gaussian { std } => std,
            NodeNoise::Gamma { shape, scale } => shape.sqrt() * scale,
        }
    }
}

/// Gaussian prior (or posterior) over one node's weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePrior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl NodePrior {
    pub fn isotropic(mean: DVector<f64>, alpha: f64) -> Self {
        let d = mean.len();
        NodePrior { mean, precision: DMatrix::identity(d, d) * alpha }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeMechanism {
    pub node: NodeId,
    pub prior_mean: DVector<f64>,
    pub posterior_mean: DVector<f64>,
    pub posterior_precision: DMatrix<f64>,
    pub noise: NodeNoise,
    /// Set when the precision needed a diagonal ridge to factorize.
    pub ridge_applied: bool,
}

impl NodeMechanism {
    pub fn posterior(&self) -> NodePrior {
        NodePrior { mean: self.posterior_mean.clone(), precision: self.posterior_precision.clone() }
    }

    /// Marginal posterior standard deviation of each weight.
    pub fn posterior_std(&self) -> Result<Vec<f64>> {
        let d = self.posterior_mean.len();
        if d == 0 {
            return Ok(Vec::new());
        }
        let chol = self
            .posterior_precision
            .clone()
            .cholesky()
            .ok_or(RcaError::SingularPrecision { node: self.node })?;
        let cov = chol.inverse();
        Ok((0..d).map(|i| cov[(i, i)].sqrt()).collect())
    }
}

/// A fitted (or generating) noisy mechanism for every node of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismModel {
    pub dag: Dag,
    pub per_node: Vec<NodeMechanism>,
    pub hyper: Hyperparams,
    /// Training-data marginals; empty for purely generative models.
    pub marginal_stats: Vec<MarginalStats>,
}

/// Which prior precision a posterior-as-prior update starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorCarry {
    /// Carry the full trained precision forward (exact sequential update).
    #[default]
    Full,
    /// Keep the trained mean but reset the precision to `αI`.
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    /// Weights fixed at their means for every row.
    MeanWeights,
    /// Fresh edge noise per row.
    #[default]
    ResampleEdgeNoise,
}

impl MechanismModel {
    /// A model used only for sampling: weights fixed at `weights` (per node,
    /// in parent order) and the given node-noise laws.
    pub fn generative(
        dag: Dag,
        weights: Vec<Vec<f64>>,
        hyper: Hyperparams,
        noise: Vec<NodeNoise>,
    ) -> Result<Self> {
        if weights.len() != dag.node_count() || noise.len() != dag.node_count() {
            return Err(RcaError::InvalidConfig("one weight vector and noise law per node".into()));
        }
        for n in &noise {
            let valid = match *n {
                NodeNoise::Gaussian { std } => std >= 0.0 && std.is_finite(),
                NodeNoise::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            };
            if !valid {
                return Err(RcaError::InvalidConfig(format!("invalid node noise {n:?}")));
            }
        }
        let mut per_node = Vec::with_capacity(dag.node_count());
        for (j, (w, nz)) in weights.into_iter().zip(noise).enumerate() {
            let node = NodeId(j);
            if w.len() != dag.parents(node).len() {
                return Err(RcaError::InvalidConfig(format!(
                    "node {j} has {} parents but {} weights",
                    dag.parents(node).len(),
                    w.len()
                )));
            }
            let d = w.len();
            let mean = DVector::from_vec(w);
            per_node.push(NodeMechanism {
                node,
                prior_mean: mean.clone(),
                posterior_mean: mean,
                posterior_precision: DMatrix::identity(d, d) * hyper.alpha,
                noise: nz,
                ridge_applied: false,
            });
        }
        Ok(MechanismModel { dag, per_node, hyper, marginal_stats: Vec::new() })
    }

    pub fn is_fitted(&self) -> bool {
        self.marginal_stats.len() == self.dag.node_count()
    }

    pub fn marginal(&self, node: NodeId) -> Result<MarginalStats> {
        self.dag.check_node(node)?;
        self.marginal_stats
            .get(node.0)
            .copied()
            .ok_or_else(|| RcaError::InvalidConfig("model has no training marginals".into()))
    }

    /// Posterior means flattened in canonical edge order.
    pub fn mean_weights_flat(&self) -> Vec<f64> {
        self.per_node.iter().flat_map(|m| m.posterior_mean.iter().copied()).collect()
    }

    pub fn node_noise(&self, node: NodeId) -> NodeNoise {
        self.per_node[node.0].noise
    }
}

/// Maximum a-posteriori weights: the posterior mean of each node.
pub fn map_weights(model: &MechanismModel) -> Vec<Vec<f64>> {
    model.per_node.iter().map(|m| m.posterior_mean.iter().copied().collect()).collect()
}

/// Draws one full noise assignment from the model's noise laws.
pub fn draw_noise<R: Rng + ?Sized>(model: &MechanismModel, mode: SampleMode, rng: &mut R) -> NoiseAssignment {
    let dag = &model.dag;
    let edge_std = model.hyper.edge_std();
    let mut noise = NoiseAssignment::zeros(dag);
    for j in dag.topological_order() {
        let mech = &model.per_node[j.0];
        let off = dag.edge_offset(*j);
        if mode == SampleMode::ResampleEdgeNoise {
            for k in 0..dag.parents(*j).len() {
                let z: f64 = StandardNormal.sample(rng);
                noise.edge[off + k] = edge_std * z;
            }
        }
        noise.node[j.0] = mech.noise.sample(rng);
    }
    noise
}

/// Samples `n` rows; `perturb` may overwrite each row's noise before propagation.
pub fn sample_with<R, F>(
    model: &MechanismModel,
    n: usize,
    mode: SampleMode,
    rng: &mut R,
    mut perturb: F,
) -> Dataset
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut NoiseAssignment, &mut R),
{
    let weights = model.mean_weights_flat();
    let cols = model.dag.node_count();
    let mut values = Vec::with_capacity(n * cols);
    for row in 0..n {
        let mut noise = draw_noise(model, mode, rng);
        perturb(row, &mut noise, rng);
        values.extend(propagate(&model.dag, &weights, &noise, &crate::noise::Identity));
    }
    Dataset::new(model.dag.names().to_vec(), n, values).expect("finite propagated values")
}

/// Samples `n` rows from the generative process, deterministically in `seed`.
pub fn sample(model: &MechanismModel, n: usize, seed: u64, mode: SampleMode) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(model, n, mode, &mut rng, |_, _, _| {})
}

/// Solves `h x = rhs` for SPD `h`, adding a small ridge only if the first
/// factorization fails. Returns the solution and whether the ridge was used.
pub(crate) fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    if h.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if let Some(chol) = h.clone().cholesky() {
        return Some((chol.solve(rhs), false));
    }
    let d = h.nrows();
    let ridge = 1e-9 * h.trace() / d as f64;
    if ridge <= 0.0 {
        return None;
    }
    let ridged = h + DMatrix::identity(d, d) * ridge;
    ridged.cholesky().map(|c| (c.solve(rhs), true))
}

/// One conjugate update of a node's weight posterior with `(x, y)` evidence.
///
/// `x` is `n × d`; with `n == 0` the prior is returned unchanged.
pub fn conjugate_update(
    prior: &NodePrior,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: f64,
) -> Option<(NodePrior, bool)> {
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;
    let precision = &prior.precision + gram * beta;
    let rhs = &prior.precision * &prior.mean + xty * beta;
    let (mean, ridge) = solve_spd(&precision, &rhs)?;
    Some((NodePrior { mean, precision }, ridge))
}

fn design(data: &Dataset, parents: &[NodeId], node: NodeId) -> (DMatrix<f64>, DVector<f64>) {
    let n = data.rows();
    let x = DMatrix::from_fn(n, parents.len(), |r, c| data.get(r, parents[c]));
    let y = DVector::from_iterator(n, data.column(node));
    (x, y)
}

fn fit_nodes(
    dag: &Dag,
    data: &Dataset,
    beta: f64,
    priors: &[NodePrior],
    noise: &[NodeNoise],
) -> Result<Vec<NodeMechanism>> {
    dag.nodes()
        .map(|j| {
            let prior = &priors[j.0];
            let parents = dag.parents(j);
            if prior.mean.len() != parents.len() || prior.precision.nrows() != parents.len() {
                return Err(RcaError::InvalidConfig(format!("prior dimension mismatch at node {j}")));
            }
            let (x, y) = design(data, parents, j);
            let (post, ridge_applied) =
                conjugate_update(prior, &x, &y, beta).ok_or(RcaError::SingularPrecision { node: j })?;
            Ok(NodeMechanism {
                node: j,
                prior_mean: prior.mean.clone(),
                posterior_mean: post.mean,
                posterior_precision: post.precision,
                noise: noise[j.0],
                ridge_applied,
            })
        })
        .collect()
}

/// Fits every node's weight posterior from training data.
///
/// Without `prior`, each node starts from `N(0, α⁻¹ I)`. Marginal stats are
/// the column-wise ML mean and standard deviation of `data`.
pub fn fit_posterior(
    dag: &Dag,
    data: &Dataset,
    hyper: Hyperparams,
    prior: Option<&[NodePrior]>,
) -> Result<MechanismModel> {
    data.check_against(dag)?;
    if data.is_empty() {
        return Err(RcaError::EmptyDataset);
    }
    let priors: Vec<NodePrior> = match prior {
        Some(p) => {
            if p.len() != dag.node_count() {
                return Err(RcaError::InvalidConfig("one prior per node required".into()));
            }
            p.to_vec()
        }
        None => dag
            .nodes()
            .map(|j| NodePrior::isotropic(DVector::zeros(dag.parents(j).len()), hyper.alpha))
            .collect(),
    };
    let noise = vec![NodeNoise::Gaussian { std: hyper.node_std() }; dag.node_count()];
    let per_node = fit_nodes(dag, data, hyper.beta, &priors, &noise)?;
    let marginal_stats = dag
        .nodes()
        .map(|j| MarginalStats::from_sample(data.column(j)).ok_or(RcaError::DegenerateMarginal { node: j }))
        .collect::<Result<Vec<_>>>()?;
    Ok(MechanismModel { dag: dag.clone(), per_node, hyper, marginal_stats })
}

/// Refits with `data`, using the current posterior as the prior. Marginal
/// stats are carried over untouched.
pub fn update_posterior(model: &MechanismModel, data: &Dataset, carry: PriorCarry) -> Result<MechanismModel> {
    data.check_against(&model.dag)?;
    let priors: Vec<NodePrior> = model
        .per_node
        .iter()
        .map(|m| match carry {
            PriorCarry::Full => m.posterior(),
            PriorCarry::Fresh => NodePrior::isotropic(m.posterior_mean.clone(), model.hyper.alpha),
        })
        .collect();
    let noise: Vec<NodeNoise> = model.per_node.iter().map(|m| m.noise).collect();
    let mut per_node = fit_nodes(&model.dag, data, model.hyper.beta, &priors, &noise)?;
    for (new, old) in per_node.iter_mut().zip(&model.per_node) {
        new.prior_mean = old.prior_mean.clone();
    }
    Ok(MechanismModel {
        dag: model.dag.clone(),
        per_node,
        hyper: model.hyper,
        marginal_stats: model.marginal_stats.clone(),
    })
}

// ---------------------------------------------------------------------------
// Serialization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub hyper: Hyperparams,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub name: String,
    pub parents: Vec<usize>,
    pub prior_mean: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    /// Row-major `d × d`.
    pub posterior_precision: Vec<f64>,
    pub noise: NodeNoise,
    #[serde(default)]
    pub ridge_applied: bool,
    pub marginal: Option<MarginalStats>,
}

impl MechanismModel {
    pub fn to_file(&self) -> ModelFile {
        let nodes = self
            .dag
            .nodes()
            .map(|j| {
                let m = &self.per_node[j.0];
                let d = m.posterior_mean.len();
                NodeRecord {
                    name: self.dag.name(j).to_string(),
                    parents: self.dag.parents(j).iter().map(|p| p.0).collect(),
                    prior_mean: m.prior_mean.iter().copied().collect(),
                    posterior_mean: m.posterior_mean.iter().copied().collect(),
                    posterior_precision: (0..d * d).map(|k| m.posterior_precision[(k / d, k % d)]).collect(),
                    noise: m.noise,
                    ridge_applied: m.ridge_applied,
                    marginal: self.marginal_stats.get(j.0).copied(),
                }
            })
            .collect();
        ModelFile { hyper: self.hyper, nodes }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let parents = file.nodes.iter().map(|n| n.parents.clone()).collect();
        let names = file.nodes.iter().map(|n| n.name.clone()).collect();
        let dag = Dag::from_parents(parents, Some(names))?;
        let hyper = Hyperparams::new(file.hyper.alpha, file.hyper.beta)?;
        let mut per_node = Vec::with_capacity(file.nodes.len());
        for (j, rec) in file.nodes.iter().enumerate() {
            let d = rec.parents.len();
            if rec.prior_mean.len() != d || rec.posterior_mean.len() != d || rec.posterior_precision.len() != d * d {
                return Err(RcaError::Parse(format!("node {j}: vector sizes do not match {d} parents")));
            }
            per_node.push(NodeMechanism {
                node: NodeId(j),
                prior_mean: DVector::from_column_slice(&rec.prior_mean),
                posterior_mean: DVector::from_column_slice(&rec.posterior_mean),
                posterior_precision: DMatrix::from_row_slice(d, d, &rec.posterior_precision),
                noise: rec.noise,
                ridge_applied: rec.ridge_applied,
            });
        }
        let marginal_stats = if file.nodes.iter().all(|n| n.marginal.is_some()) {
            file.nodes.iter().map(|n| n.marginal.unwrap()).collect()
        } else {
            Vec::new()
        };
        if marginal_stats.iter().any(|s: &MarginalStats| !(s.std > 0.0)) {
            return Err(RcaError::Parse("marginal std must be positive".into()));
        }
        Ok(MechanismModel { dag, per_node, hyper, marginal_stats })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?)
    }
}
