//! Integrated gradients in the joint (node noise, edge noise) space.
//!
//! For each reference `r = (ε_r, ξ_r = 0)` the attribution of coordinate `i`
//! is `(x_i - r_i) · ∫₀¹ ∂S(g(r + t(x - r)))/∂x_i dt`, with the integral taken
//! by the midpoint rule. Attributions are averaged over the references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::report::{AttributionReport, Method, ReportMetadata};
use crate::data::Dataset;
use crate::error::{RcaError, Result};
use crate::mechanism::MechanismModel;
use crate::noise::{GradientScratch, Link, LeafFunction, NoiseAssignment};
use crate::scoring::LeafScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IgConfig {
    /// Path discretization points.
    pub steps: usize,
    /// Reference draws averaged per attribution.
    pub references: usize,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig { steps: 50, references: 5 }
    }
}

impl IgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.references == 0 {
            return Err(RcaError::InvalidConfig("steps and references must be at least 1".into()));
        }
        Ok(())
    }
}

/// Node noises of normal-operation rows, in the leaf function's subgraph
/// coordinates, inferred with the trained MAP weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePool {
    rows: Vec<Vec<f64>>,
}

impl ReferencePool {
    pub fn from_normal<L: Link>(model: &MechanismModel, leaf: &LeafFunction<L>, normal: &Dataset) -> Result<Self> {
        normal.check_against(&model.dag)?;
        let weights = model.mean_weights_flat();
        let rows = normal.iter_rows().map(|row| leaf.node_noise_of_row(&model.dag, row, &weights)).collect();
        Ok(ReferencePool { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        ReferencePool { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// `k` indices drawn uniformly with replacement.
    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.rows.is_empty() {
            return Err(RcaError::EmptyReferencePool);
        }
        Ok((0..k).map(|_| rng.random_range(0..self.rows.len())).collect())
    }

    /// Reference assignment for row `i`: its node noises and zero edge noise.
    pub fn assignment(&self, i: usize, edges: usize) -> NoiseAssignment {
        NoiseAssignment { node: self.rows[i].clone(), edge: vec![0.0; edges] }
    }
}

/// Integrated gradients along the straight path from `reference` to `input`.
/// Returns per-node and per-edge attributions in subgraph coordinates.
pub fn path_integrated_gradients<S: LeafScore, L: Link>(
    leaf: &LeafFunction<L>,
    score: &S,
    reference: &NoiseAssignment,
    input: &NoiseAssignment,
    steps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    reference.check(leaf.dag())?;
    input.check(leaf.dag())?;
    let mut node_acc = vec![0.0; leaf.node_count()];
    let mut edge_acc = vec![0.0; leaf.edge_count()];
    let mut point = reference.clone();
    let mut g = GradientScratch::default();
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        reference.lerp_into(input, t, &mut point);
        let ds = score.derivative(leaf.gradient_into(&point, &mut g));
        for (a, d) in node_acc.iter_mut().zip(&g.d_node) {
            *a += ds * d;
        }
        for (a, d) in edge_acc.iter_mut().zip(&g.d_edge) {
            *a += ds * d;
        }
    }
    let scale = 1.0 / steps as f64;
    let nodes = node_acc
        .iter()
        .zip(input.node.iter().zip(&reference.node))
        .map(|(g, (x, r))| (x - r) * g * scale)
        .collect();
    let edges = edge_acc
        .iter()
        .zip(input.edge.iter().zip(&reference.edge))
        .map(|(g, (x, r))| (x - r) * g * scale)
        .collect();
    Ok((nodes, edges))
}

/// Attributes the score of the target at `inferred` (subgraph coordinates)
/// to every ancestor node and edge noise.
pub fn ig_attribute<S: LeafScore, L: Link>(
    leaf: &LeafFunction<L>,
    score: &S,
    inferred: &NoiseAssignment,
    pool: &ReferencePool,
    cfg: &IgConfig,
    seed: u64,
) -> Result<AttributionReport> {
    cfg.validate()?;
    inferred.check(leaf.dag())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = pool.draw(cfg.references, &mut rng)?;
    let mut nodes = vec![0.0; leaf.node_count()];
    let mut edges = vec![0.0; leaf.edge_count()];
    for &i in &picks {
        let reference = pool.assignment(i, leaf.edge_count());
        let (n, e) = path_integrated_gradients(leaf, score, &reference, inferred, cfg.steps)?;
        nodes.iter_mut().zip(&n).for_each(|(a, b)| *a += b);
        edges.iter_mut().zip(&e).for_each(|(a, b)| *a += b);
    }
    let k = picks.len() as f64;
    let node_scores = nodes.iter().enumerate().map(|(i, s)| (leaf.original_node(i), s / k)).collect();
    let edge_scores = leaf.original_edges().into_iter().zip(&edges).map(|(e, s)| (e, s / k)).collect();
    AttributionReport::new(
        leaf.original_node(leaf.target().0),
        Method::Bigen,
        node_scores,
        edge_scores,
        ReportMetadata {
            rows: 1,
            steps: Some(cfg.steps),
            references: Some(cfg.references),
            gradient_evaluations: cfg.steps * cfg.references,
            ..Default::default()
        },
    )
}
