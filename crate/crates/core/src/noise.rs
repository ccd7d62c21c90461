//! The target value as a function of node and edge noise.
//!
//! Unrolling every ancestor mechanism expresses the target as
//! `x_t = g(ε, ξ)`. [`LeafFunction`] evaluates `g` and its exact gradient with
//! one forward sweep and one reverse (adjoint) sweep over the ancestor
//! subgraph, so each gradient costs `O(d + e)`.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::dag::{Dag, EdgeId, NodeId, Subgraph};
use crate::data::Dataset;
use crate::error::{RcaError, Result};
use crate::mechanism::{update_posterior, MechanismModel, PriorCarry};

/// Node noise per node and edge noise per edge (canonical edge order) of some graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAssignment {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl NoiseAssignment {
    pub fn zeros(dag: &Dag) -> Self {
        NoiseAssignment { node: vec![0.0; dag.node_count()], edge: vec![0.0; dag.edge_count()] }
    }

    pub fn check(&self, dag: &Dag) -> Result<()> {
        if self.node.len() != dag.node_count() || self.edge.len() != dag.edge_count() {
            return Err(RcaError::KeyMismatch(format!(
                "expected {} node and {} edge noises, got {} and {}",
                dag.node_count(),
                dag.edge_count(),
                self.node.len(),
                self.edge.len()
            )));
        }
        Ok(())
    }

    /// Restricts a full-graph assignment to the coordinates of `sub`.
    pub fn restrict(&self, full: &Dag, sub: &Subgraph) -> Self {
        let node = sub.mapping.iter().map(|v| self.node[v.0]).collect();
        let edge = sub
            .dag
            .edges()
            .map(|e| {
                let orig = sub.original_edge(e);
                self.edge[full.edge_index(orig).expect("subgraph edge exists in parent graph")]
            })
            .collect();
        NoiseAssignment { node, edge }
    }

    /// `self + t (other - self)`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        NoiseAssignment { node: mix(&self.node, &other.node), edge: mix(&self.edge, &other.edge) }
    }

    /// [`lerp`](Self::lerp) into an existing buffer.
    pub fn lerp_into(&self, other: &Self, t: f64, out: &mut Self) {
        let mix = |a: &[f64], b: &[f64], o: &mut Vec<f64>| {
            o.clear();
            o.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
        };
        mix(&self.node, &other.node, &mut out.node);
        mix(&self.edge, &other.edge, &mut out.edge);
    }
}

/// Scalar link `f` in `X_j = f(Wᵀ X_pa) + ε_j`.
pub trait Link: Sync + Send {
    fn apply(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Link for Identity {
    #[inline]
    fn apply(&self, u: f64) -> f64 {
        u
    }
    #[inline]
    fn derivative(&self, _u: f64) -> f64 {
        1.0
    }
}

/// Forward pass over a whole graph with mean weights `weights` (canonical edge
/// order). Roots take their noise value directly.
pub fn propagate<L: Link>(dag: &Dag, weights: &[f64], noise: &NoiseAssignment, link: &L) -> Vec<f64> {
    let mut x = vec![0.0; dag.node_count()];
    for &j in dag.topological_order() {
        let parents = dag.parents(j);
        if parents.is_empty() {
            x[j.0] = noise.node[j.0];
            continue;
        }
        let off = dag.edge_offset(j);
        let u: f64 = parents
            .iter()
            .enumerate()
            .map(|(k, p)| (weights[off + k] + noise.edge[off + k]) * x[p.0])
            .sum();
        x[j.0] = link.apply(u) + noise.node[j.0];
    }
    x
}

/// Node noises that reproduce `row` exactly under `weights` (plus edge noise, if any).
pub fn infer_node_noise_with<L: Link>(dag: &Dag, row: &[f64], weights: &[f64], link: &L) -> Vec<f64> {
    dag.nodes()
        .map(|j| {
            let parents = dag.parents(j);
            if parents.is_empty() {
                return row[j.0];
            }
            let off = dag.edge_offset(j);
            let u: f64 = parents.iter().enumerate().map(|(k, p)| weights[off + k] * row[p.0]).sum();
            row[j.0] - link.apply(u)
        })
        .collect()
}

/// `ε_j = x_j - W_jᵀ x_pa(j)` for every node, with the supplied weights.
pub fn infer_node_noise(dag: &Dag, row: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if row.len() != dag.node_count() {
        return Err(RcaError::ColumnMismatch { expected: dag.node_count(), got: row.len() });
    }
    if weights.len() != dag.edge_count() {
        return Err(RcaError::KeyMismatch(format!(
            "{} weights for {} edges",
            weights.len(),
            dag.edge_count()
        )));
    }
    Ok(infer_node_noise_with(dag, row, weights, &Identity))
}

/// Batch-level edge noise `ξ' = W' - W`, where `W'` is the MAP of a refit on
/// `abnormal` with the trained posterior as prior. One value per edge of the
/// full graph, canonical order.
pub fn infer_edge_noise(model: &MechanismModel, abnormal: &Dataset, carry: PriorCarry) -> Result<Vec<f64>> {
    if abnormal.is_empty() {
        return Err(RcaError::EmptyDataset);
    }
    let updated = update_posterior(model, abnormal, carry)?;
    let before = model.mean_weights_flat();
    Ok(updated.mean_weights_flat().iter().zip(&before).map(|(a, b)| a - b).collect())
}

/// Output of a forward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Values of every subgraph node (subgraph coordinates).
    pub values: Vec<f64>,
    pub leaf: f64,
}

/// Exact partial derivatives of the target with respect to every noise coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub leaf_value: f64,
    pub d_node: Vec<f64>,
    pub d_edge: Vec<f64>,
}

/// `g(ε, ξ)` for one target: its ancestor subgraph and the mean weights on it.
#[derive(Debug)]
pub struct LeafFunction<L: Link = Identity> {
    pub sub: Subgraph,
    /// Mean weights restricted to the subgraph, canonical edge order.
    pub weights: Vec<f64>,
    link: L,
    gradient_calls: AtomicUsize,
    forward_calls: AtomicUsize,
}

impl LeafFunction<Identity> {
    pub fn new(model: &MechanismModel, target: NodeId) -> Result<Self> {
        Self::with_link(model, target, Identity)
    }
}

impl<L: Link> LeafFunction<L> {
    pub fn with_link(model: &MechanismModel, target: NodeId, link: L) -> Result<Self> {
        let sub = model.dag.ancestor_subgraph(target)?;
        let full = model.mean_weights_flat();
        let weights = sub
            .dag
            .edges()
            .map(|e| full[model.dag.edge_index(sub.original_edge(e)).expect("edge exists")])
            .collect();
        Ok(LeafFunction {
            sub,
            weights,
            link,
            gradient_calls: AtomicUsize::new(0),
            forward_calls: AtomicUsize::new(0),
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.sub.dag
    }

    pub fn target(&self) -> NodeId {
        self.sub.target
    }

    pub fn node_count(&self) -> usize {
        self.sub.dag.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.sub.dag.edge_count()
    }

    pub fn original_node(&self, local: usize) -> NodeId {
        self.sub.mapping[local]
    }

    pub fn original_edges(&self) -> Vec<EdgeId> {
        self.sub.dag.edges().map(|e| self.sub.original_edge(e)).collect()
    }

    pub fn gradient_evaluations(&self) -> usize {
        self.gradient_calls.load(Ordering::Relaxed)
    }

    pub fn forward_evaluations(&self) -> usize {
        self.forward_calls.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.gradient_calls.store(0, Ordering::Relaxed);
        self.forward_calls.store(0, Ordering::Relaxed);
    }

    /// Node noises of an observed full-graph row under the given full-graph
    /// weights, restricted to the subgraph.
    pub fn node_noise_of_row(&self, full_dag: &Dag, row: &[f64], full_weights: &[f64]) -> Vec<f64> {
        let dag = &self.sub.dag;
        dag.nodes()
            .map(|j| {
                let orig = self.sub.original(j);
                let parents = full_dag.parents(orig);
                if parents.is_empty() {
                    return row[orig.0];
                }
                let off = full_dag.edge_offset(orig);
                let u: f64 = parents.iter().enumerate().map(|(k, p)| full_weights[off + k] * row[p.0]).sum();
                row[orig.0] - self.link.apply(u)
            })
            .collect()
    }

    fn sweep(&self, noise: &NoiseAssignment, pre: &mut [f64], x: &mut [f64]) {
        let dag = &self.sub.dag;
        for &j in dag.topological_order() {
            let parents = dag.parents(j);
            if parents.is_empty() {
                x[j.0] = noise.node[j.0];
                continue;
            }
            let off = dag.edge_offset(j);
            let mut u = 0.0;
            for (k, p) in parents.iter().enumerate() {
                u += (self.weights[off + k] + noise.edge[off + k]) * x[p.0];
            }
            pre[j.0] = u;
            x[j.0] = self.link.apply(u) + noise.node[j.0];
        }
    }

    pub fn forward(&self, noise: &NoiseAssignment) -> Result<Forward> {
        noise.check(&self.sub.dag)?;
        Ok(self.forward_unchecked(noise))
    }

    pub(crate) fn forward_unchecked(&self, noise: &NoiseAssignment) -> Forward {
        self.forward_calls.fetch_add(1, Ordering::Relaxed);
        let n = self.node_count();
        let mut pre = vec![0.0; n];
        let mut x = vec![0.0; n];
        self.sweep(noise, &mut pre, &mut x);
        let leaf = x[self.sub.target.0];
        Forward { values: x, leaf }
    }

    /// Target value only, for coalition games that mix node noises.
    pub(crate) fn leaf_of_node_noise(&self, node_noise: &[f64], edge_noise: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self.forward_calls.fetch_add(1, Ordering::Relaxed);
        let dag = &self.sub.dag;
        scratch.clear();
        scratch.resize(dag.node_count(), 0.0);
        for &j in dag.topological_order() {
            let parents = dag.parents(j);
            if parents.is_empty() {
                scratch[j.0] = node_noise[j.0];
                continue;
            }
            let off = dag.edge_offset(j);
            let mut u = 0.0;
            for (k, p) in parents.iter().enumerate() {
                u += (self.weights[off + k] + edge_noise[off + k]) * scratch[p.0];
            }
            scratch[j.0] = self.link.apply(u) + node_noise[j.0];
        }
        scratch[self.sub.target.0]
    }

    pub fn gradient(&self, noise: &NoiseAssignment) -> Result<GradientBundle> {
        noise.check(&self.sub.dag)?;
        Ok(self.gradient_unchecked(noise))
    }

    pub(crate) fn gradient_unchecked(&self, noise: &NoiseAssignment) -> GradientBundle {
        let mut scratch = GradientScratch::default();
        let leaf_value = self.gradient_into(noise, &mut scratch);
        GradientBundle { leaf_value, d_node: scratch.d_node, d_edge: scratch.d_edge }
    }

    /// Gradient sweep writing into `scratch`; returns the target value.
    pub(crate) fn gradient_into(&self, noise: &NoiseAssignment, scratch: &mut GradientScratch) -> f64 {
        self.gradient_calls.fetch_add(1, Ordering::Relaxed);
        let dag = &self.sub.dag;
        let n = dag.node_count();
        let GradientScratch { pre, x, d_node: adj, d_edge } = scratch;
        for buf in [&mut *pre, &mut *x, &mut *adj] {
            buf.clear();
            buf.resize(n, 0.0);
        }
        d_edge.clear();
        d_edge.resize(dag.edge_count(), 0.0);
        self.sweep(noise, pre, x);

        adj[self.sub.target.0] = 1.0;
        for &j in dag.topological_order().iter().rev() {
            let a = adj[j.0];
            let parents = dag.parents(j);
            if a == 0.0 || parents.is_empty() {
                continue;
            }
            let local = a * self.link.derivative(pre[j.0]);
            let off = dag.edge_offset(j);
            for (k, p) in parents.iter().enumerate() {
                adj[p.0] += local * (self.weights[off + k] + noise.edge[off + k]);
                d_edge[off + k] = local * x[p.0];
            }
        }
        x[self.sub.target.0]
    }
}

/// Buffers reused across gradient sweeps.
#[derive(Debug, Clone, Default)]
pub(crate) struct GradientScratch {
    pre: Vec<f64>,
    x: Vec<f64>,
    pub d_node: Vec<f64>,
    pub d_edge: Vec<f64>,
}

/// `g(ε, ξ)` for `target`; `noise` is keyed on the target's ancestor subgraph.
pub fn forward_g(model: &MechanismModel, target: NodeId, noise: &NoiseAssignment) -> Result<Forward> {
    LeafFunction::new(model, target)?.forward(noise)
}

pub fn gradient_g(model: &MechanismModel, target: NodeId, noise: &NoiseAssignment) -> Result<GradientBundle> {
    LeafFunction::new(model, target)?.gradient(noise)
}
