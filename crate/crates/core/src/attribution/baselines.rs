//! Node-noise Shapley games and the marginal (naive) baseline.
//!
//! Baselines attribute to node noises only; edges are scored afterwards by
//! the outer product of node scores, `s_edge(i, j) = s_i · s_j`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ig::ReferencePool;
use super::report::{AttributionReport, Method, ReportMetadata};
use super::shapley::{shapley_classic, shapley_permutation, shapley_sampling, ClassicConfig, CoalitionGame};
use crate::dag::{Dag, EdgeId};
use crate::error::{RcaError, Result};
use crate::mechanism::MechanismModel;
use crate::noise::{Link, LeafFunction, NoiseAssignment};
use crate::scoring::{outlier_score, LeafScore};

/// Edge score `s_src · s_dst` for every edge of `dag` (canonical order).
pub fn baseline_edge_scores(dag: &Dag, node_scores: &[f64]) -> Vec<f64> {
    dag.edges().map(|e| node_scores[e.src.0] * node_scores[e.dst.0]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Reference rows averaged inside the value function (classic and sampling).
    pub references: usize,
    pub classic: ClassicConfig,
    /// Sampled coalitions per player for the kernel engine (at least `d + 2` in total).
    pub subsets_per_player: usize,
    pub permutations: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            references: 5,
            classic: ClassicConfig { early_stop: Some(0.01), ..ClassicConfig::default() },
            subsets_per_player: 64,
            permutations: 100,
        }
    }
}

impl GameConfig {
    pub fn sampling_subsets(&self, players: usize) -> usize {
        (self.subsets_per_player * players).max(players + 2)
    }
}

/// `v(Q)`: score of the target when node noises in `Q` take their inferred
/// values and the rest take a reference row's values. Edge noise stays fixed.
pub struct NoiseGame<'a, S: LeafScore, L: Link> {
    leaf: &'a LeafFunction<L>,
    score: &'a S,
    inferred: &'a [f64],
    edge: Vec<f64>,
    refs: Vec<&'a [f64]>,
}

impl<'a, S: LeafScore, L: Link> NoiseGame<'a, S, L> {
    pub fn new(leaf: &'a LeafFunction<L>, score: &'a S, inferred: &'a [f64], refs: Vec<&'a [f64]>) -> Result<Self> {
        if inferred.len() != leaf.node_count() || refs.iter().any(|r| r.len() != leaf.node_count()) {
            return Err(RcaError::KeyMismatch("node noise length differs from subgraph size".into()));
        }
        if refs.is_empty() {
            return Err(RcaError::EmptyReferencePool);
        }
        Ok(NoiseGame { leaf, score, inferred, edge: vec![0.0; leaf.edge_count()], refs })
    }

    fn eval(&self, coalition: &[bool], reference: &[f64], mixed: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
        for (i, m) in mixed.iter_mut().enumerate() {
            *m = if coalition[i] { self.inferred[i] } else { reference[i] };
        }
        self.score.value(self.leaf.leaf_of_node_noise(mixed, &self.edge, scratch))
    }
}

impl<S: LeafScore, L: Link> CoalitionGame for NoiseGame<'_, S, L> {
    fn players(&self) -> usize {
        self.inferred.len()
    }

    fn value(&self, coalition: &[bool]) -> f64 {
        let mut mixed = vec![0.0; self.inferred.len()];
        let mut scratch = Vec::with_capacity(self.inferred.len());
        let sum: f64 = self.refs.iter().map(|r| self.eval(coalition, r, &mut mixed, &mut scratch)).sum();
        sum / self.refs.len() as f64
    }

    fn references(&self) -> usize {
        self.refs.len()
    }

    fn value_against(&self, coalition: &[bool], reference: usize) -> f64 {
        let mut mixed = vec![0.0; self.inferred.len()];
        let mut scratch = Vec::with_capacity(self.inferred.len());
        self.eval(coalition, self.refs[reference], &mut mixed, &mut scratch)
    }
}

fn report_from_node_scores<L: Link>(
    leaf: &LeafFunction<L>,
    method: Method,
    scores: &[f64],
    metadata: ReportMetadata,
) -> Result<AttributionReport> {
    let edges = baseline_edge_scores(leaf.dag(), scores);
    let node_scores = scores.iter().enumerate().map(|(i, s)| (leaf.original_node(i), *s)).collect();
    let edge_scores: Vec<(EdgeId, f64)> = leaf.original_edges().into_iter().zip(edges).collect();
    AttributionReport::new(leaf.original_node(leaf.target().0), method, node_scores, edge_scores, metadata)
}

/// Runs one Shapley engine over the node noises of the target's ancestors.
pub fn game_attribute<S: LeafScore, L: Link>(
    leaf: &LeafFunction<L>,
    score: &S,
    inferred: &NoiseAssignment,
    pool: &ReferencePool,
    method: Method,
    cfg: &GameConfig,
    seed: u64,
) -> Result<AttributionReport> {
    inferred.check(leaf.dag())?;
    if pool.is_empty() {
        return Err(RcaError::EmptyReferencePool);
    }
    let d = leaf.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<&[f64]> = match method {
        Method::Permutation => (0..pool.len()).map(|i| pool.get(i)).collect(),
        _ => pool.draw(cfg.references.max(1), &mut rng)?.into_iter().map(|i| pool.get(i)).collect(),
    };
    let game = NoiseGame::new(leaf, score, &inferred.node, refs)?;
    let engine_seed = seed ^ 0x5DEE_CE66_D1CE_4E5B;
    let (outcome, samples) = match method {
        Method::Shapley => (shapley_classic(&game, &cfg.classic, engine_seed)?, None),
        Method::Sampling => {
            let n = cfg.sampling_subsets(d);
            (shapley_sampling(&game, n, engine_seed)?, Some(n))
        }
        Method::Permutation => (shapley_permutation(&game, cfg.permutations, engine_seed)?, Some(cfg.permutations)),
        other => return Err(RcaError::InvalidConfig(format!("{other} is not a Shapley engine"))),
    };
    let references = (method != Method::Permutation).then_some(game.references());
    report_from_node_scores(
        leaf,
        method,
        &outcome.values,
        ReportMetadata { rows: 1, references, samples, value_evaluations: outcome.evaluations, ..Default::default() },
    )
}

/// Scores each ancestor by its own marginal outlier score; no interactions.
pub fn naive_attribute<L: Link>(model: &MechanismModel, leaf: &LeafFunction<L>, row: &[f64]) -> Result<AttributionReport> {
    model.dag.check_node(leaf.original_node(leaf.target().0))?;
    if row.len() != model.dag.node_count() {
        return Err(RcaError::ColumnMismatch { expected: model.dag.node_count(), got: row.len() });
    }
    let scores = (0..leaf.node_count())
        .map(|i| {
            let orig = leaf.original_node(i);
            Ok(outlier_score(model.marginal(orig)?, row[orig.0]))
        })
        .collect::<Result<Vec<f64>>>()?;
    report_from_node_scores(
        leaf,
        Method::Naive,
        &scores,
        ReportMetadata { rows: 1, value_evaluations: scores.len(), ..Default::default() },
    )
}
