//! Ranking quality (NDCG@k) against injected ground truth, and the runtime
//! scaling benchmark.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{attribute_batch, derive_seed, AttributionConfig, AttributionReport, Candidate, Method};
use crate::dag::{Dag, NodeId};
use crate::error::{RcaError, Result};
use crate::exec::{self, Execution};
use crate::mechanism::{fit_posterior, sample, Hyperparams, MechanismModel, NodeNoise, SampleMode};
use crate::scenarios::{Mix, ScenarioCase};

/// NDCG value plus a flag for the degenerate all-zero-relevance case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ndcg {
    pub value: f64,
    /// Set when every relevance is zero; `value` is then 1 by convention.
    pub all_zero: bool,
}

/// `Σ_{i=1..k} rel(r_i) / log₂(i + 1)`.
pub fn dcg_at_k<T, F: Fn(&T) -> f64>(ranking: &[T], relevance: F, k: usize) -> f64 {
    ranking.iter().take(k).enumerate().map(|(i, r)| relevance(r) / ((i + 2) as f64).log2()).sum()
}

/// DCG of the ideal ordering of `grades`, truncated at `k`.
pub fn ideal_dcg_at_k(grades: &[f64], k: usize) -> f64 {
    let mut g: Vec<f64> = grades.iter().copied().filter(|&r| r > 0.0).collect();
    g.sort_by(|a, b| b.total_cmp(a));
    dcg_at_k(&g, |&r| r, k)
}

/// NDCG@k of `ranking` against graded relevance `(id, grade)`; ids missing
/// from `relevance` have grade 0.
pub fn ndcg_at_k<T: PartialEq>(ranking: &[T], relevance: &[(T, f64)], k: usize) -> Ndcg {
    let grade = |t: &T| relevance.iter().find(|(id, _)| id == t).map_or(0.0, |p| p.1);
    let grades: Vec<f64> = relevance.iter().map(|p| p.1).collect();
    let ideal = ideal_dcg_at_k(&grades, k);
    if ideal <= 0.0 {
        return Ndcg { value: 1.0, all_zero: true };
    }
    Ndcg { value: dcg_at_k(ranking, grade, k) / ideal, all_zero: false }
}

/// Which candidates take part in a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Combined,
    NodesOnly,
    EdgesOnly,
}

impl View {
    /// Node-only suites rank nodes, edge-only suites rank edges, mixed suites rank both together.
    pub fn for_mix(mix: Mix) -> View {
        match mix {
            Mix::Nodes => View::NodesOnly,
            Mix::Edges => View::EdgesOnly,
            Mix::Both => View::Combined,
        }
    }

    pub fn admits(self, c: &Candidate) -> bool {
        match self {
            View::Combined => true,
            View::NodesOnly => c.is_node(),
            View::EdgesOnly => !c.is_node(),
        }
    }
}

/// NDCG@k of a report's ranking against a case's truth, restricted to `view`.
pub fn case_ndcg(report: &AttributionReport, case: &ScenarioCase, view: View, k: usize) -> Ndcg {
    let ranking: Vec<Candidate> = report.ranked_candidates().into_iter().filter(|c| view.admits(c)).collect();
    ranking_ndcg(&ranking, case, view, k)
}

pub fn ranking_ndcg(ranking: &[Candidate], case: &ScenarioCase, view: View, k: usize) -> Ndcg {
    let relevance: Vec<(Candidate, f64)> = case
        .truth
        .causes
        .iter()
        .filter(|c| view.admits(&c.candidate))
        .map(|c| (c.candidate, c.relevance))
        .collect();
    ndcg_at_k(ranking, &relevance, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetricResult {
    pub method: Method,
    pub view: View,
    pub k: usize,
    /// Mean over cases.
    pub ndcg: f64,
    /// Population standard deviation over cases.
    pub std: f64,
    pub per_case: Vec<f64>,
    /// Cases whose truth had no relevant candidate in `view`.
    pub all_zero_cases: usize,
}

impl RankingMetricResult {
    pub fn mean(&self) -> f64 {
        self.ndcg
    }

    fn from_values(method: Method, view: View, k: usize, values: Vec<Ndcg>) -> Self {
        let per_case: Vec<f64> = values.iter().map(|v| v.value).collect();
        let n = per_case.len().max(1) as f64;
        let mean = per_case.iter().sum::<f64>() / n;
        let var = per_case.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        RankingMetricResult {
            method,
            view,
            k,
            ndcg: mean,
            std: var.sqrt(),
            per_case,
            all_zero_cases: values.iter().filter(|v| v.all_zero).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub attribution: AttributionConfig,
    pub k_values: Vec<usize>,
    /// `None` picks [`View::for_mix`] per case.
    pub view: Option<View>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { attribution: AttributionConfig::default(), k_values: vec![1, 2, 3, 5, 10], view: None }
    }
}

pub const HEADLINE_K: usize = 5;

/// Fits a model on the case's normal batch with the case's precisions.
pub fn fit_case(case: &ScenarioCase) -> Result<MechanismModel> {
    fit_posterior(&case.dag, &case.normal, case.hyper, None)
}

/// Seed used for a case's attribution randomness; shared by all methods so
/// they see the same reference draws.
pub fn attribution_seed(case: &ScenarioCase) -> u64 {
    derive_seed(case.seed, 0xA77)
}

/// Attributes the abnormal batch of `case` with a model fitted on its normal batch.
pub fn attribute_case(
    case: &ScenarioCase,
    model: &MechanismModel,
    method: Method,
    cfg: &AttributionConfig,
    exec: Execution,
) -> Result<AttributionReport> {
    attribute_batch(model, &case.normal, &case.abnormal, case.target, method, cfg, attribution_seed(case), exec)
}

/// Scores every method on every case; one result per method and `k`, in
/// `methods × k_values` order. Each case is fitted once.
pub fn evaluate_methods(
    cases: &[ScenarioCase],
    methods: &[Method],
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<Vec<RankingMetricResult>> {
    if cfg.k_values.contains(&0) {
        return Err(RcaError::InvalidConfig("k must be at least 1".into()));
    }
    if cases.iter().any(|c| c.abnormal.is_empty()) {
        return Err(RcaError::EmptyDataset);
    }
    // per_case[case][method][k]
    let per_case: Vec<Vec<Vec<Ndcg>>> = exec::try_map(exec, cases, |case| {
        let model = fit_case(case)?;
        let view = cfg.view.unwrap_or(View::for_mix(case.mix));
        methods
            .iter()
            .map(|&m| {
                let report = attribute_case(case, &model, m, &cfg.attribution, Execution::Sequential)?;
                Ok(cfg.k_values.iter().map(|&k| case_ndcg(&report, case, view, k)).collect())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let view = match cfg.view {
        Some(v) => v,
        None => match cases.first() {
            Some(c) if cases.iter().all(|x| x.mix == c.mix) => View::for_mix(c.mix),
            _ => View::Combined,
        },
    };
    let mut out = Vec::with_capacity(methods.len() * cfg.k_values.len());
    for (mi, &m) in methods.iter().enumerate() {
        for (ki, &k) in cfg.k_values.iter().enumerate() {
            let values = per_case.iter().map(|c| c[mi][ki]).collect();
            out.push(RankingMetricResult::from_values(m, view, k, values));
        }
    }
    Ok(out)
}

pub fn evaluate_method(
    cases: &[ScenarioCase],
    method: Method,
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<Vec<RankingMetricResult>> {
    evaluate_methods(cases, &[method], cfg, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableRow<'a> {
    method: &'a str,
    mix: &'a str,
    k: usize,
    mean: f64,
    std: f64,
    n_cases: usize,
}

/// Writes `(method, mix, k, mean, std, n_cases)` rows, one group of results per mix.
pub fn write_results_csv<W: Write>(out: W, groups: &[(&str, &[RankingMetricResult])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (mix, results) in groups {
        for r in *results {
            w.serialize(TableRow {
                method: r.method.as_str(),
                mix,
                k: r.k,
                mean: r.ndcg,
                std: r.std,
                n_cases: r.per_case.len(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Timing of one method at one graph size. `seconds` is `None` when skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    /// Nodes of the ancestor subgraph, target included.
    pub nodes: usize,
    pub edges: usize,
    pub seconds: Option<f64>,
    pub evals: Option<usize>,
}

impl BenchRecord {
    pub fn skipped(&self) -> bool {
        self.seconds.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Per-measurement wall-time ceiling in seconds; larger projected runs are skipped.
    pub budget_seconds: f64,
    pub attribution: AttributionConfig,
    /// Normal rows used to fit each benchmark model.
    pub normal_rows: usize,
    /// Repeat each measurement until at least this much time has been spent.
    pub min_timing_seconds: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut attribution = AttributionConfig::default();
        attribution.game.classic.cap = 62;
        attribution.game.classic.early_stop = None;
        BenchConfig { budget_seconds: 60.0, attribution, normal_rows: 200, min_timing_seconds: 0.05, seed: 0 }
    }
}

/// A benchmark graph on `n` nodes whose last node has every other node as an
/// ancestor: a chain backbone plus sparse random shortcuts.
pub fn bench_graph(n: usize, seed: u64) -> Result<Dag> {
    if n < 2 {
        return Err(RcaError::InvalidConfig("benchmark graphs need at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents = (0..n)
        .map(|j| {
            if j == 0 {
                return Vec::new();
            }
            let p = 1.0 / j as f64;
            let mut ps: Vec<usize> = (0..j - 1).filter(|_| rng.random::<f64>() < p).collect();
            ps.push(j - 1);
            ps
        })
        .collect();
    Dag::from_parents(parents, None)
}

/// Expected cost growth used to decide whether the next size fits the budget.
fn projected_seconds(method: Method, last: &BenchRecord, nodes: usize, edges: usize) -> Option<f64> {
    let t = last.seconds?;
    let ratio = (nodes + edges) as f64 / (last.nodes + last.edges).max(1) as f64;
    Some(match method {
        Method::Shapley => t * 2f64.powi(nodes as i32 - last.nodes as i32) * ratio,
        Method::Sampling | Method::Permutation => t * ratio.powi(3),
        Method::Bigen | Method::Naive => t * ratio.powi(2),
    })
}

/// Times single-row attribution for every method at every size. Each
/// measurement runs on one thread; sizes must be ascending.
pub fn bench_runtime(sizes: &[usize], methods: &[Method], cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(RcaError::InvalidConfig("benchmark sizes must be ascending".into()));
    }
    if cfg.budget_seconds.is_nan() || cfg.budget_seconds <= 0.0 {
        return Err(RcaError::InvalidConfig("budget must be positive".into()));
    }
    let mut out = Vec::new();
    let mut last: Vec<Option<BenchRecord>> = vec![None; methods.len()];
    for (si, &n) in sizes.iter().enumerate() {
        let seed = derive_seed(cfg.seed, si as u64);
        let dag = bench_graph(n, seed)?;
        let target = NodeId(n - 1);
        let edges = dag.edge_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights: Vec<Vec<f64>> =
            dag.nodes().map(|j| (0..dag.parents(j).len()).map(|_| rng.random_range(0.2..0.8)).collect()).collect();
        let hyper = Hyperparams::new(100.0, 1.0)?;
        let generator =
            MechanismModel::generative(dag.clone(), weights, hyper, vec![NodeNoise::Gaussian { std: 1.0 }; n])?;
        let normal = sample(&generator, cfg.normal_rows.max(2), seed, SampleMode::ResampleEdgeNoise);
        let model = fit_posterior(&dag, &normal, hyper, None)?;
        let mut abnormal_rows = sample(&generator, 1, seed ^ 1, SampleMode::ResampleEdgeNoise);
        let shifted: Vec<f64> = abnormal_rows.row(0).iter().map(|v| v + 3.0).collect();
        abnormal_rows = crate::data::Dataset::from_rows(dag.names().to_vec(), &[shifted])?;

        for (mi, &m) in methods.iter().enumerate() {
            let projected = last[mi].as_ref().and_then(|l| projected_seconds(m, l, n, edges));
            if projected.is_some_and(|p| p > cfg.budget_seconds) || last[mi].as_ref().is_some_and(|l| l.skipped()) {
                let rec = BenchRecord { method: m, nodes: n, edges, seconds: None, evals: None };
                last[mi] = Some(rec.clone());
                out.push(rec);
                continue;
            }
            let mut reps = 0usize;
            let mut report = None;
            let start = Instant::now();
            while reps == 0 || start.elapsed().as_secs_f64() < cfg.min_timing_seconds {
                match attribute_batch(
                    &model,
                    &normal,
                    &abnormal_rows,
                    target,
                    m,
                    &cfg.attribution,
                    seed,
                    Execution::Sequential,
                ) {
                    Ok(r) => report = Some(r),
                    Err(RcaError::TooManyPlayers { .. }) => break,
                    Err(e) => return Err(e),
                }
                reps += 1;
            }
            let rec = match report {
                Some(r) => BenchRecord {
                    method: m,
                    nodes: n,
                    edges,
                    seconds: Some((start.elapsed().as_secs_f64() / reps as f64).max(f64::MIN_POSITIVE)),
                    evals: Some(r.metadata.gradient_evaluations + r.metadata.value_evaluations),
                },
                None => BenchRecord { method: m, nodes: n, edges, seconds: None, evals: None },
            };
            last[mi] = Some(rec.clone());
            out.push(rec);
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Log-log slope of wall time against `d + e` for one method, over measured sizes.
pub fn time_slope(records: &[BenchRecord], method: Method) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.seconds.map(|s| ((r.nodes + r.edges) as f64, s)))
        .collect();
    loglog_slope(&pts)
}

/// Log-log slope of evaluation count against `d` for one method.
pub fn eval_slope(records: &[BenchRecord], method: Method) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.evals.map(|e| (r.nodes as f64, e as f64)))
        .collect();
    loglog_slope(&pts)
}

#[derive(Serialize)]
struct BenchRow<'a> {
    method: &'a str,
    nodes: usize,
    edges: usize,
    seconds: Option<f64>,
    evals: Option<usize>,
}

/// Writes `(method, nodes, edges, seconds, evals)` rows; skipped cells are empty.
pub fn write_bench_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(BenchRow {
            method: r.method.as_str(),
            nodes: r.nodes,
            edges: r.edges,
            seconds: r.seconds,
            evals: r.evals,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_case() {
        let v = ndcg_at_k(&["b", "a"], &[("a", 1.0)], 2);
        assert!((v.value - 0.630_929_753_571_457_4).abs() < 1e-15);
        assert!(!v.all_zero);
    }

    #[test]
    fn all_zero_is_flagged() {
        let v = ndcg_at_k(&[1, 2, 3], &[(1, 0.0)], 3);
        assert_eq!(v, Ndcg { value: 1.0, all_zero: true });
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..10).map(|i| (i as f64, 3.0 * (i as f64).powf(1.7))).collect();
        assert!((loglog_slope(&pts).unwrap() - 1.7).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
    }

    #[test]
    fn bench_graph_reaches_every_node() {
        for n in [2, 5, 40] {
            let dag = bench_graph(n, 3).unwrap();
            assert_eq!(dag.ancestors(NodeId(n - 1)).unwrap().len(), n - 1);
        }
    }
}
