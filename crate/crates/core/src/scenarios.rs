//! Benchmark cases with injected, known root causes.
//!
//! Three generators: random sparse DAGs, an online-shop microservice latency
//! graph and a small supply chain. Every case carries the generating model,
//! normal and abnormal batches, the target and a graded ground truth. The
//! fixed topologies are data files, see [`Topology`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attribution::report::{Candidate, EntryId, EntryKind};
use crate::dag::{Dag, EdgeId, NodeId};
use crate::data::Dataset;
use crate::error::{RcaError, Result};
use crate::exec::{self, Execution};
use crate::mechanism::{sample_with, Hyperparams, MechanismModel, ModelFile, NodeNoise, SampleMode};
use crate::noise::NoiseAssignment;

/// Which noise kinds receive injected anomalies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mix {
    Nodes,
    Edges,
    Both,
}

impl Mix {
    pub const ALL: [Mix; 3] = [Mix::Nodes, Mix::Edges, Mix::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Mix::Nodes => "nodes",
            Mix::Edges => "edges",
            Mix::Both => "both",
        }
    }

    pub fn has_nodes(self) -> bool {
        self != Mix::Edges
    }

    pub fn has_edges(self) -> bool {
        self != Mix::Nodes
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mix {
    type Err = RcaError;

    fn from_str(s: &str) -> Result<Self> {
        Mix::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| RcaError::Parse(format!("unknown mix {s:?} (nodes, edges, both)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "microservice")]
    Microservice,
    #[serde(rename = "supplychain")]
    SupplyChain,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::Random => "random",
            ScenarioKind::Microservice => "microservice",
            ScenarioKind::SupplyChain => "supplychain",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One injected root cause.
#[derive(Debug, Clone, PartialEq)]
pub struct Cause {
    pub candidate: Candidate,
    /// Graded relevance; the strongest injection gets the highest grade.
    pub relevance: f64,
    /// Injection strength used for grading, in the scenario's own units.
    pub strength: f64,
    /// Injected noise value in each abnormal row.
    pub injected: Vec<f64>,
}

/// Injected causes and their relevance grades. Every other candidate has relevance 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub causes: Vec<Cause>,
}

impl GroundTruth {
    /// Grades `c` causes `c, c-1, ..., 1` by descending strength.
    fn graded(mut raw: Vec<(Candidate, f64, Vec<f64>)>) -> Self {
        raw.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let c = raw.len();
        let causes = raw
            .into_iter()
            .enumerate()
            .map(|(i, (candidate, strength, injected))| Cause {
                candidate,
                relevance: (c - i) as f64,
                strength,
                injected,
            })
            .collect();
        GroundTruth { causes }
    }

    pub fn root_cause_nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self
            .causes
            .iter()
            .filter_map(|c| match c.candidate {
                Candidate::Node(n) => Some(n),
                Candidate::Edge(_) => None,
            })
            .collect();
        v.sort();
        v
    }

    pub fn root_cause_edges(&self) -> Vec<EdgeId> {
        let mut v: Vec<EdgeId> = self
            .causes
            .iter()
            .filter_map(|c| match c.candidate {
                Candidate::Edge(e) => Some(e),
                Candidate::Node(_) => None,
            })
            .collect();
        v.sort();
        v
    }

    pub fn relevance(&self, candidate: Candidate) -> f64 {
        self.causes.iter().find(|c| c.candidate == candidate).map_or(0.0, |c| c.relevance)
    }

    pub fn len(&self) -> usize {
        self.causes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.causes.is_empty()
    }
}

/// A generated benchmark case.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCase {
    pub kind: ScenarioKind,
    pub mix: Mix,
    pub seed: u64,
    pub dag: Dag,
    /// Generating weight means and noise laws.
    pub generator: MechanismModel,
    /// Precisions to use when fitting a model to `normal`.
    pub hyper: Hyperparams,
    pub normal: Dataset,
    pub abnormal: Dataset,
    pub target: NodeId,
    pub truth: GroundTruth,
}

/// Rows per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSizes {
    pub normal_rows: usize,
    pub abnormal_rows: usize,
}

impl Default for BatchSizes {
    fn default() -> Self {
        BatchSizes { normal_rows: 2000, abnormal_rows: 10 }
    }
}

/// How an injected noise value is drawn in each abnormal row.
#[derive(Debug, Clone, Copy)]
enum Draw {
    Normal { mean: f64, std: f64 },
    /// `sign · (lo + (hi - lo) u)` with `u` uniform on `(0, 1]`.
    Band { lo: f64, hi: f64, sign: f64 },
}

impl Draw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Draw::Normal { mean, std } => Normal::new(mean, std).expect("finite positive std").sample(rng),
            Draw::Band { lo, hi, sign } => {
                let u = 1.0 - rng.random::<f64>();
                sign * (lo + (hi - lo) * u)
            }
        }
    }
}

struct Injection {
    candidate: Candidate,
    draw: Draw,
    /// Maps the injected values to a grading strength.
    strength: Box<dyn Fn(&[f64]) -> f64>,
}

fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64
}

/// Samples normal rows, then abnormal rows with the injections overwriting
/// the drawn noise of their coordinates.
fn realize(
    kind: ScenarioKind,
    mix: Mix,
    seed: u64,
    generator: MechanismModel,
    hyper: Hyperparams,
    target: NodeId,
    injections: Vec<Injection>,
    sizes: BatchSizes,
    rng: &mut ChaCha8Rng,
) -> Result<ScenarioCase> {
    if sizes.normal_rows == 0 || sizes.abnormal_rows == 0 {
        return Err(RcaError::InvalidConfig("batches need at least one row".into()));
    }
    let dag = generator.dag.clone();
    let normal = sample_with(&generator, sizes.normal_rows, SampleMode::ResampleEdgeNoise, rng, |_, _, _| {});
    let slots: Vec<(bool, usize)> = injections
        .iter()
        .map(|inj| match inj.candidate {
            Candidate::Node(n) => (true, n.0),
            Candidate::Edge(e) => (false, dag.edge_index(e).expect("injected edge exists")),
        })
        .collect();
    let mut injected = vec![Vec::with_capacity(sizes.abnormal_rows); injections.len()];
    let abnormal = sample_with(
        &generator,
        sizes.abnormal_rows,
        SampleMode::ResampleEdgeNoise,
        rng,
        |_, noise: &mut NoiseAssignment, rng| {
            for (i, inj) in injections.iter().enumerate() {
                let v = inj.draw.sample(rng);
                let (is_node, slot) = slots[i];
                if is_node {
                    noise.node[slot] = v;
                } else {
                    noise.edge[slot] = v;
                }
                injected[i].push(v);
            }
        },
    );
    let raw = injections
        .iter()
        .zip(injected)
        .map(|(inj, values)| (inj.candidate, (inj.strength)(&values), values))
        .collect();
    Ok(ScenarioCase {
        kind,
        mix,
        seed,
        dag,
        generator,
        hyper,
        normal,
        abnormal,
        target,
        truth: GroundTruth::graded(raw),
    })
}

/// Candidate pools for a target: strict ancestors and edges of its ancestor subgraph.
fn cause_pools(dag: &Dag, target: NodeId) -> Result<(Vec<NodeId>, Vec<EdgeId>)> {
    let sub = dag.ancestor_subgraph(target)?;
    let nodes: Vec<NodeId> = sub.mapping.iter().copied().filter(|&n| n != target).collect();
    let edges: Vec<EdgeId> = sub.dag.edges().map(|e| sub.original_edge(e)).collect();
    Ok((nodes, edges))
}

fn signed_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let a = rng.random_range(3.0..5.0);
    if rng.random::<bool>() {
        a
    } else {
        -a
    }
}

fn choose<T: Copy, R: Rng + ?Sized>(pool: &[T], k: usize, rng: &mut R) -> Vec<T> {
    let mut idx = index::sample(rng, pool.len(), k.min(pool.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// A random sparse DAG with Gaussian node noise (variance 1) and edge noise
/// (variance 0.01), weight means `|N(0, 1)|`, and `k` node and/or `l` edge
/// anomalies with `k, l ∈ [1, m]`, `m = max(1, ⌊0.1 · subgraph size⌋)`.
pub fn gen_random_graph_case(
    num_nodes: usize,
    normal_rows: usize,
    abnormal_rows: usize,
    mix: Mix,
    seed: u64,
) -> Result<ScenarioCase> {
    if num_nodes < 3 {
        return Err(RcaError::InvalidConfig(format!("random graphs need at least 3 nodes, got {num_nodes}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<Vec<usize>> = (0..num_nodes)
        .map(|j| {
            let p = (2.0 / j as f64).min(1.0);
            (0..j).filter(|_| rng.random::<f64>() < p).collect()
        })
        .collect();
    let names = (0..num_nodes).map(|i| format!("X{i}")).collect();
    let dag = Dag::from_parents(parents, Some(names))?;
    let weights: Vec<Vec<f64>> = dag
        .nodes()
        .map(|j| {
            (0..dag.parents(j).len())
                .map(|_| {
                    let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    z.abs()
                })
                .collect()
        })
        .collect();
    let hyper = Hyperparams::new(100.0, 1.0)?;
    let generator = MechanismModel::generative(
        dag.clone(),
        weights.clone(),
        hyper,
        vec![NodeNoise::Gaussian { std: 1.0 }; num_nodes],
    )?;

    let non_roots: Vec<NodeId> = dag.nodes().filter(|&n| !dag.is_root(n)).collect();
    let target = non_roots[rng.random_range(0..non_roots.len())];
    let (node_pool, edge_pool) = cause_pools(&dag, target)?;
    let m = ((0.1 * (node_pool.len() + 1) as f64).floor() as usize).max(1);
    let k = if mix.has_nodes() { rng.random_range(1..=m.min(node_pool.len())) } else { 0 };
    let l = if mix.has_edges() { rng.random_range(1..=m.min(edge_pool.len())) } else { 0 };
    let edge_std = hyper.edge_std();

    let mut injections = Vec::with_capacity(k + l);
    for n in choose(&node_pool, k, &mut rng) {
        let a = signed_uniform(&mut rng);
        let b = rng.random_range(3.0..5.0);
        injections.push(Injection {
            candidate: Candidate::Node(n),
            draw: Draw::Normal { mean: a, std: b },
            strength: Box::new(move |_| a.abs()),
        });
    }
    for e in choose(&edge_pool, l, &mut rng) {
        let a = signed_uniform(&mut rng);
        let b = rng.random_range(3.0..5.0);
        let m_j = weights[e.dst.0].iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
        injections.push(Injection {
            candidate: Candidate::Edge(e),
            draw: Draw::Normal { mean: a * m_j, std: b * edge_std },
            strength: Box::new(move |_| a.abs()),
        });
    }
    let sizes = BatchSizes { normal_rows, abnormal_rows };
    realize(ScenarioKind::Random, mix, seed, generator, hyper, target, injections, sizes, &mut rng)
}

/// A fixed causal topology with a designated target, by node name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub target: String,
    pub nodes: Vec<String>,
    pub edges: Vec<[String; 2]>,
}

impl Topology {
    /// The online-shop service graph with the Website as leaf.
    pub fn microservice() -> Self {
        Self::from_json(include_str!("../data/microservice.json")).expect("bundled topology parses")
    }

    /// Demand and Constraint feed Submitted, then Confirmed, Shipped, Received.
    pub fn supply_chain() -> Self {
        Self::from_json(include_str!("../data/supply_chain.json")).expect("bundled topology parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<(Dag, NodeId)> {
        let index = |name: &str| {
            self.nodes.iter().position(|n| n == name).ok_or_else(|| RcaError::UnknownNode(name.to_string()))
        };
        let edges = self.edges.iter().map(|[s, d]| Ok((index(s)?, index(d)?))).collect::<Result<Vec<_>>>()?;
        let dag = Dag::from_edges(self.nodes.len(), &edges, Some(self.nodes.clone()))?;
        let target = NodeId(index(&self.target)?);
        if dag.is_root(target) {
            return Err(RcaError::InvalidConfig(format!("target {} has no ancestors", self.target)));
        }
        Ok((dag, target))
    }
}

fn uniform_weights(dag: &Dag, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    dag.nodes().map(|j| (0..dag.parents(j).len()).map(|_| rng.random_range(0.5..1.5)).collect()).collect()
}

/// Online-shop latency graph: weights `U(0.5, 1.5)`, node noise `N(0, 1)`,
/// edge noise variance 0.1. Injected node noise has magnitude in the
/// `(3σ, 5σ]` band with a random sign; injected edge noise is positive in the
/// same band of the edge-noise law. `k, l ∈ [1, 3]`.
pub fn gen_microservice_case(seed: u64, mix: Mix) -> Result<ScenarioCase> {
    gen_microservice_case_with(&Topology::microservice(), BatchSizes::default(), seed, mix)
}

pub fn gen_microservice_case_with(topology: &Topology, sizes: BatchSizes, seed: u64, mix: Mix) -> Result<ScenarioCase> {
    let (dag, target) = topology.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = Hyperparams::new(10.0, 1.0)?;
    let node_std = 1.0;
    let edge_std = hyper.edge_std();
    let weights = uniform_weights(&dag, &mut rng);
    let noise = vec![NodeNoise::Gaussian { std: node_std }; dag.node_count()];
    let generator = MechanismModel::generative(dag.clone(), weights, hyper, noise)?;
    let (node_pool, edge_pool) = cause_pools(&dag, target)?;
    let k = if mix.has_nodes() { rng.random_range(1..=3usize.min(node_pool.len())) } else { 0 };
    let l = if mix.has_edges() { rng.random_range(1..=3usize.min(edge_pool.len())) } else { 0 };
    let mut injections = Vec::with_capacity(k + l);
    for n in choose(&node_pool, k, &mut rng) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        injections.push(Injection {
            candidate: Candidate::Node(n),
            draw: Draw::Band { lo: 3.0 * node_std, hi: 5.0 * node_std, sign },
            strength: Box::new(move |v| mean_abs(v) / node_std),
        });
    }
    for e in choose(&edge_pool, l, &mut rng) {
        injections.push(Injection {
            candidate: Candidate::Edge(e),
            draw: Draw::Band { lo: 3.0 * edge_std, hi: 5.0 * edge_std, sign: 1.0 },
            strength: Box::new(move |v| mean_abs(v) / edge_std),
        });
    }
    realize(ScenarioKind::Microservice, mix, seed, generator, hyper, target, injections, sizes, &mut rng)
}

/// Supply chain with Gamma(2, 0.5) node noise, edge noise variance 0.01 and
/// weights `U(0.5, 1.5)`. Either `k ∈ {1, 2}` node causes, `l ∈ {1, 2}` edge
/// causes, or one of each; injected values are `U(3, 5)`.
pub fn gen_supply_chain_case(seed: u64, mix: Mix) -> Result<ScenarioCase> {
    gen_supply_chain_case_with(&Topology::supply_chain(), BatchSizes::default(), seed, mix)
}

pub fn gen_supply_chain_case_with(topology: &Topology, sizes: BatchSizes, seed: u64, mix: Mix) -> Result<ScenarioCase> {
    let (dag, target) = topology.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = NodeNoise::Gamma { shape: 2.0, scale: 0.5 };
    // Fitting uses the Gamma variance 2 · 0.5² = 0.5 as node-noise variance.
    let hyper = Hyperparams::new(100.0, 1.0 / (gamma.std() * gamma.std()))?;
    let weights = uniform_weights(&dag, &mut rng);
    let generator = MechanismModel::generative(dag.clone(), weights, hyper, vec![gamma; dag.node_count()])?;
    let (node_pool, edge_pool) = cause_pools(&dag, target)?;
    let (k, l) = match mix {
        Mix::Nodes => (rng.random_range(1..=2usize), 0),
        Mix::Edges => (0, rng.random_range(1..=2usize)),
        Mix::Both => (1, 1),
    };
    let band = Draw::Band { lo: 3.0, hi: 5.0, sign: 1.0 };
    let mut injections = Vec::with_capacity(k + l);
    for n in choose(&node_pool, k, &mut rng) {
        injections.push(Injection { candidate: Candidate::Node(n), draw: band, strength: Box::new(mean_abs) });
    }
    for e in choose(&edge_pool, l, &mut rng) {
        injections.push(Injection { candidate: Candidate::Edge(e), draw: band, strength: Box::new(mean_abs) });
    }
    realize(ScenarioKind::SupplyChain, mix, seed, generator, hyper, target, injections, sizes, &mut rng)
}

/// A batch of cases of one scenario and mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub kind: ScenarioKind,
    pub mix: Mix,
    pub cases: usize,
    /// Node counts for random graphs are drawn uniformly from this inclusive range.
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub sizes: BatchSizes,
    pub seed: u64,
}

impl SuiteSpec {
    pub fn new(kind: ScenarioKind, mix: Mix, cases: usize, seed: u64) -> Self {
        SuiteSpec { kind, mix, cases, min_nodes: 10, max_nodes: 50, sizes: BatchSizes::default(), seed }
    }

    /// Seed of case `i`; independent of the other cases.
    pub fn case_seed(&self, i: usize) -> u64 {
        crate::attribution::derive_seed(self.seed ^ (self.mix as u64) << 56, i as u64)
    }
}

/// Generates the cases of a suite, in case order.
pub fn generate_suite(spec: &SuiteSpec, exec: Execution) -> Result<Vec<ScenarioCase>> {
    if spec.min_nodes > spec.max_nodes {
        return Err(RcaError::InvalidConfig("min_nodes exceeds max_nodes".into()));
    }
    let microservice = Topology::microservice();
    let supply = Topology::supply_chain();
    exec::try_map_range(exec, spec.cases, |i| {
        let seed = spec.case_seed(i);
        match spec.kind {
            ScenarioKind::Random => {
                let n = spec.min_nodes + (seed % (spec.max_nodes - spec.min_nodes + 1) as u64) as usize;
                gen_random_graph_case(n, spec.sizes.normal_rows, spec.sizes.abnormal_rows, spec.mix, seed)
            }
            ScenarioKind::Microservice => gen_microservice_case_with(&microservice, spec.sizes, seed, spec.mix),
            ScenarioKind::SupplyChain => gen_supply_chain_case_with(&supply, spec.sizes, seed, spec.mix),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CauseRecord {
    kind: EntryKind,
    id: EntryId,
    relevance: f64,
    strength: f64,
    injected: Vec<f64>,
}

/// `truth.json`: everything about a case besides the graph, data and generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthFile {
    scenario: ScenarioKind,
    mix: Mix,
    seed: u64,
    target: usize,
    target_name: String,
    hyper: Hyperparams,
    root_causes: Vec<CauseRecord>,
}

pub const GRAPH_FILE: &str = "graph.json";
pub const NORMAL_FILE: &str = "normal.csv";
pub const ABNORMAL_FILE: &str = "abnormal.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const GENERATOR_FILE: &str = "generator.json";

impl ScenarioCase {
    fn truth_file(&self) -> TruthFile {
        TruthFile {
            scenario: self.kind,
            mix: self.mix,
            seed: self.seed,
            target: self.target.0,
            target_name: self.dag.name(self.target).to_string(),
            hyper: self.hyper,
            root_causes: self
                .truth
                .causes
                .iter()
                .map(|c| {
                    let (kind, id) = match c.candidate {
                        Candidate::Node(n) => (EntryKind::Node, EntryId::Node(n.0)),
                        Candidate::Edge(e) => (EntryKind::Edge, EntryId::Edge([e.src.0, e.dst.0])),
                    };
                    CauseRecord { kind, id, relevance: c.relevance, strength: c.strength, injected: c.injected.clone() }
                })
                .collect(),
        }
    }

    /// Writes the case's five files into the existing directory `dir`, all or nothing.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        if !dir.is_dir() {
            return Err(RcaError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("output directory {} does not exist", dir.display()),
            )));
        }
        let graph = self.dag.to_json()?;
        let normal = self.normal.to_csv_string()?;
        let abnormal = self.abnormal.to_csv_string()?;
        let truth = serde_json::to_string_pretty(&self.truth_file())?;
        let generator = self.generator.to_json()?;
        crate::files::write_all_atomic(
            dir,
            &[
                (GRAPH_FILE, graph.as_bytes()),
                (NORMAL_FILE, normal.as_bytes()),
                (ABNORMAL_FILE, abnormal.as_bytes()),
                (TRUTH_FILE, truth.as_bytes()),
                (GENERATOR_FILE, generator.as_bytes()),
            ],
        )
    }

    pub fn read_from(dir: &Path) -> Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        let dag = Dag::from_json(&read(GRAPH_FILE)?)?;
        let normal = Dataset::read_csv(read(NORMAL_FILE)?.as_bytes())?;
        let abnormal = Dataset::read_csv(read(ABNORMAL_FILE)?.as_bytes())?;
        normal.check_against(&dag)?;
        abnormal.check_against(&dag)?;
        let truth: TruthFile = serde_json::from_str(&read(TRUTH_FILE)?)?;
        let generator_file: ModelFile = serde_json::from_str(&read(GENERATOR_FILE)?)?;
        let generator = MechanismModel::from_file(&generator_file)?;
        if generator.dag != dag {
            return Err(RcaError::Parse("generator graph differs from graph file".into()));
        }
        let target = NodeId(truth.target);
        dag.check_node(target)?;
        let causes = truth
            .root_causes
            .into_iter()
            .map(|r| {
                let candidate = crate::attribution::report::RankEntry { kind: r.kind, id: r.id, score: 0.0 }.candidate()?;
                match candidate {
                    Candidate::Node(n) => dag.check_node(n)?,
                    Candidate::Edge(e) => {
                        dag.edge_index(e).ok_or_else(|| RcaError::UnknownNode(format!("edge {e}")))?;
                    }
                }
                Ok(Cause { candidate, relevance: r.relevance, strength: r.strength, injected: r.injected })
            })
            .collect::<Result<Vec<_>>>()?;
        if causes.is_empty() {
            return Err(RcaError::Parse("truth file lists no root causes".into()));
        }
        Ok(ScenarioCase {
            kind: truth.scenario,
            mix: truth.mix,
            seed: truth.seed,
            dag,
            generator,
            hyper: truth.hyper,
            normal,
            abnormal,
            target,
            truth: GroundTruth { causes },
        })
    }
}
