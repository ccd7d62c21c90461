//! The `rca` command line: generate cases, fit models, attribute anomalies,
//! evaluate rankings and benchmark runtime.
//!
//! Every command is a function of its flags and input files. Stochastic
//! commands take a mandatory `--seed`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rca_core::attribution::{attribute_batch, AttributionConfig, AttributionReport, Method};
use rca_core::evaluation::{
    bench_runtime, eval_slope, evaluate_methods, time_slope, write_bench_csv, write_results_csv, BenchConfig,
    EvalConfig, RankingMetricResult, HEADLINE_K,
};
use rca_core::files::write_atomic;
use rca_core::mechanism::{fit_posterior, Hyperparams, MechanismModel, PriorCarry};
use rca_core::scenarios::{
    gen_microservice_case_with, gen_random_graph_case, gen_supply_chain_case_with, BatchSizes, Mix, ScenarioCase,
    Topology,
};
use rca_core::{Dag, Dataset, ErrorClass, Execution, RcaError};

#[derive(Debug, Parser)]
#[command(name = "rca", version, about = "Root-cause attribution over noisy linear causal mechanisms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark case (or a directory of cases) with injected root causes.
    Generate(GenerateArgs),
    /// Fit the Bayesian weight posterior of every node on normal data.
    Fit(FitArgs),
    /// Attribute the target's anomaly in an abnormal batch.
    Attribute(AttributeArgs),
    /// Score methods by NDCG@k over a directory of cases.
    Evaluate(EvaluateArgs),
    /// Measure attribution runtime against graph size.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Random,
    Microservice,
    Supplychain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixArg {
    Nodes,
    Edges,
    Both,
}

impl From<MixArg> for Mix {
    fn from(m: MixArg) -> Mix {
        match m {
            MixArg::Nodes => Mix::Nodes,
            MixArg::Edges => Mix::Edges,
            MixArg::Both => Mix::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bigen,
    Shapley,
    Sampling,
    Permutation,
    Naive,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Bigen => Method::Bigen,
            MethodArg::Shapley => Method::Shapley,
            MethodArg::Sampling => Method::Sampling,
            MethodArg::Permutation => Method::Permutation,
            MethodArg::Naive => Method::Naive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CarryArg {
    Fresh,
    Full,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub scenario: ScenarioArg,
    #[arg(long)]
    pub seed: u64,
    /// Output directory; must already exist.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub mix: MixArg,
    /// Nodes of a random graph.
    #[arg(long, default_value_t = 20)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2000)]
    pub normal_rows: usize,
    #[arg(long, default_value_t = 10)]
    pub abnormal_rows: usize,
    /// Generate this many cases into `case-NNN` subdirectories.
    #[arg(long)]
    pub cases: Option<usize>,
    /// Replace the bundled topology of the microservice or supply-chain scenario.
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Edge-noise precision.
    #[arg(long, default_value_t = 100.0)]
    pub alpha: f64,
    /// Node-noise precision.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttributionFlags {
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Reference rows per attribution.
    #[arg(long, default_value_t = 5)]
    pub references: usize,
    /// Allow the exact Shapley engine to stream with this tolerance beyond its player cap.
    #[arg(long)]
    pub early_stop: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub cap: usize,
    #[arg(long, default_value_t = 64)]
    pub subsets_per_player: usize,
    #[arg(long, default_value_t = 100)]
    pub permutations: usize,
    #[arg(long, value_enum, default_value = "fresh")]
    pub prior_carry: CarryArg,
}

impl AttributionFlags {
    fn config(&self) -> AttributionConfig {
        let mut cfg = AttributionConfig::default();
        cfg.ig.steps = self.steps;
        cfg.ig.references = self.references;
        cfg.game.references = self.references;
        cfg.game.classic.early_stop = self.early_stop;
        cfg.game.classic.cap = self.cap;
        cfg.game.subsets_per_player = self.subsets_per_player;
        cfg.game.permutations = self.permutations;
        cfg.prior_carry = match self.prior_carry {
            CarryArg::Fresh => PriorCarry::Fresh,
            CarryArg::Full => PriorCarry::Full,
        };
        cfg
    }
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub abnormal: PathBuf,
    /// Normal data used as the reference pool; required by every method but naive.
    #[arg(long)]
    pub normal: Option<PathBuf>,
    /// Target node, by name or index.
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub attribution: AttributionFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A case directory, or a directory of case directories.
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bigen,shapley,sampling,permutation,naive")]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,10")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Tolerance for streamed Shapley values above the player cap.
    #[arg(long, default_value_t = 0.01)]
    pub early_stop: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100,200")]
    pub sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bigen,naive,shapley,sampling,permutation")]
    pub methods: Vec<MethodArg>,
    /// Per-measurement ceiling in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub budget: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<RcaError> for CliError {
    fn from(e: RcaError) -> Self {
        let code = match e.class() {
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::Attribution => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        RcaError::Io(e).into()
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    Ok(Dataset::read_csv(std::io::BufReader::new(file))?)
}

/// Runs one command, writing human-readable output to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(&a, out),
        Command::Fit(a) => fit(&a, out),
        Command::Attribute(a) => attribute(&a, out),
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Bench(a) => bench(&a, out),
    }
}

fn generate_one(a: &GenerateArgs, topology: Option<&Topology>, seed: u64) -> Result<ScenarioCase, CliError> {
    let sizes = BatchSizes { normal_rows: a.normal_rows, abnormal_rows: a.abnormal_rows };
    let mix = a.mix.into();
    Ok(match a.scenario {
        ScenarioArg::Random => gen_random_graph_case(a.nodes, a.normal_rows, a.abnormal_rows, mix, seed)?,
        ScenarioArg::Microservice => {
            let t = topology.cloned().unwrap_or_else(Topology::microservice);
            gen_microservice_case_with(&t, sizes, seed, mix)?
        }
        ScenarioArg::Supplychain => {
            let t = topology.cloned().unwrap_or_else(Topology::supply_chain);
            gen_supply_chain_case_with(&t, sizes, seed, mix)?
        }
    })
}

fn case_summary(case: &ScenarioCase) -> String {
    let causes: Vec<String> = case
        .truth
        .causes
        .iter()
        .map(|c| {
            let label = match c.candidate {
                rca_core::Candidate::Node(n) => case.dag.name(n).to_string(),
                rca_core::Candidate::Edge(e) => format!("{}->{}", case.dag.name(e.src), case.dag.name(e.dst)),
            };
            format!("{label} (relevance {})", c.relevance)
        })
        .collect();
    format!(
        "{} case, seed {}, mix {}: {} nodes, {} edges, target {}, {} normal / {} abnormal rows; root causes: {}",
        case.kind,
        case.seed,
        case.mix,
        case.dag.node_count(),
        case.dag.edge_count(),
        case.dag.name(case.target),
        case.normal.rows(),
        case.abnormal.rows(),
        causes.join(", ")
    )
}

fn generate<W: Write>(a: &GenerateArgs, out: &mut W) -> Result<(), CliError> {
    if !a.out.is_dir() {
        return Err(input_error(format!("output directory {} does not exist", a.out.display())));
    }
    let topology = a.topology.as_deref().map(Topology::from_path).transpose()?;
    if topology.is_some() && a.scenario == ScenarioArg::Random {
        return Err(input_error("--topology applies to the microservice and supplychain scenarios"));
    }
    match a.cases {
        None => {
            let case = generate_one(a, topology.as_ref(), a.seed)?;
            case.write_to(&a.out)?;
            writeln!(out, "{}", case_summary(&case))?;
        }
        Some(n) => {
            // Generate everything first so a failure leaves no case directories behind.
            let cases = (0..n)
                .map(|i| generate_one(a, topology.as_ref(), rca_core::attribution::derive_seed(a.seed, i as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            for (i, case) in cases.iter().enumerate() {
                let dir = a.out.join(format!("case-{i:03}"));
                std::fs::create_dir_all(&dir)?;
                case.write_to(&dir)?;
                writeln!(out, "case-{i:03}: {}", case_summary(case))?;
            }
        }
    }
    Ok(())
}

fn fit<W: Write>(a: &FitArgs, out: &mut W) -> Result<(), CliError> {
    let dag = Dag::from_json(&read_text(&a.graph)?)?;
    let data = read_dataset(&a.data)?;
    let hyper = Hyperparams::new(a.alpha, a.beta)?;
    let model = fit_posterior(&dag, &data, hyper, None)?;
    write_atomic(&a.out, model.to_json()?.as_bytes())?;
    let ridged = model.per_node.iter().filter(|m| m.ridge_applied).count();
    writeln!(
        out,
        "fitted {} nodes, {} edges on {} rows (alpha {}, beta {}); {} nodes needed a ridge",
        dag.node_count(),
        dag.edge_count(),
        data.rows(),
        a.alpha,
        a.beta,
        ridged
    )?;
    Ok(())
}

fn print_ranking<W: Write>(out: &mut W, dag: &Dag, report: &AttributionReport, top: usize) -> std::io::Result<()> {
    for (i, (c, score)) in report.ranking().iter().take(top).enumerate() {
        let label = match c {
            rca_core::Candidate::Node(n) => format!("node {}", dag.name(*n)),
            rca_core::Candidate::Edge(e) => format!("edge {} -> {}", dag.name(e.src), dag.name(e.dst)),
        };
        writeln!(out, "{:>3}. {label:<40} {score:.6}", i + 1)?;
    }
    Ok(())
}

fn attribute<W: Write>(a: &AttributeArgs, out: &mut W) -> Result<(), CliError> {
    let model = MechanismModel::from_json(&read_text(&a.model)?)?;
    let abnormal = read_dataset(&a.abnormal)?;
    let method: Method = a.method.into();
    let normal = match (&a.normal, method) {
        (Some(p), _) => read_dataset(p)?,
        (None, Method::Naive) => Dataset::empty(model.dag.names().to_vec()),
        (None, m) => return Err(input_error(format!("--normal is required for method {m}"))),
    };
    let target = model.dag.resolve(&a.target)?;
    let cfg = a.attribution.config();
    cfg.ig.validate()?;
    let report = attribute_batch(&model, &normal, &abnormal, target, method, &cfg, a.seed, Execution::Parallel)?;
    write_atomic(&a.out, report.to_json()?.as_bytes())?;
    writeln!(out, "{method} attribution of {} over {} rows", model.dag.name(target), abnormal.rows())?;
    print_ranking(out, &model.dag, &report, 10)?;
    Ok(())
}

fn load_cases(dir: &Path) -> Result<Vec<ScenarioCase>, CliError> {
    if dir.join(rca_core::scenarios::TRUTH_FILE).is_file() {
        return Ok(vec![ScenarioCase::read_from(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?]);
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| input_error(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(rca_core::scenarios::TRUTH_FILE).is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(input_error(format!("{} holds no case", dir.display())));
    }
    subdirs
        .iter()
        .map(|p| ScenarioCase::read_from(p).map_err(|e| input_error(format!("{}: {e}", p.display()))))
        .collect()
}

fn grid(groups: &[(&str, Vec<RankingMetricResult>)], methods: &[Method], k: usize) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<12}", format!("NDCG@{k}"));
    for (mix, _) in groups {
        let _ = write!(s, " {mix:>16}");
    }
    s.push('\n');
    for m in methods {
        let _ = write!(s, "{:<12}", m.as_str());
        for (_, rs) in groups {
            match rs.iter().find(|r| r.method == *m && r.k == k) {
                Some(r) => {
                    let _ = write!(s, " {:>16}", format!("{:.3}±{:.3}", r.ndcg, r.std));
                }
                None => {
                    let _ = write!(s, " {:>16}", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

fn evaluate<W: Write>(a: &EvaluateArgs, out: &mut W) -> Result<(), CliError> {
    let cases = load_cases(&a.cases)?;
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let mut cfg = EvalConfig { k_values: a.k.clone(), ..EvalConfig::default() };
    cfg.attribution.game.classic.early_stop = Some(a.early_stop);
    let mut by_mix: BTreeMap<usize, (Mix, Vec<ScenarioCase>)> = BTreeMap::new();
    for c in cases {
        let key = Mix::ALL.iter().position(|m| *m == c.mix).unwrap_or(0);
        by_mix.entry(key).or_insert_with(|| (c.mix, Vec::new())).1.push(c);
    }
    let mut groups = Vec::new();
    for (mix, group) in by_mix.values() {
        groups.push((mix.as_str(), evaluate_methods(group, &methods, &cfg, Execution::Parallel)?));
    }
    let mut table = Vec::new();
    let borrowed: Vec<(&str, &[RankingMetricResult])> = groups.iter().map(|(m, r)| (*m, r.as_slice())).collect();
    write_results_csv(&mut table, &borrowed)?;
    write_atomic(&a.out, &table)?;
    let k = if a.k.contains(&HEADLINE_K) { HEADLINE_K } else { a.k[0] };
    write!(out, "{}", grid(&groups, &methods, k))?;
    Ok(())
}

fn bench<W: Write>(a: &BenchArgs, out: &mut W) -> Result<(), CliError> {
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let cfg = BenchConfig { budget_seconds: a.budget, seed: a.seed, ..BenchConfig::default() };
    let records = bench_runtime(&a.sizes, &methods, &cfg)?;
    let mut buf = Vec::new();
    write_bench_csv(&mut buf, &records)?;
    write_atomic(&a.out, &buf)?;
    writeln!(out, "{:<12} {:>6} {:>6} {:>12} {:>12}", "method", "nodes", "edges", "seconds", "evals")?;
    for r in &records {
        let secs = r.seconds.map_or("skipped".to_string(), |s| format!("{s:.6}"));
        let evals = r.evals.map_or("-".to_string(), |e| e.to_string());
        writeln!(out, "{:<12} {:>6} {:>6} {secs:>12} {evals:>12}", r.method.as_str(), r.nodes, r.edges)?;
    }
    for m in &methods {
        let t = time_slope(&records, *m).map_or("n/a".to_string(), |s| format!("{s:.2}"));
        let e = eval_slope(&records, *m).map_or("n/a".to_string(), |s| format!("{s:.2}"));
        writeln!(out, "{m}: log-log slope of time vs d+e = {t}, of evaluations vs d = {e}")?;
    }
    Ok(())
}
