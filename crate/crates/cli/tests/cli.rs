use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rca_core::mechanism::{sample, Hyperparams, NodeNoise, SampleMode};
use rca_core::{Dag, MechanismModel};

fn rca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rca")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = rca(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_file())
        .map(|e| (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

fn truth(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("truth.json")).unwrap()).unwrap()
}

#[test]
fn generate_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = ok(&["generate", "random", "--nodes", "20", "--seed", "7", "--out", p(a.path())]);
    let sb = ok(&["generate", "random", "--nodes", "20", "--seed", "7", "--out", p(b.path())]);
    assert_eq!(sa, sb);
    assert_eq!(files(a.path()), files(b.path()));
    assert_eq!(files(a.path()).len(), 5);
}

#[test]
fn supply_chain_truth_has_one_or_two_causes() {
    for mix in ["nodes", "edges", "both"] {
        let d = tempfile::tempdir().unwrap();
        ok(&["generate", "supplychain", "--seed", "1", "--mix", mix, "--out", p(d.path())]);
        let n = truth(d.path())["root_causes"].as_array().unwrap().len();
        assert!((1..=2).contains(&n), "{mix}: {n}");
    }
}

#[test]
fn missing_output_directory_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("nope");
    let out = rca(&["generate", "microservice", "--seed", "3", "--out", p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!missing.exists());
    assert!(fs::read_dir(d.path()).unwrap().next().is_none());
}

#[test]
fn seeds_are_mandatory() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(rca(&["generate", "random", "--out", p(d.path())]).status.code(), Some(2));
    assert_eq!(rca(&["bench", "--out", p(&d.path().join("b.csv"))]).status.code(), Some(2));
}

#[test]
fn fit_writes_a_reloadable_model() {
    let d = tempfile::tempdir().unwrap();
    ok(&["generate", "random", "--nodes", "15", "--seed", "2", "--out", p(d.path())]);
    let model = d.path().join("model.json");
    let graph = d.path().join("graph.json");
    let normal = d.path().join("normal.csv");
    ok(&["fit", "--graph", p(&graph), "--data", p(&normal), "--out", p(&model)]);
    let text = fs::read_to_string(&model).unwrap();
    let m = MechanismModel::from_json(&text).unwrap();
    assert_eq!(m.to_json().unwrap(), text);
    assert_eq!(m.dag.node_count(), 15);
}

#[test]
fn fit_reports_bad_inputs_with_their_codes() {
    let d = tempfile::tempdir().unwrap();
    let graph = d.path().join("graph.json");
    let data = d.path().join("data.csv");
    let model = d.path().join("model.json");
    fs::write(&graph, r#"{"nodes": ["a", "b", "c"], "edges": [[0, 1], [1, 2]]}"#).unwrap();

    fs::write(&data, "a,b\n1,2\n2,3\n").unwrap();
    let out = rca(&["fit", "--graph", p(&graph), "--data", p(&data), "--out", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column mismatch"));

    fs::write(&data, "a,b,c\n1,2,3\n2,x,3\n").unwrap();
    assert_eq!(rca(&["fit", "--graph", p(&graph), "--data", p(&data), "--out", p(&model)]).status.code(), Some(2));

    fs::write(&graph, r#"{"nodes": ["a", "b", "c"], "edges": [[0, 1], [1, 2], [2, 0]]}"#).unwrap();
    fs::write(&data, "a,b,c\n1,2,3\n2,1,3\n").unwrap();
    assert_eq!(rca(&["fit", "--graph", p(&graph), "--data", p(&data), "--out", p(&model)]).status.code(), Some(2));

    // A constant column leaves the outlier score undefined.
    fs::write(&graph, r#"{"nodes": ["a", "b", "c"], "edges": [[0, 1], [1, 2]]}"#).unwrap();
    fs::write(&data, "a,b,c\n1,2,3\n2,1,3\n").unwrap();
    assert_eq!(rca(&["fit", "--graph", p(&graph), "--data", p(&data), "--out", p(&model)]).status.code(), Some(3));
    assert!(!model.exists());
}

fn fitted_case(dir: &Path, args: &[&str]) {
    ok(&[&["generate"], args, &["--out", p(dir)]].concat());
    ok(&[
        "fit",
        "--graph",
        p(&dir.join("graph.json")),
        "--data",
        p(&dir.join("normal.csv")),
        "--alpha",
        &truth(dir)["hyper"]["alpha"].to_string(),
        "--beta",
        &truth(dir)["hyper"]["beta"].to_string(),
        "--out",
        p(&dir.join("model.json")),
    ]);
}

fn attribute(dir: &Path, method: &str, extra: &[&str]) -> Output {
    let t = truth(dir);
    let target = t["target_name"].as_str().unwrap();
    Command::new(env!("CARGO_BIN_EXE_rca"))
        .args([
        "attribute",
        "--model",
        p(&dir.join("model.json")),
        "--abnormal",
        p(&dir.join("abnormal.csv")),
        "--normal",
        p(&dir.join("normal.csv")),
        "--target",
        target,
        "--method",
        method,
        "--seed",
        "5",
        "--out",
        p(&dir.join("report.json")),
    ])
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn every_method_prints_a_top_ten() {
    let d = tempfile::tempdir().unwrap();
    fitted_case(d.path(), &["microservice", "--seed", "4", "--mix", "both"]);
    for m in ["bigen", "shapley", "sampling", "permutation", "naive"] {
        let out = attribute(d.path(), m, &[]);
        assert!(out.status.success(), "{m}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        assert_eq!(text.lines().count(), 11, "{text}");
        assert!(text.lines().nth(1).unwrap().trim_start().starts_with("1."));
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report["method"], m);
    }
}

#[test]
fn naive_needs_one_evaluation_per_node() {
    let d = tempfile::tempdir().unwrap();
    fitted_case(d.path(), &["random", "--nodes", "30", "--seed", "12"]);
    assert!(attribute(d.path(), "naive", &[]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    let evals = report["metadata"]["value_evaluations"].as_u64().unwrap();
    let rows = report["metadata"]["rows"].as_u64().unwrap();
    assert!(evals <= 30 * rows, "{evals} evaluations over {rows} rows");
}

#[test]
fn exact_shapley_refuses_large_games() {
    let d = tempfile::tempdir().unwrap();
    let n = 26;
    let dag = Dag::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>(), None).unwrap();
    let hyper = Hyperparams::new(100.0, 1.0).unwrap();
    let gen =
        MechanismModel::generative(dag.clone(), dag.nodes().map(|j| vec![0.5; dag.parents(j).len()]).collect(), hyper, vec![
            NodeNoise::Gaussian { std: 1.0 };
            n
        ])
        .unwrap();
    fs::write(d.path().join("graph.json"), dag.to_json().unwrap()).unwrap();
    fs::write(d.path().join("normal.csv"), sample(&gen, 300, 1, SampleMode::ResampleEdgeNoise).to_csv_string().unwrap()).unwrap();
    fs::write(d.path().join("abnormal.csv"), sample(&gen, 2, 2, SampleMode::ResampleEdgeNoise).to_csv_string().unwrap())
        .unwrap();
    ok(&[
        "fit",
        "--graph",
        p(&d.path().join("graph.json")),
        "--data",
        p(&d.path().join("normal.csv")),
        "--out",
        p(&d.path().join("model.json")),
    ]);
    let report = d.path().join("report.json");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_rca"))
            .args([
            "attribute",
            "--model",
            p(&d.path().join("model.json")),
            "--abnormal",
            p(&d.path().join("abnormal.csv")),
            "--normal",
            p(&d.path().join("normal.csv")),
            "--target",
            "25",
            "--method",
            "shapley",
            "--seed",
            "1",
            "--out",
            p(&report),
        ])
            .args(extra)
            .output()
            .unwrap()
    };
    let refused = run(&[]);
    assert_eq!(refused.status.code(), Some(4), "{}", String::from_utf8_lossy(&refused.stderr));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("26 players"));
    assert!(!report.exists());
    assert!(run(&["--early-stop", "0.05"]).status.success());
}

#[test]
fn attribute_rejects_unknown_targets_and_missing_references() {
    let d = tempfile::tempdir().unwrap();
    fitted_case(d.path(), &["random", "--nodes", "12", "--seed", "3"]);
    let out = Command::new(env!("CARGO_BIN_EXE_rca"))
        .args([
            "attribute",
            "--model",
            p(&d.path().join("model.json")),
            "--abnormal",
            p(&d.path().join("abnormal.csv")),
            "--target",
            "X11",
            "--method",
            "bigen",
            "--seed",
            "1",
            "--out",
            p(&d.path().join("r.json")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_rca"))
        .args([
            "attribute",
            "--model",
            p(&d.path().join("model.json")),
            "--abnormal",
            p(&d.path().join("abnormal.csv")),
            "--normal",
            p(&d.path().join("normal.csv")),
            "--target",
            "nowhere",
            "--method",
            "bigen",
            "--seed",
            "1",
            "--out",
            p(&d.path().join("r.json")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bigen_usually_puts_an_injected_edge_in_its_top_three() {
    let mut hits = 0;
    for seed in 0..100 {
        let d = tempfile::tempdir().unwrap();
        fitted_case(d.path(), &["random", "--nodes", "20", "--seed", &seed.to_string(), "--mix", "edges"]);
        let out = attribute(d.path(), "bigen", &[]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let t = truth(d.path());
        let names: Vec<String> = serde_json::from_str::<serde_json::Value>(
            &fs::read_to_string(d.path().join("graph.json")).unwrap(),
        )
        .unwrap()["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        let injected: Vec<String> = t["root_causes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| {
                let id = c["id"].as_array().unwrap();
                format!("edge {} -> {}", names[id[0].as_u64().unwrap() as usize], names[id[1].as_u64().unwrap() as usize])
            })
            .collect();
        let top3: Vec<&str> = text.lines().skip(1).take(3).collect();
        if top3.iter().any(|l| injected.iter().any(|e| l.contains(&format!("{e} ")))) {
            hits += 1;
        }
    }
    assert!(hits > 50, "{hits} of 100 seeds");
}

#[test]
fn evaluate_reads_case_directories() {
    let d = tempfile::tempdir().unwrap();
    ok(&["generate", "random", "--nodes", "15", "--seed", "9", "--mix", "nodes", "--normal-rows", "300", "--cases", "3", "--out", p(d.path())]);
    let table = d.path().join("table.csv");
    let out = rca(&["evaluate", "--cases", p(d.path()), "--methods", "bigen,naive", "--k", "1,5", "--out", p(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().next().unwrap(), "method,mix,k,mean,std,n_cases");
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",3") && l.contains(",nodes,")));
    let grid = String::from_utf8(out.stdout).unwrap();
    assert!(grid.starts_with("NDCG@5"));

    fs::write(d.path().join("case-001").join("truth.json"), "{").unwrap();
    let out = rca(&["evaluate", "--cases", p(d.path()), "--out", p(&table)]);
    assert_eq!(out.status.code(), Some(2));

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(rca(&["evaluate", "--cases", p(empty.path()), "--out", p(&table)]).status.code(), Some(2));
}

#[test]
fn bench_flags_skips_and_rejects_bad_budgets() {
    let d = tempfile::tempdir().unwrap();
    let table = d.path().join("bench.csv");
    let out = ok(&["bench", "--sizes", "6,10", "--methods", "bigen,shapley", "--seed", "1", "--budget", "30", "--out", p(&table)]);
    assert!(out.contains("log-log slope"));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().next().unwrap(), "method,nodes,edges,seconds,evals");
    assert!(text.contains("shapley,10,") && text.lines().any(|l| l.starts_with("shapley,10,") && l.ends_with(",1024")));
    assert_eq!(rca(&["bench", "--seed", "1", "--budget", "0", "--out", p(&table)]).status.code(), Some(2));
    assert_eq!(rca(&["bench", "--seed", "1", "--sizes", "10,5", "--out", p(&table)]).status.code(), Some(2));
}
