use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rca_core::attribution::report::rank;
use rca_core::attribution::{ig_attribute, IgConfig, ReferencePool};
use rca_core::evaluation::{
    bench_runtime, dcg_at_k, evaluate_method, evaluate_methods, ndcg_at_k, ranking_ndcg, write_results_csv,
    BenchConfig, EvalConfig, View,
};
use rca_core::noise::LeafFunction;
use rca_core::scenarios::{gen_random_graph_case, Mix};
use rca_core::scoring::{MarginalStats, OutlierScore};
use rca_core::{Candidate, Execution, Method, NodeId};

#[test]
fn ideal_orderings_score_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let n = rng.random_range(1..15);
        let rel: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(0..4) as f64)).collect();
        let mut ideal: Vec<usize> = (0..n).collect();
        ideal.sort_by(|a, b| rel[*b].1.total_cmp(&rel[*a].1));
        for k in 1..=12 {
            assert!((ndcg_at_k(&ideal, &rel, k).value - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn one_relevant_item_behind_a_miss() {
    // ln 2 / ln 3 to 16 digits.
    let v = ndcg_at_k(&["b", "a"], &[("a", 1.0)], 2).value;
    assert!((v - 0.630_929_753_571_457_4).abs() < 1e-15);
}

#[test]
fn single_relevant_item_first_is_perfect() {
    for k in 1..=10 {
        let ranking: Vec<u32> = (0..12).collect();
        assert_eq!(ndcg_at_k(&ranking, &[(0, 2.0)], k).value, 1.0);
    }
}

#[test]
fn only_the_order_of_scores_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(2..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let entries = |f: &dyn Fn(f64) -> f64| -> Vec<Candidate> {
            rank((0..n).map(|i| (Candidate::Node(NodeId(i)), f(scores[i]))).collect())
                .into_iter()
                .map(|(c, _)| c)
                .collect()
        };
        let base = entries(&|x| x);
        let rel: Vec<(Candidate, f64)> = (0..n)
            .filter_map(|i| (rng.random::<f64>() < 0.3).then(|| (Candidate::Node(NodeId(i)), rng.random_range(1..4) as f64)))
            .collect();
        for f in [&|x: f64| x.exp(), &|x: f64| x * x * x + 2.0 * x, &|x: f64| 10.0 * x - 7.0] as [&dyn Fn(f64) -> f64; 3] {
            let other = entries(f);
            assert_eq!(base, other);
            for k in [1, 3, 5, 10] {
                assert_eq!(ndcg_at_k(&base, &rel, k), ndcg_at_k(&other, &rel, k));
            }
        }
    }
}

#[test]
fn dcg_grows_with_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut ranking: Vec<usize> = (0..15).collect();
        ranking.shuffle(&mut rng);
        let rel: Vec<f64> = (0..15).map(|_| rng.random_range(0..3) as f64).collect();
        let dcg: Vec<f64> = (1..=15).map(|k| dcg_at_k(&ranking, |i| rel[*i], k)).collect();
        assert!(dcg.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn truth_ranking_scores_one_on_every_case() {
    for mix in Mix::ALL {
        for seed in 0..30 {
            let case = gen_random_graph_case(30, 50, 5, mix, seed).unwrap();
            let mut causes = case.truth.causes.clone();
            causes.sort_by(|a, b| b.relevance.total_cmp(&a.relevance));
            let ranking: Vec<Candidate> = causes.iter().map(|c| c.candidate).collect();
            for k in [1, 2, 3, 5, 10] {
                let n = ranking_ndcg(&ranking, &case, View::Combined, k);
                assert_eq!(n.value, 1.0);
                assert!(!n.all_zero);
            }
        }
    }
}

#[test]
fn suite_results_summarize_per_case_values() {
    let cases: Vec<_> = (0..6).map(|s| gen_random_graph_case(15, 300, 5, Mix::Edges, 40 + s).unwrap()).collect();
    let cfg = EvalConfig::default();
    let seq = evaluate_methods(&cases, &[Method::Bigen, Method::Naive], &cfg, Execution::Sequential).unwrap();
    let par = evaluate_methods(&cases, &[Method::Bigen, Method::Naive], &cfg, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.len(), 2 * cfg.k_values.len());
    for r in &seq {
        assert_eq!(r.view, View::EdgesOnly);
        assert_eq!(r.per_case.len(), cases.len());
        assert!(r.per_case.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = r.per_case.iter().sum::<f64>() / r.per_case.len() as f64;
        assert!((r.ndcg - mean).abs() < 1e-15);
    }
    assert_eq!(evaluate_method(&cases, Method::Naive, &cfg, Execution::Sequential).unwrap()[..], seq[5..]);

    let mut table = Vec::new();
    write_results_csv(&mut table, &[("edges", &seq)]).unwrap();
    let text = String::from_utf8(table).unwrap();
    assert!(text.starts_with("method,mix,k,mean,std,n_cases\nbigen,edges,1,"));
    assert_eq!(text.lines().count(), 1 + seq.len());
}

#[test]
fn ig_spends_steps_times_references_gradients() {
    let case = gen_random_graph_case(30, 200, 5, Mix::Both, 8).unwrap();
    let model = rca_core::evaluation::fit_case(&case).unwrap();
    let leaf = LeafFunction::new(&model, case.target).unwrap();
    let pool = ReferencePool::from_normal(&model, &leaf, &case.normal).unwrap();
    let inferred = pool.assignment(0, leaf.edge_count());
    let score = OutlierScore(MarginalStats::new(0.0, 1.0));
    for (steps, references) in [(50, 5), (7, 3), (200, 1)] {
        leaf.reset_counters();
        let cfg = IgConfig { steps, references };
        let r = ig_attribute(&leaf, &score, &inferred, &pool, &cfg, 1).unwrap();
        assert_eq!(leaf.gradient_evaluations(), steps * references);
        assert_eq!(r.metadata.gradient_evaluations, steps * references);
    }
}

#[test]
fn bench_counts_follow_the_engines() {
    let cfg = BenchConfig { budget_seconds: 20.0, min_timing_seconds: 0.0, normal_rows: 100, ..BenchConfig::default() };
    let records = bench_runtime(&[4, 8, 12], &[Method::Bigen, Method::Shapley, Method::Naive], &cfg).unwrap();
    for r in &records {
        let evals = r.evals.expect("small sizes fit the budget");
        match r.method {
            Method::Bigen => assert_eq!(evals, 250),
            Method::Shapley => assert_eq!(evals, 1 << r.nodes),
            Method::Naive => assert!(evals <= r.nodes + 1),
            _ => unreachable!(),
        }
        assert!(r.seconds.unwrap() > 0.0);
    }
    assert!(bench_runtime(&[8, 4], &[Method::Bigen], &cfg).is_err());
}
