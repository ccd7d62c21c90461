use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rca_core::attribution::shapley::{shapley_classic, shapley_permutation, shapley_sampling, ClassicConfig, FnGame};
use rca_core::attribution::{ig_attribute, path_integrated_gradients, IgConfig, ReferencePool};
use rca_core::mechanism::{Hyperparams, NodeNoise};
use rca_core::noise::{LeafFunction, NoiseAssignment};
use rca_core::scoring::{IdentityScore, MarginalStats, OutlierScore, ScaledScore};
use rca_core::{Dag, MechanismModel, NodeId};

fn instance(n: usize, seed: u64) -> (MechanismModel, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Every node feeds the next one, so the last node sees them all.
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|j| {
            let mut ps: Vec<usize> = (0..j.saturating_sub(1)).filter(|_| rng.random::<f64>() < 0.2).collect();
            if j > 0 {
                ps.push(j - 1);
            }
            ps
        })
        .collect();
    let dag = Dag::from_parents(parents, None).unwrap();
    let weights = dag
        .nodes()
        .map(|j| (0..dag.parents(j).len()).map(|_| rng.random_range(-1.2..1.2)).collect())
        .collect();
    let hyper = Hyperparams::new(100.0, 1.0).unwrap();
    let model = MechanismModel::generative(dag, weights, hyper, vec![NodeNoise::Gaussian { std: 1.0 }; n]).unwrap();
    (model, rng)
}

fn noise(dag: &Dag, rng: &mut ChaCha8Rng, edge_scale: f64) -> NoiseAssignment {
    NoiseAssignment {
        node: (0..dag.node_count()).map(|_| rng.sample(StandardNormal)).collect(),
        edge: (0..dag.edge_count()).map(|_| edge_scale * rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

#[test]
fn input_at_reference_attributes_nothing() {
    for seed in 0..20 {
        let (model, mut rng) = instance(15, seed);
        let leaf = LeafFunction::new(&model, NodeId(14)).unwrap();
        let x = noise(leaf.dag(), &mut rng, 0.3);
        let score = OutlierScore(MarginalStats::new(0.0, 2.0));
        let (n, e) = path_integrated_gradients(&leaf, &score, &x, &x, 50).unwrap();
        assert!(n.iter().chain(&e).all(|v| *v == 0.0));
    }
}

#[test]
fn completeness_on_the_identity_score() {
    for seed in 0..50 {
        let (model, mut rng) = instance(20, seed);
        let leaf = LeafFunction::new(&model, NodeId(19)).unwrap();
        let reference = noise(leaf.dag(), &mut rng, 0.0);
        let input = noise(leaf.dag(), &mut rng, 0.5);
        let (n, e) = path_integrated_gradients(&leaf, &IdentityScore, &reference, &input, 200).unwrap();
        let total: f64 = n.iter().chain(&e).sum();
        let diff = leaf.forward(&input).unwrap().leaf - leaf.forward(&reference).unwrap().leaf;
        assert!((total - diff).abs() <= 1e-3 * diff.abs().max(1e-9), "seed {seed}: {total} vs {diff}");
    }
}

#[test]
fn disconnected_coordinates_get_nothing() {
    for seed in 0..30 {
        let (mut model, mut rng) = instance(12, seed);
        // Cut every edge leaving node 3, so its noise cannot reach the target.
        let dag = model.dag.clone();
        for j in dag.nodes() {
            for (k, p) in dag.parents(j).iter().enumerate() {
                if p.0 == 3 {
                    model.per_node[j.0].posterior_mean[k] = 0.0;
                }
            }
        }
        let leaf = LeafFunction::new(&model, NodeId(11)).unwrap();
        let reference = noise(leaf.dag(), &mut rng, 0.0);
        let mut input = noise(leaf.dag(), &mut rng, 0.0);
        for e in leaf.dag().edges() {
            if e.src.0 != 3 {
                input.edge[leaf.dag().edge_index(e).unwrap()] = 0.2 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let score = OutlierScore(MarginalStats::new(0.0, 1.5));
        let (n, e) = path_integrated_gradients(&leaf, &score, &reference, &input, 50).unwrap();
        let local = leaf.sub.local(NodeId(3)).unwrap();
        assert_eq!(n[local.0], 0.0);
        for edge in leaf.dag().edges().filter(|e| e.src == local) {
            assert_eq!(e[leaf.dag().edge_index(edge).unwrap()], 0.0);
        }
    }
}

#[test]
fn scaling_the_score_keeps_the_ranking() {
    for seed in 0..30 {
        let (model, mut rng) = instance(15, seed);
        let leaf = LeafFunction::new(&model, NodeId(14)).unwrap();
        let input = noise(leaf.dag(), &mut rng, 0.3);
        let pool = ReferencePool::from_rows((0..20).map(|_| noise(leaf.dag(), &mut rng, 0.0).node).collect());
        let base = OutlierScore(MarginalStats::new(0.0, 2.0));
        let cfg = IgConfig::default();
        let a = ig_attribute(&leaf, &base, &input, &pool, &cfg, seed).unwrap();
        let factor = rng.random_range(0.1..10.0);
        let b = ig_attribute(&leaf, &ScaledScore { factor, inner: base }, &input, &pool, &cfg, seed).unwrap();
        assert_eq!(a.ranked_candidates(), b.ranked_candidates());
        for ((_, x), (_, y)) in a.ranking().iter().zip(b.ranking()) {
            assert!((y - factor * x).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }
}

#[test]
fn size_squared_game_splits_evenly() {
    let g = FnGame { players: 3, f: |q: &[bool]| (q.iter().filter(|b| **b).count() as f64).powi(2) };
    let out = shapley_classic(&g, &ClassicConfig::default(), 0).unwrap();
    assert_eq!(out.values, vec![3.0, 3.0, 3.0]);
    assert_eq!(out.evaluations, 8);
}

#[test]
fn estimators_agree_with_exact_values_on_small_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for g in 0..20 {
        let d = 2 + g % 4;
        let table: Vec<f64> = (0..1usize << d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let linear: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let game = FnGame {
            players: d,
            f: |q: &[bool]| {
                let idx = q.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| 1usize << i).sum::<usize>();
                table[idx] + q.iter().zip(&linear).filter(|(b, _)| **b).map(|(_, a)| a).sum::<f64>()
            },
        };
        let exact = shapley_classic(&game, &ClassicConfig::default(), 0).unwrap().values;
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sampled = shapley_sampling(&game, 4000, g as u64).unwrap().values;
        let perm = shapley_permutation(&game, 40_000, g as u64).unwrap().values;
        for i in 0..d {
            assert!((sampled[i] - exact[i]).abs() <= 0.05 * scale, "game {g} sampling: {sampled:?} vs {exact:?}");
            assert!((perm[i] - exact[i]).abs() <= 0.05 * scale, "game {g} permutation: {perm:?} vs {exact:?}");
        }
    }
}

#[test]
fn exact_engine_spends_two_to_the_d() {
    for d in 1..=15 {
        let g = FnGame { players: d, f: |q: &[bool]| q.iter().filter(|b| **b).count() as f64 };
        assert_eq!(shapley_classic(&g, &ClassicConfig::default(), 0).unwrap().evaluations, 1 << d);
    }
}
