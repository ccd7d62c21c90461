use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rca_core::mechanism::{Hyperparams, NodeNoise};
use rca_core::noise::{infer_node_noise, propagate, Identity, LeafFunction, NoiseAssignment};
use rca_core::scoring::{LeafScore, MarginalStats, OutlierScore};
use rca_core::{Dag, MechanismModel, NodeId};

fn instance(n: usize, seed: u64) -> (MechanismModel, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parents: Vec<Vec<usize>> =
        (0..n).map(|j| (0..j).filter(|_| rng.random::<f64>() < (2.0 / j as f64).min(1.0)).collect()).collect();
    let dag = Dag::from_parents(parents, None).unwrap();
    let weights = dag
        .nodes()
        .map(|j| (0..dag.parents(j).len()).map(|_| rng.random_range(-0.9..0.9)).collect())
        .collect();
    let hyper = Hyperparams::new(100.0, 1.0).unwrap();
    let model = MechanismModel::generative(dag, weights, hyper, vec![NodeNoise::Gaussian { std: 1.0 }; n]).unwrap();
    (model, rng)
}

fn random_noise(dag: &Dag, rng: &mut ChaCha8Rng) -> NoiseAssignment {
    NoiseAssignment {
        node: (0..dag.node_count()).map(|_| rng.sample(StandardNormal)).collect(),
        edge: (0..dag.edge_count()).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect(),
    }
}

fn score_at(leaf: &LeafFunction, score: &OutlierScore, noise: &NoiseAssignment) -> f64 {
    score.value(leaf.forward(noise).unwrap().leaf)
}

#[test]
fn score_gradient_matches_central_differences() {
    let mut checked = 0;
    for seed in 0..100 {
        let (model, mut rng) = instance(30, seed);
        let target = NodeId(29);
        let leaf = LeafFunction::new(&model, target).unwrap();
        let noise = random_noise(leaf.dag(), &mut rng);
        let value = leaf.forward(&noise).unwrap().leaf;
        let score = OutlierScore(MarginalStats::new(0.0, 0.5 * value.abs() + 1.0));
        let g = leaf.gradient(&noise).unwrap();
        let ds = score.derivative(g.leaf_value);
        let analytic: Vec<f64> = g.d_node.iter().chain(&g.d_edge).map(|d| ds * d).collect();
        let norm = analytic.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let nn = noise.node.len();
        for (i, &an) in analytic.iter().enumerate() {
            let h = 1e-5;
            let mut plus = noise.clone();
            let mut minus = noise.clone();
            if i < nn {
                plus.node[i] += h;
                minus.node[i] -= h;
            } else {
                plus.edge[i - nn] += h;
                minus.edge[i - nn] -= h;
            }
            let fd = (score_at(&leaf, &score, &plus) - score_at(&leaf, &score, &minus)) / (2.0 * h);
            // Coordinates with a negligible derivative are compared on the scale of the largest one.
            let scale = an.abs().max(1e-3 * norm).max(1e-12);
            assert!((fd - an).abs() / scale < 1e-5, "seed {seed}, coordinate {i}: fd {fd} vs analytic {an}");
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn inferred_noise_regenerates_the_row() {
    for seed in 0..20 {
        let (model, mut rng) = instance(25, seed);
        let w = model.mean_weights_flat();
        let noise = NoiseAssignment {
            node: (0..25).map(|_| rng.sample(StandardNormal)).collect(),
            edge: vec![0.0; model.dag.edge_count()],
        };
        let row = propagate(&model.dag, &w, &noise, &Identity);
        let back = infer_node_noise(&model.dag, &row, &w).unwrap();
        for (a, b) in back.iter().zip(&noise.node) {
            assert!((a - b).abs() < 1e-9 * (1.0 + row.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        }
    }
}

#[test]
fn leaf_forward_agrees_with_full_propagation() {
    for seed in 0..20 {
        let (model, mut rng) = instance(30, seed);
        let w = model.mean_weights_flat();
        let full = random_noise(&model.dag, &mut rng);
        let row = propagate(&model.dag, &w, &full, &Identity);
        let target = NodeId(29);
        let leaf = LeafFunction::new(&model, target).unwrap();
        let local = full.restrict(&model.dag, &leaf.sub);
        let v = leaf.forward(&local).unwrap().leaf;
        assert!((v - row[29]).abs() <= 1e-12 * (1.0 + row[29].abs()));
    }
}
