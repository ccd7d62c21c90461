//! Shapley value engines over generic coalition games.
//!
//! * [`shapley_classic`]: exact enumeration of all `2^d` coalitions, or a
//!   streamed estimate with early stopping beyond the player cap.
//! * [`shapley_sampling`]: kernel-weighted least squares over sampled coalitions,
//!   with efficiency imposed as an equality constraint.
//! * [`shapley_permutation`]: Monte Carlo over (reference instance, permutation) pairs.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// A cooperative game over `players()` players. A coalition is a membership mask.
pub trait CoalitionGame: Sync {
    fn players(&self) -> usize;

    fn value(&self, coalition: &[bool]) -> f64;

    /// Number of reference instances the permutation engine can draw from.
    fn references(&self) -> usize {
        1
    }

    /// Value against a single reference instance. Averaging over all
    /// references should reproduce [`CoalitionGame::value`].
    fn value_against(&self, coalition: &[bool], _reference: usize) -> f64 {
        self.value(coalition)
    }
}

/// Estimated Shapley values and the number of value-function calls spent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyOutcome {
    pub values: Vec<f64>,
    pub evaluations: usize,
    /// Standard error per player, for Monte Carlo engines.
    pub std_errors: Option<Vec<f64>>,
    /// Standard error of the sum of values (permutation engine).
    pub total_std_error: Option<f64>,
    /// False when early stopping hit its draw limit before settling.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicConfig {
    /// Largest player count enumerated exactly.
    pub cap: usize,
    /// Stop tolerance for the streamed estimate; `None` refuses games above `cap`.
    pub early_stop: Option<f64>,
    /// Consecutive draws over which the running estimate must stay within tolerance.
    pub window: usize,
    pub max_draws_per_player: usize,
}

impl Default for ClassicConfig {
    fn default() -> Self {
        ClassicConfig { cap: 20, early_stop: None, window: 25, max_draws_per_player: 5000 }
    }
}

fn mask_to_bools(mask: u64, d: usize, out: &mut [bool]) {
    for (i, b) in out.iter_mut().enumerate().take(d) {
        *b = mask >> i & 1 == 1;
    }
}

/// `|Q|! (d - |Q| - 1)! / d!` for every coalition size `|Q|` in `0..d`.
fn shapley_weights(d: usize) -> Vec<f64> {
    // w(s) = 1 / (d · C(d-1, s))
    let mut out = Vec::with_capacity(d);
    let mut binom = 1.0f64;
    for s in 0..d {
        out.push(1.0 / (d as f64 * binom));
        binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
    }
    out
}

fn exact(game: &dyn CoalitionGame) -> ShapleyOutcome {
    let d = game.players();
    let total = 1u64 << d;
    let mut mask = vec![false; d];
    let values: Vec<f64> = (0..total)
        .map(|m| {
            mask_to_bools(m, d, &mut mask);
            game.value(&mask)
        })
        .collect();
    let w = shapley_weights(d);
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << j;
        let mut acc = 0.0;
        for m in 0..total {
            if m & bit == 0 {
                let size = m.count_ones() as usize;
                acc += w[size] * (values[(m | bit) as usize] - values[m as usize]);
            }
        }
        *p = acc;
    }
    ShapleyOutcome { values: phi, evaluations: total as usize, std_errors: None, total_std_error: None, converged: true }
}

/// Streams coalitions per player (size uniform, then members uniform, which
/// is exactly the Shapley weighting) until the running mean settles.
fn streamed(game: &dyn CoalitionGame, tol: f64, cfg: &ClassicConfig, seed: u64) -> ShapleyOutcome {
    let d = game.players();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = cfg.window.max(1);
    let mut phi = vec![0.0; d];
    let mut errs = vec![0.0; d];
    let mut evaluations = 0;
    let mut converged = true;
    let mut mask = vec![false; d];
    let mut others: Vec<usize> = Vec::with_capacity(d);
    for j in 0..d {
        others.clear();
        others.extend((0..d).filter(|&i| i != j));
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut history: Vec<f64> = Vec::with_capacity(window);
        let mut done = false;
        let mut t = 0;
        while t < cfg.max_draws_per_player {
            t += 1;
            let size = rng.random_range(0..d);
            let (chosen, _) = others.partial_shuffle(&mut rng, size);
            mask.iter_mut().for_each(|b| *b = false);
            for &i in chosen.iter() {
                mask[i] = true;
            }
            let without = game.value(&mask);
            mask[j] = true;
            let with = game.value(&mask);
            evaluations += 2;
            let delta = with - without;
            let prev = mean;
            mean += (delta - mean) / t as f64;
            m2 += (delta - prev) * (delta - mean);
            if history.len() == window {
                history.remove(0);
            }
            history.push(mean);
            if history.len() == window {
                let (lo, hi) = history.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                if hi - lo < tol {
                    done = true;
                    break;
                }
            }
        }
        converged &= done;
        phi[j] = mean;
        errs[j] = if t > 1 { (m2 / (t - 1) as f64 / t as f64).sqrt() } else { 0.0 };
    }
    ShapleyOutcome { values: phi, evaluations, std_errors: Some(errs), total_std_error: None, converged }
}

/// Exact Shapley values up to `cfg.cap` players; streamed with early stopping above it.
pub fn shapley_classic(game: &dyn CoalitionGame, cfg: &ClassicConfig, seed: u64) -> Result<ShapleyOutcome> {
    let d = game.players();
    if d <= cfg.cap.min(62) {
        return Ok(exact(game));
    }
    match cfg.early_stop {
        Some(tol) if tol > 0.0 => Ok(streamed(game, tol, cfg, seed)),
        _ => Err(RcaError::TooManyPlayers { players: d, cap: cfg.cap }),
    }
}

fn coalition_key(mask: &[bool]) -> Vec<u64> {
    let mut key = vec![0u64; mask.len().div_ceil(64)];
    for (i, &b) in mask.iter().enumerate() {
        if b {
            key[i / 64] |= 1 << (i % 64);
        }
    }
    key
}

/// Kernel-weighted least squares estimate from `num_subsets` sampled coalitions.
///
/// Coalition sizes are drawn with probability proportional to
/// `(d-1) / (s (d-s))`, members uniformly, and each draw is paired with its
/// complement. With sampling proportional to the kernel, the regression is
/// unweighted; `Σφ = v(P) - v(∅)` is imposed exactly by eliminating the last player.
pub fn shapley_sampling(game: &dyn CoalitionGame, num_subsets: usize, seed: u64) -> Result<ShapleyOutcome> {
    let d = game.players();
    if num_subsets < d + 2 {
        return Err(RcaError::InvalidConfig(format!("need at least {} subsets for {d} players", d + 2)));
    }
    let empty = game.value(&vec![false; d]);
    let full = game.value(&vec![true; d]);
    let total = full - empty;
    let base_evals = 2;
    if d <= 1 {
        return Ok(ShapleyOutcome {
            values: vec![total; d],
            evaluations: base_evals,
            std_errors: None,
            total_std_error: None,
            converged: true,
        });
    }
    let size_weights: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
    let wsum: f64 = size_weights.iter().sum();
    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut evaluations = base_evals;
    const ATTEMPTS: usize = 3;
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9E37_79B9));
        let mut rows: Vec<Vec<bool>> = Vec::with_capacity(num_subsets);
        let mut players: Vec<usize> = (0..d).collect();
        while rows.len() < num_subsets {
            let mut u = rng.random::<f64>() * wsum;
            let mut size = d - 1;
            for (k, w) in size_weights.iter().enumerate() {
                if u < *w {
                    size = k + 1;
                    break;
                }
                u -= w;
            }
            let (chosen, _) = players.partial_shuffle(&mut rng, size);
            let mut mask = vec![false; d];
            for &i in chosen.iter() {
                mask[i] = true;
            }
            let complement: Vec<bool> = mask.iter().map(|b| !b).collect();
            rows.push(mask);
            if rows.len() < num_subsets {
                rows.push(complement);
            }
        }
        // Σ_{i<d-1} φ_i (z_i - z_last) = (v(Q) - v(∅)) - z_last·total
        let m = d - 1;
        let mut ata = DMatrix::<f64>::zeros(m, m);
        let mut atb = DVector::<f64>::zeros(m);
        let mut a = vec![0.0; m];
        for mask in &rows {
            let key = coalition_key(mask);
            let v = match cache.get(&key) {
                Some(&v) => v,
                None => {
                    let v = game.value(mask);
                    evaluations += 1;
                    cache.insert(key, v);
                    v
                }
            };
            let last = if mask[m] { 1.0 } else { 0.0 };
            for i in 0..m {
                a[i] = if mask[i] { 1.0 } else { 0.0 } - last;
            }
            let b = v - empty - last * total;
            for i in 0..m {
                if a[i] == 0.0 {
                    continue;
                }
                atb[i] += a[i] * b;
                for k in 0..m {
                    ata[(i, k)] += a[i] * a[k];
                }
            }
        }
        let Some(chol) = ata.clone().cholesky() else { continue };
        let l = chol.l();
        let diag_max = (0..m).map(|i| l[(i, i)]).fold(0.0, f64::max);
        let diag_min = (0..m).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if !(diag_min > 1e-8 * diag_max) {
            continue;
        }
        let head = chol.solve(&atb);
        let mut values: Vec<f64> = head.iter().copied().collect();
        values.push(total - values.iter().sum::<f64>());
        return Ok(ShapleyOutcome { values, evaluations, std_errors: None, total_std_error: None, converged: true });
    }
    Err(RcaError::DegenerateSystem { attempts: ATTEMPTS })
}

/// Permutation sampling: for each of `m` draws pick a reference instance and
/// a permutation, then replace players by their reference values in
/// permutation order, crediting each player with the value drop it causes.
pub fn shapley_permutation(game: &dyn CoalitionGame, m: usize, seed: u64) -> Result<ShapleyOutcome> {
    let d = game.players();
    if m == 0 {
        return Err(RcaError::InvalidConfig("at least one permutation required".into()));
    }
    if game.references() == 0 {
        return Err(RcaError::EmptyReferencePool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    let mut tot_sum = 0.0;
    let mut tot_sumsq = 0.0;
    let mut evaluations = 0;
    let mut mask = vec![true; d];
    for _ in 0..m {
        let r = rng.random_range(0..game.references());
        order.shuffle(&mut rng);
        mask.iter_mut().for_each(|b| *b = true);
        let start = game.value_against(&mask, r);
        let mut prev = start;
        evaluations += 1;
        for &j in &order {
            mask[j] = false;
            let next = game.value_against(&mask, r);
            evaluations += 1;
            let delta = prev - next;
            sum[j] += delta;
            sumsq[j] += delta * delta;
            prev = next;
        }
        let t = start - prev;
        tot_sum += t;
        tot_sumsq += t * t;
    }
    let mf = m as f64;
    let se = |s: f64, s2: f64| {
        if m < 2 {
            return 0.0;
        }
        let mean = s / mf;
        ((s2 / mf - mean * mean).max(0.0) * mf / (mf - 1.0) / mf).sqrt()
    };
    Ok(ShapleyOutcome {
        values: sum.iter().map(|s| s / mf).collect(),
        evaluations,
        std_errors: Some(sum.iter().zip(&sumsq).map(|(&s, &s2)| se(s, s2)).collect()),
        total_std_error: Some(se(tot_sum, tot_sumsq)),
        converged: true,
    })
}

/// Game defined by a closure over the membership mask.
pub struct FnGame<F: Fn(&[bool]) -> f64 + Sync> {
    pub players: usize,
    pub f: F,
}

impl<F: Fn(&[bool]) -> f64 + Sync> CoalitionGame for FnGame<F> {
    fn players(&self) -> usize {
        self.players
    }
    fn value(&self, coalition: &[bool]) -> f64 {
        (self.f)(coalition)
    }
}
