//! Exact t-SNE: per-row bandwidth calibration by binary search, symmetrized
//! affinities, and KL(P || Q) gradient descent with momentum. Quadratic in the
//! number of points, intended for diagnostic use at desk scale (m <= 2000).

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    /// Gradient-descent step size; 0 selects `max(m / (4 * exaggeration), 50)`.
    pub learning_rate: f64,
    /// P is multiplied by this factor during the first quarter of iterations.
    pub early_exaggeration: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iters: 500,
            learning_rate: 0.0,
            early_exaggeration: 12.0,
            seed: 0,
        }
    }
}

pub(crate) const MAX_POINTS: usize = 2000;

/// Squared Euclidean distances, row-major m x m.
fn pairwise_sq(x: &[Vec<f64>]) -> Vec<f64> {
    let m = x.len();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let dist: f64 = x[i]
                .iter()
                .zip(&x[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * m + j] = dist;
            d[j * m + i] = dist;
        }
    }
    d
}

/// Row-conditional probabilities and the achieved perplexity for precision
/// `beta = 1 / (2 sigma^2)`.
fn row_probs(dist_row: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (j, d) in dist_row.iter().enumerate() {
        out[j] = if j == i { 0.0 } else { (-beta * d).exp() };
        sum += out[j];
    }
    if sum <= 0.0 {
        return 0.0;
    }
    // Shannon entropy in bits; perplexity = 2^H
    let mut h = 0.0;
    for p in out.iter_mut() {
        *p /= sum;
        if *p > 1e-300 {
            h -= *p * p.log2();
        }
    }
    h.exp2()
}

/// Binary search the precision of row `i` until the achieved perplexity is
/// within `tol` of the target.
fn calibrate_row(dist_row: &[f64], i: usize, target: f64, tol: f64, out: &mut [f64]) {
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..200 {
        let perp = row_probs(dist_row, i, beta, out);
        let diff = perp - target;
        if diff.abs() <= tol {
            return;
        }
        if diff > 0.0 {
            // too spread out: raise precision
            lo = beta;
            beta = if hi.is_finite() { (lo + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (lo + hi) / 2.0;
        }
    }
}

/// Symmetrized input affinities P (sums to 1), calibrated per row.
pub(crate) fn input_affinities(x: &[Vec<f64>], perplexity: f64, tol: f64) -> Result<Vec<f64>> {
    let m = x.len();
    if m < 3 {
        return Err(Error::InvalidArgument("t-SNE needs at least 3 points".into()));
    }
    if m > MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "t-SNE capped at {MAX_POINTS} points, got {m}"
        )));
    }
    if perplexity >= (m - 1) as f64 {
        return Err(Error::PerplexityTooLarge { perplexity, n: m });
    }
    if perplexity < 1.0 {
        return Err(Error::InvalidArgument("perplexity must be >= 1".into()));
    }
    let d = pairwise_sq(x);
    let mut cond = vec![0.0; m * m];
    let mut row = vec![0.0; m];
    for i in 0..m {
        calibrate_row(&d[i * m..(i + 1) * m], i, perplexity, tol, &mut row);
        cond[i * m..(i + 1) * m].copy_from_slice(&row);
    }
    let mut p = vec![0.0; m * m];
    let norm = 2.0 * m as f64;
    for i in 0..m {
        for j in 0..m {
            p[i * m + j] = (cond[i * m + j] + cond[j * m + i]) / norm;
        }
    }
    Ok(p)
}

/// Embed `x` into 2-D. Deterministic for a fixed config.
pub fn tsne_embed(x: &[Vec<f64>], cfg: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    let m = x.len();
    let p = input_affinities(x, cfg.perplexity, 1e-5)?;
    let learning_rate = if cfg.learning_rate > 0.0 {
        cfg.learning_rate
    } else {
        (m as f64 / (4.0 * cfg.early_exaggeration)).max(50.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..m)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0_f64; 2]; m];
    let mut gains = vec![[1.0_f64; 2]; m];

    let exaggeration_end = cfg.iters / 4;
    let mut q_num = vec![0.0; m * m];

    for iter in 0..cfg.iters {
        let exaggeration = if iter < exaggeration_end {
            cfg.early_exaggeration
        } else {
            1.0
        };
        // Student-t numerators and their sum
        let mut q_sum = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                q_num[i * m + j] = num;
                q_num[j * m + i] = num;
                q_sum += 2.0 * num;
            }
        }
        let momentum = if iter < 250 { 0.5 } else { 0.8 };
        for i in 0..m {
            let mut grad = [0.0_f64; 2];
            for j in 0..m {
                if i == j {
                    continue;
                }
                let num = q_num[i * m + j];
                let q = (num / q_sum).max(1e-12);
                let coeff = 4.0 * (exaggeration * p[i * m + j] - q) * num;
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for k in 0..2 {
                // delta-bar-delta gain adaptation
                gains[i][k] = if grad[k].signum() != velocity[i][k].signum() {
                    gains[i][k] + 0.2
                } else {
                    (gains[i][k] * 0.8).max(0.01)
                };
                velocity[i][k] =
                    momentum * velocity[i][k] - learning_rate * gains[i][k] * grad[k];
                y[i][k] += velocity[i][k];
            }
        }
        // keep the embedding centered
        let mut c = [0.0_f64; 2];
        for yi in &y {
            c[0] += yi[0];
            c[1] += yi[1];
        }
        c[0] /= m as f64;
        c[1] /= m as f64;
        for yi in &mut y {
            yi[0] -= c[0];
            yi[1] -= c[1];
        }
    }
    if y.iter().any(|v| !v[0].is_finite() || !v[1].is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: cfg.iters });
    }
    Ok(y)
}
