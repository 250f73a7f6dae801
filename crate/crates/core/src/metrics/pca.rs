//! Principal component analysis via covariance eigendecomposition.
//!
//! The covariance matrix is diagonalized with cyclic Jacobi rotations, which
//! keeps the component basis exactly orthonormal and makes the result
//! deterministic. Eigenvalues use the sample (n-1) covariance convention so
//! the variance of the projections equals the eigenvalue.

use crate::error::{Error, Result};

/// Output of [`pca_project`].
#[derive(Debug, Clone)]
pub struct PcaResult {
    /// m x k projections of the centered rows onto the components.
    pub projections: Vec<Vec<f64>>,
    /// k x p orthonormal components, ordered by descending eigenvalue.
    pub components: Vec<Vec<f64>>,
    /// Top-k eigenvalues of the covariance matrix.
    pub eigenvalues: Vec<f64>,
    /// Column means subtracted before projecting.
    pub mean: Vec<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, p x p).
/// Returns (eigenvalues, eigenvectors as columns of `v`).
fn jacobi_eigen(mut a: Vec<f64>, p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let at = |m: &[f64], r: usize, c: usize| m[r * p + c];
    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..p {
            for c in (r + 1)..p {
                off += at(&a, r, c) * at(&a, r, c);
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(&a)) {
            break;
        }
        for r in 0..p {
            for c in (r + 1)..p {
                let arc = at(&a, r, c);
                if arc.abs() < 1e-300 {
                    continue;
                }
                let arr = at(&a, r, r);
                let acc = at(&a, c, c);
                let theta = (acc - arr) / (2.0 * arc);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..p {
                    let akr = a[k * p + r];
                    let akc = a[k * p + c];
                    a[k * p + r] = cos * akr - sin * akc;
                    a[k * p + c] = sin * akr + cos * akc;
                }
                for k in 0..p {
                    let ark = a[r * p + k];
                    let ack = a[c * p + k];
                    a[r * p + k] = cos * ark - sin * ack;
                    a[c * p + k] = sin * ark + cos * ack;
                }
                for k in 0..p {
                    let vkr = v[k * p + r];
                    let vkc = v[k * p + c];
                    v[k * p + r] = cos * vkr - sin * vkc;
                    v[k * p + c] = sin * vkr + cos * vkc;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..p).map(|i| a[i * p + i]).collect();
    (eigenvalues, v)
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Project `x` (m rows of dimension p) onto its top-k principal components.
///
/// Components follow the sign convention that each one's largest-magnitude
/// entry is positive. Zero eigenvalues are legal; the returned basis is still
/// orthonormal. Errors with [`Error::RankDeficient`] when `k` exceeds the
/// number of directions the data can support, `min(m - 1, p)`.
pub fn pca_project(x: &[Vec<f64>], k: usize) -> Result<PcaResult> {
    let m = x.len();
    if m < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    let p = x[0].len();
    if x.iter().any(|row| row.len() != p) {
        return Err(Error::InvalidArgument("ragged PCA input".into()));
    }
    if k == 0 || k > p.min(m) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..=min(m, p) = {}",
            p.min(m)
        )));
    }
    let max_rank = (m - 1).min(p);
    if k > max_rank {
        return Err(Error::RankDeficient { k, rank: max_rank });
    }

    let mut mean = vec![0.0; p];
    for row in x {
        for (m_j, v) in mean.iter_mut().zip(row) {
            *m_j += v;
        }
    }
    for m_j in &mut mean {
        *m_j /= m as f64;
    }

    // sample covariance, p x p
    let mut cov = vec![0.0; p * p];
    for row in x {
        let c: Vec<f64> = row.iter().zip(&mean).map(|(v, mu)| v - mu).collect();
        for i in 0..p {
            for j in i..p {
                cov[i * p + j] += c[i] * c[j];
            }
        }
    }
    let denom = (m - 1) as f64;
    for i in 0..p {
        for j in i..p {
            cov[i * p + j] /= denom;
            cov[j * p + i] = cov[i * p + j];
        }
    }

    let (eigenvalues, vectors) = jacobi_eigen(cov, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap());

    let mut components = Vec::with_capacity(k);
    let mut top_eigenvalues = Vec::with_capacity(k);
    for &col in order.iter().take(k) {
        let mut comp: Vec<f64> = (0..p).map(|r| vectors[r * p + col]).collect();
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if comp[lead] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.push(comp);
        top_eigenvalues.push(eigenvalues[col].max(0.0));
    }

    let projections: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            let c: Vec<f64> = row.iter().zip(&mean).map(|(v, mu)| v - mu).collect();
            components
                .iter()
                .map(|comp| comp.iter().zip(&c).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();

    Ok(PcaResult {
        projections,
        components,
        eigenvalues: top_eigenvalues,
        mean,
    })
}
