use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Convergence threshold on the change of a unit eigenvector between iterations.
pub const PCA_TOLERANCE: f64 = 1e-9;
pub const PCA_MAX_ITERATIONS: usize = 1000;

/// Principal axes of a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit vectors, strongest first. An axis with no variance left is all zeros.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component.
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        self.components.iter().map(|c| dot(c, &centered)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub surfaces: Vec<String>,
    pub coordinates: Vec<Vec<f64>>,
    pub pca: Pca,
}

/// Projects every symbol's input vector onto the top `components` axes.
pub fn pca_project(table: &EmbeddingTable, components: usize, l2_normalize: bool) -> Result<Projection> {
    let rows: Vec<Vec<f64>> = table
        .input_rows()
        .map(|r| {
            let n = norm(r);
            if l2_normalize && n > 0.0 {
                r.iter().map(|x| x / n).collect()
            } else {
                r.to_vec()
            }
        })
        .collect();
    let pca = pca(&rows, components)?;
    let coordinates = rows.iter().map(|r| pca.project(r)).collect();
    Ok(Projection {
        surfaces: table.vocab().surfaces().to_vec(),
        coordinates,
        pca,
    })
}

/// Top principal axes by power iteration on the covariance matrix with
/// deflation. Each axis is flipped so its largest-magnitude entry is positive.
pub fn pca(rows: &[Vec<f64>], components: usize) -> Result<Pca> {
    let n = rows.len();
    if components == 0 || n < components {
        return Err(Error::InsufficientRows {
            needed: components.max(1),
            available: n,
        });
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    let components = components.min(d);

    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![0.0; d * d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let floor = trace * 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut axes = Vec::with_capacity(components);
    let mut variances = Vec::with_capacity(components);
    for _ in 0..components {
        let start: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        match leading_axis(&cov, d, start, &axes) {
            Some((v, lambda)) if lambda > floor && trace > 0.0 => {
                for i in 0..d {
                    for j in 0..d {
                        cov[i * d + j] -= lambda * v[i] * v[j];
                    }
                }
                axes.push(v);
                variances.push(lambda);
            }
            _ => {
                axes.push(vec![0.0; d]);
                variances.push(0.0);
            }
        }
    }
    Ok(Pca {
        mean,
        components: axes,
        variances,
    })
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for a in against {
        let p = dot(v, a);
        for (x, y) in v.iter_mut().zip(a) {
            *x -= p * y;
        }
    }
}

fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn apply(cov: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d).map(|i| dot(&cov[i * d..(i + 1) * d], v)).collect()
}

fn leading_axis(cov: &[f64], d: usize, mut v: Vec<f64>, previous: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    orthogonalize(&mut v, previous);
    if !normalize(&mut v) {
        return None;
    }
    for _ in 0..PCA_MAX_ITERATIONS {
        let mut next = apply(cov, d, &v);
        orthogonalize(&mut next, previous);
        if !normalize(&mut next) {
            return None;
        }
        let change = v.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = next;
        if change < PCA_TOLERANCE {
            break;
        }
    }
    let lambda = dot(&v, &apply(cov, d, &v));
    let pivot = v
        .iter()
        .enumerate()
        .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Some((v, lambda))
}
