//! Cosine similarity, nearest-neighbor lists over symbol vectors and a small
//! PCA for 2-D projections.

mod pca;

use std::cmp::Ordering;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub use pca::{pca, pca_project, Pca, Projection, PCA_MAX_ITERATIONS, PCA_TOLERANCE};

/// Cosine of the angle between `u` and `v`, clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

// products are commutative, so swapping the arguments gives the same bits
fn cosine_with_norms(u: &[f64], v: &[f64], nu: f64, nv: f64) -> f64 {
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub surface: String,
    /// `(surface, cosine)`, best first.
    pub neighbors: Vec<(String, f64)>,
}

/// Descending score, then ascending label.
pub fn by_score_then_label(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Exact top-`k` neighbors of `surface` among the table's input vectors.
pub fn nearest_neighbors(table: &EmbeddingTable, surface: &str, k: usize) -> Result<NeighborList> {
    let query = table
        .vocab()
        .index_of(surface)
        .ok_or_else(|| Error::UnknownSurface(surface.to_string()))?;
    let rows: Vec<&[f64]> = table.input_rows().collect();
    neighbors_among(table.vocab().surfaces(), &rows, query, k)
}

/// Brute-force neighbor ranking for row `query` of `rows`. Zero rows other
/// than the query are never listed.
pub fn neighbors_among(labels: &[String], rows: &[&[f64]], query: usize, k: usize) -> Result<NeighborList> {
    if labels.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: rows.len(),
        });
    }
    let q = rows[query];
    let nq = norm(q);
    if nq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut scored = Vec::with_capacity(rows.len().saturating_sub(1));
    for (i, (label, row)) in labels.iter().zip(rows).enumerate() {
        if i == query {
            continue;
        }
        if row.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: row.len(),
            });
        }
        let n = norm(row);
        if n == 0.0 {
            continue;
        }
        scored.push((label.as_str(), cosine_with_norms(q, row, nq, n)));
    }
    scored.sort_by(|a, b| by_score_then_label(*a, *b));
    scored.truncate(k);
    Ok(NeighborList {
        surface: labels[query].clone(),
        neighbors: scored.into_iter().map(|(s, c)| (s.to_string(), c)).collect(),
    })
}
