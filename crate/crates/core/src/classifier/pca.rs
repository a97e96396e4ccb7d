//! Kernel PCA on a standardized Gram matrix and the random-projection
//! median splitter for unsupervised phase separation.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::rng;

/// Eigenvalues in `[-EIGEN_CLIP_TOL, 0)` are treated as zero.
pub const EIGEN_CLIP_TOL: f64 = 1e-8;

/// Leading kernel principal components.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaEmbedding {
    pub num_components: usize,
    /// `N x num_components`; column `c` is eigenvector `c` times `sqrt(lambda_c)`.
    pub coordinates: DMatrix<f64>,
    /// All eigenvalues of the (centered) matrix, nonincreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaEmbedding {
    pub fn n(&self) -> usize {
        self.coordinates.nrows()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.coordinates.row(i).iter().copied().collect()
    }

    /// The same embedding with every coordinate negated.
    pub fn negated(&self) -> Self {
        Self {
            coordinates: -&self.coordinates,
            ..self.clone()
        }
    }
}

/// Kernel PCA with double-centering.
pub fn kernel_pca(g: &GramMatrix, num_components: usize) -> Result<PcaEmbedding> {
    kernel_pca_with(g, num_components, true)
}

/// Kernel PCA; `center` toggles `K - 1K/N - K1/N + 1K1/N^2`.
pub fn kernel_pca_with(g: &GramMatrix, num_components: usize, center: bool) -> Result<PcaEmbedding> {
    if !g.standardized {
        return Err(Error::NotStandardized);
    }
    let n = g.n();
    if num_components > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: num_components,
        });
    }
    let mut k = g.to_matrix();
    if center {
        let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
        let total = row_means.iter().sum::<f64>() / n as f64;
        k = DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + total);
    }
    // symmetrize against rounding before the eigensolver
    let k = (&k + k.transpose()) * 0.5;
    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if (-EIGEN_CLIP_TOL..0.0).contains(&v) {
                0.0
            } else {
                v
            }
        })
        .collect();
    let mut coordinates = DMatrix::zeros(n, num_components);
    for (c, &i) in order.iter().take(num_components).enumerate() {
        let scale = eigenvalues[c].max(0.0).sqrt();
        let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().map(|v| v * scale).collect();
        // largest-magnitude coordinate positive (first index wins ties)
        let pivot = col
            .iter()
            .enumerate()
            .fold(
                (0, 0.0f64),
                |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc },
            )
            .0;
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        for (r, v) in col.into_iter().enumerate() {
            coordinates[(r, c)] = v + 0.0;
        }
    }
    Ok(PcaEmbedding {
        num_components,
        coordinates,
        eigenvalues,
    })
}

/// Outcome of [`unsupervised_split`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub labels: Vec<i8>,
    /// Unit direction of the winning projection.
    pub direction: Vec<f64>,
    pub median: f64,
    /// Sum of absolute deviations from the median along `direction`.
    pub score: f64,
    pub trial: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Splits points into two groups: over `trials` uniformly random directions
/// in the first `components` coordinates, keep the projection with the
/// largest total absolute deviation from its median and label points by
/// side (`>= median` is `+1`).
pub fn unsupervised_split(emb: &PcaEmbedding, components: usize, trials: usize, seed: u64) -> Result<SplitResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let d = components.min(emb.num_components);
    let n = emb.n();
    if d == 0 || n == 0 {
        return Err(Error::DegenerateEmbedding);
    }
    let pts: Vec<Vec<f64>> = (0..n).map(|i| emb.point(i)[..d].to_vec()).collect();
    if pts.iter().all(|p| p == &pts[0]) {
        return Err(Error::DegenerateEmbedding);
    }
    let mut best: Option<SplitResult> = None;
    for trial in 0..trials {
        let mut r = rng::stream(seed, trial as u64);
        let dir = loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<f64>>();
            }
        };
        let proj: Vec<f64> = pts
            .iter()
            .map(|p| p.iter().zip(&dir).map(|(a, b)| a * b).sum())
            .collect();
        let mut sorted = proj.clone();
        sorted.sort_by(f64::total_cmp);
        let med = median(&sorted);
        let score: f64 = proj.iter().map(|p| (p - med).abs()).sum();
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(SplitResult {
                labels: proj.iter().map(|&p| if p >= med { 1 } else { -1 }).collect(),
                direction: dir,
                median: med,
                score,
                trial,
            });
        }
    }
    Ok(best.expect("at least one trial"))
}
