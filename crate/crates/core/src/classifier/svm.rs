//! Norm-constrained hinge-loss SVM trained by projected subgradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;

/// Trained dual coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alpha: Vec<f64>,
    pub lambda_sq: f64,
    /// Hinge loss `sum_l max(0, 1 - y_l (K alpha)_l)` of `alpha`.
    pub training_error: f64,
    /// Training points on the wrong side (score sign disagrees with label).
    pub misclassified: usize,
    pub iterations: usize,
    /// Fingerprint of the training Gram matrix.
    pub gram_hash: u64,
}

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda_sq: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    20_000
}

impl SvmConfig {
    pub fn new(lambda_sq: f64) -> Self {
        Self {
            lambda_sq,
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

pub(crate) fn gram_hash(g: &GramMatrix) -> u64 {
    crate::rng::fnv1a(g.values().iter().map(|v| v.to_bits()))
}

fn hinge(labels: &[i8], k_alpha: &[f64]) -> f64 {
    labels
        .iter()
        .zip(k_alpha)
        .map(|(&y, s)| (1.0 - y as f64 * s).max(0.0))
        .sum()
}

fn misclassified(labels: &[i8], k_alpha: &[f64]) -> usize {
    labels.iter().zip(k_alpha).filter(|(&y, &s)| sign(s) != y).count()
}

fn matvec(k: &GramMatrix, v: &[f64]) -> Vec<f64> {
    let n = k.n();
    let vals = k.values();
    (0..n)
        .map(|i| vals[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `sum_l max(0, 1 - y_l (K alpha)_l)` subject to
/// `alpha^T K alpha <= lambda_sq`.
///
/// Steps are taken in the geometry of `K`: the subgradient direction is
/// `v = y * 1[margin < 1]`, scaled to `K`-length `sqrt(lambda_sq / k)` at
/// iteration `k`, followed by exact rescaling back onto the ellipsoid. The
/// best iterate is returned. If `max_iter` passes without reaching `tol`,
/// the best iterate is carried by [`Error::NotConverged`].
pub fn svm_train(g: &GramMatrix, labels: &[i8], cfg: &SvmConfig) -> Result<SvmModel> {
    let model = svm_train_best_effort(g, labels, cfg)?;
    if model.training_error > cfg.tol && cfg.lambda_sq > 0.0 {
        return Err(Error::NotConverged { best: Box::new(model) });
    }
    Ok(model)
}

/// [`svm_train`] that returns the best iterate whether or not `tol` was met.
pub fn svm_train_best_effort(g: &GramMatrix, labels: &[i8], cfg: &SvmConfig) -> Result<SvmModel> {
    let n = g.n();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidParameter(format!("label {bad} is not +1 or -1")));
    }
    if !(cfg.lambda_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda^2 = {} must be nonnegative",
            cfg.lambda_sq
        )));
    }
    let hash = gram_hash(g);
    let mut alpha = vec![0.0; n];
    let mut k_alpha = vec![0.0; n];
    let mut best = SvmModel {
        alpha: alpha.clone(),
        lambda_sq: cfg.lambda_sq,
        training_error: hinge(labels, &k_alpha),
        misclassified: misclassified(labels, &k_alpha),
        iterations: 0,
        gram_hash: hash,
    };
    if cfg.lambda_sq == 0.0 {
        return Ok(best);
    }
    let radius = cfg.lambda_sq.sqrt();
    for it in 1..=cfg.max_iter {
        if best.training_error <= cfg.tol {
            break;
        }
        let v: Vec<f64> = labels
            .iter()
            .zip(&k_alpha)
            .map(|(&y, s)| if (y as f64) * s < 1.0 { y as f64 } else { 0.0 })
            .collect();
        let kv = matvec(g, &v);
        let vkv = dot(&v, &kv);
        if !(vkv > 0.0) {
            break;
        }
        let eta = radius / (vkv.sqrt() * (it as f64).sqrt());
        for i in 0..n {
            alpha[i] += eta * v[i];
            k_alpha[i] += eta * kv[i];
        }
        let norm_sq = dot(&alpha, &k_alpha);
        if norm_sq > cfg.lambda_sq {
            let s = radius / norm_sq.sqrt();
            alpha.iter_mut().for_each(|a| *a *= s);
            k_alpha.iter_mut().for_each(|a| *a *= s);
        }
        let err = hinge(labels, &k_alpha);
        best.iterations = it;
        if err < best.training_error {
            best.alpha.clone_from(&alpha);
            best.training_error = err;
            best.misclassified = misclassified(labels, &k_alpha);
        }
    }
    Ok(best)
}

/// Score `<alpha, kernel_row>` and its label.
pub fn svm_predict(model: &SvmModel, kernel_row: &[f64]) -> Result<(i8, f64)> {
    if kernel_row.len() != model.alpha.len() {
        return Err(Error::LengthMismatch {
            expected: model.alpha.len(),
            got: kernel_row.len(),
        });
    }
    let score = dot(&model.alpha, kernel_row);
    Ok((sign(score), score))
}
