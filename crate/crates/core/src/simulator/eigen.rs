//! Ground states by dense diagonalization (small) or restarted Lanczos with
//! full reorthogonalization (large).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use super::sparse::SparseMatrix;
use super::state::StateVector;
use super::{build_matrix_with_cap, default_dim_cap, HamiltonianSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, inner, norm_sqr, C64, ZERO};
use crate::rng;

#[derive(Clone, Debug)]
pub struct EigenConfig {
    /// Dense diagonalization below this dimension, Lanczos at or above.
    pub dense_threshold: usize,
    pub degeneracy_tol: f64,
    /// Krylov subspace size per Lanczos restart.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Relative residual target `||H v - E v|| <= tol * ||H||`.
    pub residual_tol: f64,
    pub dim_cap: Option<usize>,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            dense_threshold: 4096,
            degeneracy_tol: 1e-8,
            krylov_dim: 120,
            max_restarts: 60,
            residual_tol: 1e-11,
            dim_cap: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub state: StateVector,
    pub energy: f64,
    /// Second-lowest minus lowest eigenvalue.
    pub gap: f64,
    /// `gap < degeneracy_tol`; the state is then one vector of the ground space.
    pub degenerate: bool,
    /// `||H psi - E psi||`.
    pub residual: f64,
    /// Max-row-sum bound on `||H||`.
    pub norm_estimate: f64,
}

/// The numerically identified ground multiplet (eigenvalues within the
/// degeneracy tolerance of the lowest one). Its uniform mixture is the
/// zero-temperature limit of the Gibbs state.
#[derive(Clone, Debug)]
pub struct Multiplet {
    pub states: Vec<StateVector>,
    pub energies: Vec<f64>,
}

pub fn ground_state(spec: &HamiltonianSpec, degeneracy_tol: f64) -> Result<GroundStateResult> {
    ground_state_with(
        spec,
        &EigenConfig {
            degeneracy_tol,
            ..EigenConfig::default()
        },
    )
}

pub fn ground_state_with(spec: &HamiltonianSpec, cfg: &EigenConfig) -> Result<GroundStateResult> {
    let h = build_matrix_with_cap(spec, cfg.dim_cap.unwrap_or_else(|| default_dim_cap(spec.local_dim)))?;
    let norm_est = h.norm_estimate();
    let (energies, vectors) = lowest_eigenpairs(&h, 2, cfg, f64::INFINITY)?;
    let energy = energies[0];
    let gap = if energies.len() > 1 {
        (energies[1] - energy).max(0.0)
    } else {
        f64::INFINITY
    };
    let state = StateVector::new(spec.n, spec.local_dim, vectors.into_iter().next().unwrap())?;
    let hv = h.matvec(&state.amplitudes);
    let residual = hv
        .iter()
        .zip(&state.amplitudes)
        .map(|(a, b)| (a - b * energy).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(GroundStateResult {
        state,
        energy,
        gap,
        degenerate: gap < cfg.degeneracy_tol,
        residual,
        norm_estimate: norm_est,
    })
}

/// All eigenvectors whose eigenvalue lies within `cfg.degeneracy_tol` of the
/// ground energy, up to `max_multiplicity`.
pub fn ground_multiplet(spec: &HamiltonianSpec, cfg: &EigenConfig, max_multiplicity: usize) -> Result<Multiplet> {
    let h = build_matrix_with_cap(spec, cfg.dim_cap.unwrap_or_else(|| default_dim_cap(spec.local_dim)))?;
    let (energies, vectors) = lowest_eigenpairs(&h, max_multiplicity.max(1), cfg, cfg.degeneracy_tol)?;
    let states = vectors
        .into_iter()
        .map(|v| StateVector::new(spec.n, spec.local_dim, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Multiplet { states, energies })
}

/// Lowest `count` eigenpairs, stopping early once an eigenvalue exceeds
/// `E0 + window`.
fn lowest_eigenpairs(
    h: &SparseMatrix,
    count: usize,
    cfg: &EigenConfig,
    window: f64,
) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let dim = h.dim();
    let count = count.min(dim);
    if dim < cfg.dense_threshold {
        let (vals, vecs) = dense_eigen(h);
        let mut energies = Vec::new();
        let mut vectors = Vec::new();
        for (k, (e, v)) in vals.into_iter().zip(vecs).enumerate() {
            if k >= count || (k > 0 && e > energies[0] + window) {
                break;
            }
            energies.push(e);
            vectors.push(v);
        }
        return Ok((energies, vectors));
    }

    let norm_est = h.norm_estimate().max(1e-300);
    let shift = 2.0 * norm_est + 1.0;
    let mut energies: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<C64>> = Vec::new();
    for k in 0..count {
        let found = vectors.clone();
        let apply = |v: &[C64], out: &mut [C64]| {
            h.matvec_into(v, out);
            for u in &found {
                let p = inner(u, v) * c(shift, 0.0);
                for (o, ui) in out.iter_mut().zip(u) {
                    *o += p * ui;
                }
            }
        };
        let mut start = random_start(dim, k as u64);
        for u in &vectors {
            project_out(&mut start, u);
        }
        let (e, v) = lanczos_lowest(&apply, dim, start, norm_est + shift * k as f64, cfg)?;
        if k > 0 && e > energies[0] + window {
            break;
        }
        energies.push(e);
        vectors.push(v);
    }
    Ok((energies, vectors))
}

fn dense_eigen(h: &SparseMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    let dim = h.dim();
    let mut pairs: Vec<(f64, Vec<C64>)> = if h.is_real() {
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (r, col, v) in h.entries() {
            m[(r, col)] = v.re;
        }
        let eig = SymmetricEigen::new(m);
        (0..dim)
            .map(|k| {
                (
                    eig.eigenvalues[k],
                    eig.eigenvectors.column(k).iter().map(|&x| c(x, 0.0)).collect(),
                )
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(h.to_dense());
        (0..dim)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
            .collect()
    };
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn random_start(dim: usize, salt: u64) -> Vec<C64> {
    let mut r = rng::stream(0x1a2c_2057_a7e5_u64, salt);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| c(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = norm_sqr(v).sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn project_out(v: &mut [C64], u: &[C64]) {
    let p = inner(u, v);
    for (x, ui) in v.iter_mut().zip(u) {
        *x -= p * ui;
    }
}

/// Lowest eigenpair of the Hermitian operator `apply` by explicitly restarted
/// Lanczos with full reorthogonalization.
pub(crate) fn lanczos_lowest(
    apply: &dyn Fn(&[C64], &mut [C64]),
    dim: usize,
    start: Vec<C64>,
    norm_est: f64,
    cfg: &EigenConfig,
) -> Result<(f64, Vec<C64>)> {
    let m = cfg.krylov_dim.min(dim).max(2);
    let mut x = start;
    normalize(&mut x);
    let mut w = vec![ZERO; dim];
    let mut last_residual = f64::INFINITY;
    for _ in 0..cfg.max_restarts {
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = inner(&basis[j], &w).re;
            alphas.push(a);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * a;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b;
                }
            }
            for _ in 0..2 {
                for v in &basis {
                    project_out(&mut w, v);
                }
            }
            let b = norm_sqr(&w).sqrt();
            betas.push(b);
            if basis.len() >= m || b <= 1e-13 * norm_est {
                break;
            }
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let y: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
        let mut ritz = vec![ZERO; dim];
        for (coef, v) in y.iter().zip(&basis) {
            for (r, vi) in ritz.iter_mut().zip(v) {
                *r += vi * *coef;
            }
        }
        normalize(&mut ritz);
        apply(&ritz, &mut w);
        let energy = inner(&ritz, &w).re;
        let residual = w
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - b * energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        last_residual = residual;
        x = ritz;
        if residual <= cfg.residual_tol * norm_est {
            return Ok((energy, x));
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: cfg.max_restarts * m,
        residual: last_residual,
    })
}
