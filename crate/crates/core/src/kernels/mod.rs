//! Kernels for parameter vectors (Dirichlet, pairwise Dirichlet, Gaussian)
//! and for classical shadows (closed form and finite truncation), with Gram
//! matrix assembly and standardization.

mod shadow;
mod vector;

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shadows::ClassicalShadow;

pub use shadow::{
    finite_shadow_kernel, finite_shadow_kernel_packed, shadow_kernel, shadow_kernel_log, shadow_kernel_log_bound,
    shadow_kernel_log_packed, shadow_trace, taylor_cutoffs, PackedShadow, SHADOW_TRACE_TABLE,
};
pub use vector::{
    default_gamma, dirichlet_kernel, enumerate_wavevectors, enumerate_wavevectors_with_cap, gaussian_kernel,
    pairwise_dirichlet_kernel, WavevectorSet, DEFAULT_WAVEVECTOR_CAP,
};

/// Kernel choice and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// l2-Dirichlet kernel with wavevector cutoff `cutoff`.
    Dirichlet { cutoff: f64 },
    /// Sum over ordered coordinate pairs of 2D Dirichlet kernels with a
    /// per-coordinate cutoff.
    PairwiseDirichlet {
        #[serde(default = "default_pair_cutoff")]
        cutoff: u32,
    },
    /// `exp(-gamma ||x - x'||^2)`; `None` picks the data-dependent default.
    Gaussian {
        #[serde(default)]
        gamma: Option<f64>,
    },
    /// Closed-form shadow kernel.
    Shadow {
        #[serde(default = "one")]
        tau: f64,
        #[serde(default = "one")]
        gamma: f64,
        /// Drop `t = t'` pairs in self-kernels on the Gram diagonal.
        #[serde(default = "yes")]
        exclude_equal_t_on_diagonal: bool,
    },
    /// Taylor-truncated shadow kernel with orders `d` and `r`.
    FiniteShadow { tau: f64, gamma: f64, d: usize, r: usize },
}

fn default_pair_cutoff() -> u32 {
    3
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl KernelSpec {
    pub fn name(&self) -> String {
        match self {
            KernelSpec::Dirichlet { cutoff } => format!("dirichlet(cutoff={cutoff})"),
            KernelSpec::PairwiseDirichlet { cutoff } => format!("pairwise_dirichlet(cutoff={cutoff})"),
            KernelSpec::Gaussian { gamma: Some(g) } => format!("gaussian(gamma={g})"),
            KernelSpec::Gaussian { gamma: None } => "gaussian(gamma=default)".into(),
            KernelSpec::Shadow { tau, gamma, .. } => format!("shadow(tau={tau},gamma={gamma})"),
            KernelSpec::FiniteShadow { tau, gamma, d, r } => {
                format!("finite_shadow(tau={tau},gamma={gamma},D={d},R={r})")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{}: {what}", self.name())));
        match *self {
            KernelSpec::Dirichlet { cutoff } if !(cutoff >= 0.0) => bad("cutoff must be nonnegative"),
            KernelSpec::Gaussian { gamma: Some(g) } if !(g > 0.0) => bad("gamma must be positive"),
            KernelSpec::Shadow { tau, gamma, .. } | KernelSpec::FiniteShadow { tau, gamma, .. }
                if !(tau > 0.0 && gamma > 0.0) =>
            {
                bad("tau and gamma must be positive")
            }
            _ => Ok(()),
        }
    }

    pub fn is_shadow_kernel(&self) -> bool {
        matches!(self, KernelSpec::Shadow { .. } | KernelSpec::FiniteShadow { .. })
    }

    /// Resolves data-dependent hyperparameters (the Gaussian default
    /// bandwidth) against training points.
    pub fn resolve(&self, points: &[Vec<f64>]) -> Result<KernelSpec> {
        self.validate()?;
        Ok(match self {
            KernelSpec::Gaussian { gamma: None } => KernelSpec::Gaussian {
                gamma: Some(default_gamma(points)?),
            },
            other => other.clone(),
        })
    }
}

/// A vector kernel ready for evaluation, with enumerated wavevectors where
/// needed.
#[derive(Clone, Debug)]
pub enum VectorKernel {
    Dirichlet(WavevectorSet),
    PairwiseDirichlet(u32),
    Gaussian(f64),
}

impl VectorKernel {
    /// Prepares a resolved spec for `m`-dimensional inputs.
    pub fn new(spec: &KernelSpec, m: usize) -> Result<Self> {
        spec.validate()?;
        match *spec {
            KernelSpec::Dirichlet { cutoff } => Ok(VectorKernel::Dirichlet(enumerate_wavevectors(m, cutoff)?)),
            KernelSpec::PairwiseDirichlet { cutoff } => Ok(VectorKernel::PairwiseDirichlet(cutoff)),
            KernelSpec::Gaussian { gamma: Some(g) } => Ok(VectorKernel::Gaussian(g)),
            KernelSpec::Gaussian { gamma: None } => Err(Error::InvalidParameter(
                "Gaussian bandwidth must be resolved against data first".into(),
            )),
            _ => Err(Error::UnsupportedKernel(spec.name())),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match self {
            VectorKernel::Dirichlet(wv) => dirichlet_kernel(x, y, wv),
            VectorKernel::PairwiseDirichlet(c) => pairwise_dirichlet_kernel(x, y, *c),
            VectorKernel::Gaussian(g) => gaussian_kernel(x, y, *g),
        }
    }

    /// `k(x, y) / sqrt(k(x, x) k(y, y))`.
    pub fn eval_normalized(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let kxy = self.eval(x, y)?;
        let kxx = self.eval(x, x)?;
        let kyy = self.eval(y, y)?;
        Ok(kxy / (kxx * kyy).sqrt())
    }
}

/// Symmetric kernel matrix. Shadow-kernel Grams also keep their entries in
/// log form so that standardization stays exact when values overflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
    #[serde(default)]
    log_values: Option<Vec<f64>>,
    pub standardized: bool,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
}

impl GramMatrix {
    pub fn from_values(n: usize, values: Vec<f64>, kernel: Option<KernelSpec>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self {
            n,
            values,
            log_values: None,
            standardized: false,
            kernel,
        })
    }

    pub fn from_log_values(n: usize, log_values: Vec<f64>, kernel: Option<KernelSpec>) -> Result<Self> {
        let values = log_values.iter().map(|v| v.exp()).collect();
        let mut g = Self::from_values(n, values, kernel)?;
        g.log_values = Some(log_values);
        Ok(g)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let values = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
        Self {
            n,
            values,
            log_values: None,
            standardized: false,
            kernel: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn log_get(&self, i: usize, j: usize) -> Option<f64> {
        self.log_values.as_ref().map(|l| l[i * self.n + j])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> Option<&[f64]> {
        self.log_values.as_deref()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Largest `|G_ij - G_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `idx` (rows and columns in the listed order).
    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix {
        let pick = |v: &Vec<f64>| -> Vec<f64> {
            idx.iter()
                .flat_map(|&i| idx.iter().map(move |&j| v[i * self.n + j]))
                .collect()
        };
        GramMatrix {
            n: idx.len(),
            values: pick(&self.values),
            log_values: self.log_values.as_ref().map(pick),
            standardized: self.standardized,
            kernel: self.kernel.clone(),
        }
    }

    /// Rows `rows` restricted to columns `cols`, as a dense matrix.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.get(rows[a], cols[b]))
    }
}

/// Gram matrix of a vector kernel over `points`, filled from the upper
/// triangle. Gaussian bandwidths left unset are resolved from `points`.
pub fn gram_vectors(points: &[Vec<f64>], spec: &KernelSpec) -> Result<GramMatrix> {
    let resolved = spec.resolve(points)?;
    let m = points.first().map_or(0, |p| p.len());
    let kernel = VectorKernel::new(&resolved, m)?;
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| kernel.eval(&points[i], &points[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    GramMatrix::from_values(n, values, Some(resolved))
}

/// Gram matrix of a shadow kernel. Off-diagonal entries use all `T^2`
/// snapshot pairs; the diagonal follows the spec's exclusion flag.
pub fn gram_shadows(shadows: &[ClassicalShadow], spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let packed: Vec<PackedShadow> = shadows.par_iter().map(PackedShadow::new).collect();
    let n = shadows.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| shadow_entry_log(&packed[i], &packed[j], spec, i == j))
        .collect::<Result<_>>()?;
    let mut logs = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(entries) {
        logs[i * n + j] = v;
        logs[j * n + i] = v;
    }
    GramMatrix::from_log_values(n, logs, Some(spec.clone()))
}

/// Log kernel values between `query` and each training shadow (off-diagonal
/// convention: all snapshot pairs).
pub fn shadow_kernel_row_log(train: &[PackedShadow], query: &PackedShadow, spec: &KernelSpec) -> Result<Vec<f64>> {
    train
        .par_iter()
        .map(|p| shadow_entry_log(p, query, spec, false))
        .collect()
}

/// Log self-kernel of a shadow with the diagonal convention of `spec`.
pub fn shadow_self_log(p: &PackedShadow, spec: &KernelSpec) -> Result<f64> {
    shadow_entry_log(p, p, spec, true)
}

fn shadow_entry_log(a: &PackedShadow, b: &PackedShadow, spec: &KernelSpec, diagonal: bool) -> Result<f64> {
    match *spec {
        KernelSpec::Shadow {
            tau,
            gamma,
            exclude_equal_t_on_diagonal,
        } => shadow_kernel_log_packed(a, b, tau, gamma, diagonal && exclude_equal_t_on_diagonal),
        KernelSpec::FiniteShadow { tau, gamma, d, r } => Ok(finite_shadow_kernel_packed(a, b, tau, gamma, d, r)?.ln()),
        _ => Err(Error::UnsupportedKernel(spec.name())),
    }
}

/// `K_ij / sqrt(K_ii K_jj)`; computed as `exp(L_ij - (L_ii + L_jj)/2)` when
/// log entries are available.
pub fn standardize(g: &GramMatrix) -> Result<GramMatrix> {
    let n = g.n;
    let values: Vec<f64> = match &g.log_values {
        Some(logs) => {
            for i in 0..n {
                if !logs[i * n + i].is_finite() {
                    return Err(Error::NonpositiveDiagonal(i));
                }
            }
            (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    if i == j {
                        1.0
                    } else {
                        (logs[k] - 0.5 * (logs[i * n + i] + logs[j * n + j])).exp()
                    }
                })
                .collect()
        }
        None => {
            for i in 0..n {
                if !(g.get(i, i) > 0.0) {
                    return Err(Error::NonpositiveDiagonal(i));
                }
            }
            (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    if i == j {
                        1.0
                    } else {
                        g.values[k] / (g.get(i, i) * g.get(j, j)).sqrt()
                    }
                })
                .collect()
        }
    };
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(format!(
            "standardized entry ({}, {}) overflows; lower the kernel hyperparameters",
            k / n,
            k % n
        )));
    }
    Ok(GramMatrix {
        n,
        values,
        log_values: None,
        standardized: true,
        kernel: g.kernel.clone(),
    })
}

/// Standardized kernel row of a query against training items, from log
/// values: `exp(L_q,l - (L_qq + L_ll)/2)`.
pub fn standardize_row_log(row_log: &[f64], query_self_log: f64, train_diag_log: &[f64]) -> Vec<f64> {
    row_log
        .iter()
        .zip(train_diag_log)
        .map(|(l, d)| (l - 0.5 * (query_self_log + d)).exp())
        .collect()
}

/// Writes the Gram matrix as a little-endian `u64` size header followed by
/// `N^2` `f64` entries in row-major order, plus a JSON sidecar at
/// `<path>.json` with the kernel spec and standardization flag.
pub fn write_gram(path: &Path, g: &GramMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 8 * g.values.len());
    bytes.extend_from_slice(&(g.n as u64).to_le_bytes());
    for v in &g.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = serde_json::json!({
        "n": g.n,
        "standardized": g.standardized,
        "kernel": g.kernel,
    });
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))?;
    Ok(())
}

/// Reads a Gram file written by [`write_gram`]; the sidecar is optional.
pub fn read_gram(path: &Path) -> Result<GramMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::InvalidParameter("Gram file shorter than its header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let expected = n.checked_mul(n).and_then(|v| v.checked_mul(8)).unwrap_or(usize::MAX);
    if bytes.len() - 8 != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: bytes.len() - 8,
        });
    }
    let values = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut g = GramMatrix::from_values(n, values, None)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    if let Ok(text) = std::fs::read_to_string(&side) {
        let meta: serde_json::Value = serde_json::from_str(&text)?;
        g.standardized = meta["standardized"].as_bool().unwrap_or(false);
        g.kernel = serde_json::from_value(meta["kernel"].clone()).ok();
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn single_item_gram() {
        let g = gram_vectors(&[vec![0.3]], &KernelSpec::Dirichlet { cutoff: 2.0 }).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.get(0, 0), 5.0);
        assert_eq!(standardize(&g).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn gaussian_gram_has_unit_diagonal() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.3 - 0.9, 0.1 * i as f64]).collect();
        let g = gram_vectors(&pts, &KernelSpec::Gaussian { gamma: None }).unwrap();
        assert!(g.diagonal().iter().all(|&d| d == 1.0));
        assert!(matches!(g.kernel, Some(KernelSpec::Gaussian { gamma: Some(_) })));
    }

    #[test]
    fn shadow_gram_survives_overflow() {
        let mut r = rng::stream(1, 0);
        let shadows: Vec<ClassicalShadow> = (0..5)
            .map(|_| ClassicalShadow::new(4, (0..4 * 6).map(|_| r.gen_range(0..6u8)).collect(), 0).unwrap())
            .collect();
        // tau large enough that raw values overflow
        let spec = KernelSpec::Shadow {
            tau: 10.0,
            gamma: 1.0,
            exclude_equal_t_on_diagonal: true,
        };
        let g = gram_shadows(&shadows, &spec).unwrap();
        assert_eq!(g.asymmetry(), 0.0);
        let s = standardize(&g).unwrap();
        assert!(s.values().iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(s.diagonal().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn standardize_reports_overflow() {
        // an off-diagonal log entry far above the diagonal ones
        let g = GramMatrix::from_log_values(2, vec![1.0, 2000.0, 2000.0, 1.0], None).unwrap();
        assert!(matches!(standardize(&g), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn standardize_rejects_bad_diagonal() {
        let g = GramMatrix::from_values(2, vec![1.0, 0.5, 0.5, 0.0], None).unwrap();
        assert!(matches!(standardize(&g), Err(Error::NonpositiveDiagonal(1))));
    }

    #[test]
    fn gram_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        let pts = vec![vec![0.1], vec![0.5], vec![-0.7]];
        let g = standardize(&gram_vectors(&pts, &KernelSpec::Gaussian { gamma: Some(2.0) }).unwrap()).unwrap();
        write_gram(&path, &g).unwrap();
        let back = read_gram(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 9 * 8);
    }

    #[test]
    fn kernel_spec_json() {
        let spec: KernelSpec = serde_json::from_str(r#"{"kind":"shadow"}"#).unwrap();
        assert_eq!(
            spec,
            KernelSpec::Shadow {
                tau: 1.0,
                gamma: 1.0,
                exclude_equal_t_on_diagonal: true
            }
        );
        assert!(KernelSpec::Gaussian { gamma: Some(-1.0) }.validate().is_err());
        assert!(matches!(VectorKernel::new(&spec, 2), Err(Error::UnsupportedKernel(_))));
    }

    proptest! {
        #[test]
        fn gaussian_gram_is_psd(seed: u64, n in 2usize..12, gamma in 0.1f64..5.0) {
            let mut r = rng::stream(seed, 0);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
            let g = gram_vectors(&pts, &KernelSpec::Gaussian { gamma: Some(gamma) }).unwrap();
            let ev = nalgebra::SymmetricEigen::new(g.to_matrix()).eigenvalues;
            prop_assert!(ev.iter().all(|&e| e >= -1e-8));
            prop_assert!(g.asymmetry() <= 1e-10);
        }
    }
}
