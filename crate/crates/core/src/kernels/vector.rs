//! Kernels over parameter vectors: the l2-Dirichlet kernel, its pairwise
//! variant, and the Gaussian kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of enumerated wavevectors.
pub const DEFAULT_WAVEVECTOR_CAP: usize = 10_000_000;

/// Integer wavevectors `k` with `||k||_2 <= cutoff`, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavevectorSet {
    pub m: usize,
    pub cutoff: f64,
    pub vectors: Vec<Vec<i32>>,
}

impl WavevectorSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Enumerates the lattice points of the `m`-ball of radius `cutoff`.
pub fn enumerate_wavevectors(m: usize, cutoff: f64) -> Result<WavevectorSet> {
    enumerate_wavevectors_with_cap(m, cutoff, DEFAULT_WAVEVECTOR_CAP)
}

pub fn enumerate_wavevectors_with_cap(m: usize, cutoff: f64, cap: usize) -> Result<WavevectorSet> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "wavevector dimension must be at least 1".into(),
        ));
    }
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} must be finite and nonnegative"
        )));
    }
    let r2 = cutoff * cutoff;
    let overflow = || Error::CountCapExceeded {
        m,
        cutoff,
        bound: ((2 * m + 1) as f64).powf(r2),
        cap,
    };
    // count first so that oversized requests fail before allocating
    let mut count = 0usize;
    let mut k = vec![0i32; m];
    if !dfs(&mut k, 0, r2, &mut |_| {
        count += 1;
        count <= cap
    }) {
        return Err(overflow());
    }
    let mut vectors = Vec::with_capacity(count);
    dfs(&mut k, 0, r2, &mut |v| {
        vectors.push(v.to_vec());
        true
    });
    Ok(WavevectorSet { m, cutoff, vectors })
}

/// Depth-first search over coordinates with residual-norm pruning. Returns
/// false if `visit` asked to stop.
fn dfs(k: &mut Vec<i32>, depth: usize, budget: f64, visit: &mut dyn FnMut(&[i32]) -> bool) -> bool {
    if depth == k.len() {
        return visit(k);
    }
    let lim = (budget + 1e-9).sqrt().floor() as i32;
    for v in -lim..=lim {
        let rest = budget - (v as f64) * (v as f64);
        if rest < -1e-9 {
            continue;
        }
        k[depth] = v;
        if !dfs(k, depth + 1, rest, visit) {
            return false;
        }
    }
    k[depth] = 0;
    true
}

fn check_dims(x: &[f64], y: &[f64], m: usize) -> Result<()> {
    for v in [x, y] {
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `sum_k cos(pi k . (x - x'))`.
pub fn dirichlet_kernel(x: &[f64], y: &[f64], wv: &WavevectorSet) -> Result<f64> {
    check_dims(x, y, wv.m)?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(dirichlet_from_diff(&diff, wv))
}

pub(crate) fn dirichlet_from_diff(diff: &[f64], wv: &WavevectorSet) -> f64 {
    wv.vectors
        .iter()
        .map(|k| {
            let phase: f64 = k.iter().zip(diff).map(|(&ki, d)| ki as f64 * d).sum();
            (std::f64::consts::PI * phase).cos()
        })
        .sum()
}

/// One-dimensional Dirichlet sum `sum_{|k| <= c} cos(pi k d)`.
fn dirichlet_1d(d: f64, cutoff: u32) -> f64 {
    1.0 + 2.0
        * (1..=cutoff)
            .map(|k| (std::f64::consts::PI * k as f64 * d).cos())
            .sum::<f64>()
}

/// `sum_{i != j} sum_{|k_i|,|k_j| <= c} cos(pi (k_i d_i + k_j d_j))`.
///
/// The inner double sum factorizes as `D(d_i) D(d_j)` because the sine
/// cross terms cancel over the symmetric ranges.
pub fn pairwise_dirichlet_kernel(x: &[f64], y: &[f64], cutoff: u32) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter("pairwise Dirichlet kernel needs m >= 2".into()));
    }
    check_dims(x, y, x.len())?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| dirichlet_1d(a - b, cutoff)).collect();
    let s: f64 = d.iter().sum();
    let s2: f64 = d.iter().map(|v| v * v).sum();
    Ok(s * s - s2)
}

/// `exp(-gamma ||x - x'||^2)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    check_dims(x, y, x.len())?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be positive")));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

/// `N^2 / sum_i sum_j ||x_i - x_j||^2`.
pub fn default_gamma(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    let mut total = 0.0;
    for a in points {
        for b in points {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: a.len(),
                    got: b.len(),
                });
            }
            total += a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
        }
    }
    if total == 0.0 {
        return Err(Error::DegenerateData("all points coincide".into()));
    }
    Ok((n * n) as f64 / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn brute_force_count(m: usize, cutoff: f64) -> usize {
        let c = cutoff.floor() as i32;
        let side = (2 * c + 1) as usize;
        (0..side.pow(m as u32))
            .filter(|&idx| {
                let mut r = idx;
                let mut norm = 0i64;
                for _ in 0..m {
                    let k = (r % side) as i64 - c as i64;
                    r /= side;
                    norm += k * k;
                }
                norm as f64 <= cutoff * cutoff + 1e-9
            })
            .count()
    }

    #[test]
    fn wavevector_examples() {
        let w = enumerate_wavevectors(1, 0.0).unwrap();
        assert_eq!(w.vectors, vec![vec![0]]);
        assert_eq!(enumerate_wavevectors(2, 3.0).unwrap().len(), 29);
        let w = enumerate_wavevectors(3, 1.0).unwrap();
        assert_eq!(w.len(), 7);
        for m in 1..=3 {
            for cut in [0.0, 0.5, 1.0, 1.5, 2.0, 2.3, 3.0, 4.0] {
                let w = enumerate_wavevectors(m, cut).unwrap();
                assert_eq!(w.len(), brute_force_count(m, cut), "m={m} cut={cut}");
                assert!((w.len() as f64) <= ((2 * m + 1) as f64).powf(cut * cut).max(1.0));
                let mut sorted = w.vectors.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted, w.vectors);
                for k in &w.vectors {
                    let neg: Vec<i32> = k.iter().map(|v| -v).collect();
                    assert!(w.vectors.binary_search(&neg).is_ok());
                }
            }
        }
    }

    #[test]
    fn wavevector_cap() {
        let err = enumerate_wavevectors_with_cap(3, 3.0, 10).unwrap_err();
        assert!(matches!(err, Error::CountCapExceeded { cap: 10, .. }));
        assert!(err.to_string().contains("(2m+1)^(cutoff^2)"));
    }

    #[test]
    fn dirichlet_examples() {
        let w = enumerate_wavevectors(1, 1.0).unwrap();
        assert!((dirichlet_kernel(&[0.5], &[-0.5], &w).unwrap() + 1.0).abs() < 1e-12);
        let w2 = enumerate_wavevectors(2, 3.0).unwrap();
        assert!((dirichlet_kernel(&[0.1, 0.2], &[0.1, 0.2], &w2).unwrap() - 29.0).abs() < 1e-12);
        assert!(matches!(
            dirichlet_kernel(&[0.1], &[0.1], &w2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pairwise_examples() {
        assert!((pairwise_dirichlet_kernel(&[0.3, 0.1], &[0.3, 0.1], 3).unwrap() - 98.0).abs() < 1e-12);
        assert!((pairwise_dirichlet_kernel(&[1.0, 1.0], &[0.0, 0.0], 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_kernel(&[0.2], &[0.2], 3.0).unwrap(), 1.0);
        assert!((default_gamma(&[vec![0.0], vec![2.0]]).unwrap() - 0.5).abs() < 1e-15);
        assert!((gaussian_kernel(&[0.0], &[2.0], 0.5).unwrap() - (-2.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            default_gamma(&[vec![1.0], vec![1.0]]),
            Err(Error::DegenerateData(_))
        ));
    }

    /// Direct evaluation of the pairwise sum over explicit wavevector pairs.
    fn pairwise_brute(x: &[f64], y: &[f64], c: i32) -> f64 {
        let m = x.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                for ki in -c..=c {
                    for kj in -c..=c {
                        let ph = ki as f64 * (x[i] - y[i]) + kj as f64 * (x[j] - y[j]);
                        total += (std::f64::consts::PI * ph).cos();
                    }
                }
            }
        }
        total
    }

    proptest! {
        #[test]
        fn dirichlet_is_real_part_of_exponential_sum(
            x in proptest::collection::vec(-1.0f64..1.0, 3),
            y in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let w = enumerate_wavevectors(3, 2.0).unwrap();
            let k = dirichlet_kernel(&x, &y, &w).unwrap();
            let mut z = Complex64::new(0.0, 0.0);
            for kv in &w.vectors {
                let ph: f64 = kv.iter().zip(x.iter().zip(&y)).map(|(&ki, (a, b))| ki as f64 * (a - b)).sum();
                z += Complex64::from_polar(1.0, std::f64::consts::PI * ph);
            }
            prop_assert!((z.re - k).abs() <= 1e-12 * w.len() as f64);
            prop_assert!((k - dirichlet_kernel(&y, &x, &w).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn pairwise_matches_brute_force(
            x in proptest::collection::vec(-1.0f64..1.0, 4),
            y in proptest::collection::vec(-1.0f64..1.0, 4),
            c in 0u32..4,
        ) {
            let fast = pairwise_dirichlet_kernel(&x, &y, c).unwrap();
            prop_assert!((fast - pairwise_brute(&x, &y, c as i32)).abs() <= 1e-9);
            prop_assert!((fast - pairwise_dirichlet_kernel(&y, &x, c).unwrap()).abs() <= 1e-12);
        }
    }
}
