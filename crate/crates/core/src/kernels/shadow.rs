//! The shadow kernel and its finite Taylor truncation.
//!
//! Per qubit, `Tr(sigma sigma~) = 9 |<s|s~>|^2 - 4` takes only three values:
//! 5 for equal symbols, -4 for opposite outcomes in the same basis and 1/2
//! for different bases. Each snapshot is therefore packed into basis and
//! outcome bitmasks, and a snapshot pair is summarized by two popcounts:
//! `same` (qubits measured in the same basis) and `eq` (of those, equal
//! outcomes). A kernel evaluation histograms these pairs and sums the
//! exponentials once per histogram cell, in a fixed order.

use crate::error::{Error, Result};
use crate::shadows::{ClassicalShadow, SnapshotSymbol};

/// `9 |<s|s~>|^2 - 4` for every symbol pair.
pub const SHADOW_TRACE_TABLE: [[f64; 6]; 6] = {
    let mut t = [[0.0; 6]; 6];
    let mut a = 0;
    while a < 6 {
        let mut b = 0;
        while b < 6 {
            t[a][b] = if a == b {
                5.0
            } else if a / 2 == b / 2 {
                -4.0
            } else {
                0.5
            };
            b += 1;
        }
        a += 1;
    }
    t
};

pub fn shadow_trace(s: SnapshotSymbol, t: SnapshotSymbol) -> f64 {
    SHADOW_TRACE_TABLE[s as usize][t as usize]
}

/// Bitmask form of a shadow: per snapshot and 64-qubit word, the masks of
/// qubits measured in Z, X and Y and the mask of `-1` outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedShadow {
    n: usize,
    t: usize,
    words: usize,
    data: Vec<[u64; 4]>,
}

impl PackedShadow {
    pub fn new(shadow: &ClassicalShadow) -> Self {
        let n = shadow.n();
        let t = shadow.num_snapshots();
        let words = n.div_ceil(64);
        let mut data = vec![[0u64; 4]; t * words];
        for k in 0..t {
            for (i, &s) in shadow.snapshot(k).iter().enumerate() {
                let cell = &mut data[k * words + i / 64];
                let bit = 1u64 << (i % 64);
                cell[(s / 2) as usize] |= bit;
                if s % 2 == 1 {
                    cell[3] |= bit;
                }
            }
        }
        Self { n, t, words, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_snapshots(&self) -> usize {
        self.t
    }

    fn snapshot(&self, k: usize) -> &[[u64; 4]] {
        &self.data[k * self.words..(k + 1) * self.words]
    }
}

/// `(same, eq)` popcounts of a snapshot pair.
#[inline]
fn pair_counts(a: &[[u64; 4]], b: &[[u64; 4]]) -> (usize, usize) {
    let mut same = 0;
    let mut eq = 0;
    for (x, y) in a.iter().zip(b) {
        let s = (x[0] & y[0]) | (x[1] & y[1]) | (x[2] & y[2]);
        same += s.count_ones() as usize;
        eq += (s & !(x[3] ^ y[3])).count_ones() as usize;
    }
    (same, eq)
}

/// Histogram over `(same, eq)` of snapshot pairs, row-major in `same`.
struct PairHistogram {
    n: usize,
    counts: Vec<u64>,
    pairs: u64,
}

impl PairHistogram {
    fn build(a: &PackedShadow, b: &PackedShadow, exclude_equal_t: bool) -> Result<Self> {
        if a.n != b.n || a.t != b.t {
            return Err(Error::ShapeMismatch(a.n, a.t, b.n, b.t));
        }
        if a.t == 0 {
            return Err(Error::EmptyShadow);
        }
        if exclude_equal_t && a.t < 2 {
            return Err(Error::NeedTwoSnapshots);
        }
        let n = a.n;
        let mut counts = vec![0u64; (n + 1) * (n + 1)];
        for t in 0..a.t {
            let sa = a.snapshot(t);
            for u in 0..b.t {
                if exclude_equal_t && t == u {
                    continue;
                }
                let (same, eq) = pair_counts(sa, b.snapshot(u));
                counts[same * (n + 1) + eq] += 1;
            }
        }
        let pairs = if exclude_equal_t {
            (a.t * (a.t - 1)) as u64
        } else {
            (a.t * b.t) as u64
        };
        Ok(Self { n, counts, pairs })
    }

    /// `sum_i Tr(sigma_i sigma~_i)` for a cell.
    fn trace_sum(&self, same: usize, eq: usize) -> f64 {
        5.0 * eq as f64 - 4.0 * (same - eq) as f64 + 0.5 * (self.n - same) as f64
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.n;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(idx, &c)| {
                let (same, eq) = (idx / (n + 1), idx % (n + 1));
                (c as f64, self.trace_sum(same, eq))
            })
    }
}

fn check_hyper(tau: f64, gamma: f64) -> Result<()> {
    if !(tau > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau={tau}, gamma={gamma} must be positive"
        )));
    }
    Ok(())
}

/// `log k(S, S~) = (tau / Z) sum_{t,t'} exp((gamma / n) sum_i Tr(sigma_i^(t) sigma~_i^(t')))`,
/// with `Z = T^2`, or `T (T - 1)` when equal snapshot indices are excluded.
pub fn shadow_kernel_log_packed(
    a: &PackedShadow,
    b: &PackedShadow,
    tau: f64,
    gamma: f64,
    exclude_equal_t: bool,
) -> Result<f64> {
    check_hyper(tau, gamma)?;
    let h = PairHistogram::build(a, b, exclude_equal_t)?;
    let scale = gamma / h.n as f64;
    let sum: f64 = h.cells().map(|(count, tr)| count * (scale * tr).exp()).sum();
    Ok(tau * sum / h.pairs as f64)
}

pub fn shadow_kernel_log(
    a: &ClassicalShadow,
    b: &ClassicalShadow,
    tau: f64,
    gamma: f64,
    exclude_equal_t: bool,
) -> Result<f64> {
    shadow_kernel_log_packed(
        &PackedShadow::new(a),
        &PackedShadow::new(b),
        tau,
        gamma,
        exclude_equal_t,
    )
}

/// Closed-form shadow kernel. Overflows to `+inf` once the log exceeds ~709;
/// use [`shadow_kernel_log`] for comparisons.
pub fn shadow_kernel(
    a: &ClassicalShadow,
    b: &ClassicalShadow,
    tau: f64,
    gamma: f64,
    exclude_equal_t: bool,
) -> Result<f64> {
    Ok(shadow_kernel_log(a, b, tau, gamma, exclude_equal_t)?.exp())
}

/// Upper bound `tau * exp(5 gamma)` on the log kernel.
pub fn shadow_kernel_log_bound(tau: f64, gamma: f64) -> f64 {
    tau * (5.0 * gamma).exp()
}

/// `sum_{d<=D} (1/d!) ((tau/T^2) sum_{t,t'} sum_{r<=R} (1/r!) z_{tt'}^r)^d` with
/// `z_{tt'} = (gamma/n) sum_i Tr(sigma_i^(t) sigma~_i^(t'))`.
pub fn finite_shadow_kernel(
    a: &ClassicalShadow,
    b: &ClassicalShadow,
    tau: f64,
    gamma: f64,
    d_max: usize,
    r_max: usize,
) -> Result<f64> {
    finite_shadow_kernel_packed(&PackedShadow::new(a), &PackedShadow::new(b), tau, gamma, d_max, r_max)
}

pub fn finite_shadow_kernel_packed(
    a: &PackedShadow,
    b: &PackedShadow,
    tau: f64,
    gamma: f64,
    d_max: usize,
    r_max: usize,
) -> Result<f64> {
    check_hyper(tau, gamma)?;
    let h = PairHistogram::build(a, b, false)?;
    let scale = gamma / h.n as f64;
    let inner_sum: f64 = h
        .cells()
        .map(|(count, tr)| count * truncated_exp(scale * tr, r_max))
        .sum();
    let inner = tau * inner_sum / h.pairs as f64;
    Ok(truncated_exp(inner, d_max))
}

/// `sum_{k<=order} z^k / k!`.
fn truncated_exp(z: f64, order: usize) -> f64 {
    let mut term = 1.0;
    let mut total = 1.0;
    for k in 1..=order {
        term *= z / k as f64;
        total += term;
    }
    total
}

/// Truncation orders `(D, R)` that bring the finite kernel within `2 eta` of
/// the closed form: `D = e^2 tau e^{5 gamma} + ln(1/eta) - 1` and
/// `R = 5 e^2 gamma + tau e^{5 gamma} + ln(tau/eta) - 1`, rounded up.
pub fn taylor_cutoffs(tau: f64, gamma: f64, eta: f64) -> (usize, usize) {
    let e2 = std::f64::consts::E.powi(2);
    let big = tau * (5.0 * gamma).exp();
    let d = e2 * big + (1.0 / eta).ln() - 1.0;
    let r = 5.0 * e2 * gamma + big + (tau / eta).ln() - 1.0;
    (d.max(0.0).ceil() as usize, r.max(0.0).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_shadow(n: usize, t: usize, seed: u64) -> ClassicalShadow {
        let mut r = rng::stream(seed, 0);
        ClassicalShadow::new(n, (0..n * t).map(|_| r.gen_range(0..6u8)).collect(), seed).unwrap()
    }

    /// Direct `O(n T^2)` evaluation through the symbol table.
    fn naive_log(a: &ClassicalShadow, b: &ClassicalShadow, tau: f64, gamma: f64, excl: bool) -> f64 {
        let n = a.n();
        let t = a.num_snapshots();
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..t {
            for j in 0..t {
                if excl && i == j {
                    continue;
                }
                let s: f64 = (0..n)
                    .map(|q| SHADOW_TRACE_TABLE[a.snapshot(i)[q] as usize][b.snapshot(j)[q] as usize])
                    .sum();
                total += (gamma / n as f64 * s).exp();
                pairs += 1.0;
            }
        }
        tau * total / pairs
    }

    #[test]
    fn trace_table_matches_overlaps() {
        for s in SnapshotSymbol::ALL {
            for t in SnapshotSymbol::ALL {
                let (u, v) = (s.state(), t.state());
                let ov = u[0].conj() * v[0] + u[1].conj() * v[1];
                let expect = 9.0 * ov.norm_sqr() - 4.0;
                assert!((shadow_trace(s, t) - expect).abs() < 1e-12);
                assert!([-4.0, 0.5, 5.0].contains(&shadow_trace(s, t)));
            }
        }
        assert_eq!(shadow_trace(SnapshotSymbol::ZPlus, SnapshotSymbol::ZPlus), 5.0);
        assert_eq!(shadow_trace(SnapshotSymbol::ZPlus, SnapshotSymbol::ZMinus), -4.0);
        assert_eq!(shadow_trace(SnapshotSymbol::ZPlus, SnapshotSymbol::XPlus), 0.5);
    }

    #[test]
    fn kernel_examples() {
        let s = ClassicalShadow::new(3, vec![0, 2, 5], 0).unwrap();
        let k = shadow_kernel(&s, &s, 1.0, 1.0, false).unwrap();
        assert!((k.ln() - 5f64.exp()).abs() < 1e-9);

        let a = ClassicalShadow::new(3, vec![0, 2, 4], 0).unwrap();
        let b = ClassicalShadow::new(3, vec![1, 3, 5], 0).unwrap();
        let k = shadow_kernel(&a, &b, 1.0, 1.0, false).unwrap();
        assert!((k - (-4f64).exp().exp()).abs() < 1e-12);
        assert!((k - 1.01848).abs() < 1e-5);

        assert!(matches!(
            shadow_kernel(&a, &b, 1.0, 1.0, true),
            Err(Error::NeedTwoSnapshots)
        ));
        let c = ClassicalShadow::new(2, vec![0, 0], 0).unwrap();
        assert!(matches!(
            shadow_kernel(&a, &c, 1.0, 1.0, false),
            Err(Error::ShapeMismatch(3, 1, 2, 1))
        ));
    }

    #[test]
    fn finite_kernel_limits() {
        let a = random_shadow(6, 3, 1);
        let b = random_shadow(6, 3, 2);
        assert_eq!(finite_shadow_kernel(&a, &b, 1.0, 1.0, 0, 5).unwrap(), 1.0);
        let closed = shadow_kernel(&a, &b, 1.0, 1.0, false).unwrap();
        let fin = finite_shadow_kernel(&a, &b, 1.0, 1.0, 64, 64).unwrap();
        assert!((fin - closed).abs() <= 1e-6);
        let (d, r) = taylor_cutoffs(1.0, 1.0, 1e-3);
        assert_eq!((d, r), (1103, 192));
    }

    #[test]
    fn packing_handles_multiword_shadows() {
        let a = random_shadow(130, 7, 3);
        let b = random_shadow(130, 7, 4);
        for excl in [false, true] {
            let fast = shadow_kernel_log(&a, &b, 0.7, 0.3, excl).unwrap();
            let slow = naive_log(&a, &b, 0.7, 0.3, excl);
            assert!((fast - slow).abs() <= 1e-12 * slow.abs());
        }
    }

    #[test]
    fn truncation_error_shrinks_with_order() {
        let a = random_shadow(6, 4, 5);
        let b = random_shadow(6, 4, 6);
        let closed = shadow_kernel(&a, &b, 1.0, 1.0, false).unwrap();
        let mut prev = f64::INFINITY;
        for d in 0..30 {
            let err = (finite_shadow_kernel(&a, &b, 1.0, 1.0, d, 80).unwrap() - closed).abs();
            assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    proptest! {
        #[test]
        fn kernel_matches_naive_and_is_symmetric(
            sa in proptest::collection::vec(0u8..6, 5 * 4),
            sb in proptest::collection::vec(0u8..6, 5 * 4),
            tau in 0.1f64..2.0,
            gamma in 0.1f64..2.0,
        ) {
            let a = ClassicalShadow::new(5, sa, 0).unwrap();
            let b = ClassicalShadow::new(5, sb, 0).unwrap();
            let ab = shadow_kernel_log(&a, &b, tau, gamma, false).unwrap();
            let ba = shadow_kernel_log(&b, &a, tau, gamma, false).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((ab - naive_log(&a, &b, tau, gamma, false)).abs() <= 1e-12 * ab.abs());
            prop_assert!(ab > 0.0 && ab <= shadow_kernel_log_bound(tau, gamma) * (1.0 + 1e-12));
            let aa = shadow_kernel_log(&a, &a, tau, gamma, true).unwrap();
            prop_assert!((aa - naive_log(&a, &a, tau, gamma, true)).abs() <= 1e-12 * aa.abs());
        }

        #[test]
        fn finite_kernel_is_monotone_for_positive_arguments(
            d in 0usize..20,
            r in 0usize..20,
        ) {
            // identical single-snapshot shadows: every inner argument is 5 gamma > 0
            let a = ClassicalShadow::new(4, vec![0, 1, 2, 3], 0).unwrap();
            let base = finite_shadow_kernel(&a, &a, 0.5, 0.2, d, r).unwrap();
            prop_assert!(finite_shadow_kernel(&a, &a, 0.5, 0.2, d + 1, r).unwrap() >= base);
            prop_assert!(finite_shadow_kernel(&a, &a, 0.5, 0.2, d, r + 1).unwrap() >= base);
        }
    }
}
