//! Classical shadows of randomized single-qubit Pauli measurements: storage,
//! snapshot reconstruction, reduced density matrices and factorized
//! observable estimates.

mod io;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{c, identity2, kron, trace_norm, CMatrix, CMatrix2, C64, ONE, ZERO};
use crate::simulator::Pauli;

pub use io::{deserialize, read_shadow, serialize, write_shadow, HEADER_LEN, MAGIC, VERSION};

/// Default cap on the subsystem size for shadow estimators.
pub const DEFAULT_SUBSYSTEM_CAP: usize = 6;

/// Post-measurement single-qubit stabilizer state. The discriminants are the
/// on-disk byte values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SnapshotSymbol {
    ZPlus = 0,
    ZMinus = 1,
    XPlus = 2,
    XMinus = 3,
    YPlus = 4,
    YMinus = 5,
}

impl SnapshotSymbol {
    pub const ALL: [SnapshotSymbol; 6] = [
        SnapshotSymbol::ZPlus,
        SnapshotSymbol::ZMinus,
        SnapshotSymbol::XPlus,
        SnapshotSymbol::XMinus,
        SnapshotSymbol::YPlus,
        SnapshotSymbol::YMinus,
    ];

    pub fn from_u8(b: u8) -> Result<Self> {
        Self::ALL.get(b as usize).copied().ok_or(Error::InvalidSymbol(b))
    }

    pub fn from_parts(basis: Pauli, bit: u8) -> Self {
        Self::ALL[(basis as usize) * 2 + (bit & 1) as usize]
    }

    pub fn basis(self) -> Pauli {
        Pauli::from_index(self as u8 / 2)
    }

    /// `0` for the `+1` eigenstate, `1` for `-1`.
    pub fn bit(self) -> u8 {
        self as u8 % 2
    }

    /// The unit vector `|s>`.
    pub fn state(self) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            SnapshotSymbol::ZPlus => [ONE, ZERO],
            SnapshotSymbol::ZMinus => [ZERO, ONE],
            SnapshotSymbol::XPlus => [c(h, 0.0), c(h, 0.0)],
            SnapshotSymbol::XMinus => [c(h, 0.0), c(-h, 0.0)],
            SnapshotSymbol::YPlus => [c(h, 0.0), c(0.0, h)],
            SnapshotSymbol::YMinus => [c(h, 0.0), c(0.0, -h)],
        }
    }
}

/// `3 |s><s| - I`.
pub fn snapshot_matrix(s: SnapshotSymbol) -> CMatrix2 {
    let v = s.state();
    let mut m = CMatrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = v[i] * v[j].conj() * 3.0;
        }
    }
    m - identity2()
}

fn snapshot_table() -> [CMatrix2; 6] {
    SnapshotSymbol::ALL.map(snapshot_matrix)
}

/// Randomized-measurement record: `T` snapshots of `n` qubits, stored one
/// byte per entry in snapshot-major order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClassicalShadow {
    n: usize,
    symbols: Vec<u8>,
    seed: u64,
}

impl ClassicalShadow {
    /// Wraps raw symbols (`symbols[t * n + i]` is qubit `i` of snapshot `t`).
    pub fn new(n: usize, symbols: Vec<u8>, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("shadow must have at least one qubit".into()));
        }
        if !symbols.len().is_multiple_of(n) {
            return Err(Error::LengthMismatch {
                expected: symbols.len().div_ceil(n) * n,
                got: symbols.len(),
            });
        }
        if let Some(&b) = symbols.iter().find(|&&b| b > 5) {
            return Err(Error::InvalidSymbol(b));
        }
        Ok(Self { n, symbols, seed })
    }

    pub fn from_symbols(n: usize, snapshots: &[Vec<SnapshotSymbol>], seed: u64) -> Result<Self> {
        let mut symbols = Vec::with_capacity(n * snapshots.len());
        for row in snapshots {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            symbols.extend(row.iter().map(|&s| s as u8));
        }
        Self::new(n, symbols, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_snapshots(&self) -> usize {
        self.symbols.len() / self.n
    }

    /// Seed the shadow was sampled with (0 if unknown).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn snapshot(&self, t: usize) -> &[u8] {
        &self.symbols[t * self.n..(t + 1) * self.n]
    }

    pub fn symbol(&self, t: usize, qubit: usize) -> SnapshotSymbol {
        SnapshotSymbol::ALL[self.symbols[t * self.n + qubit] as usize]
    }

    /// The first `t` snapshots.
    pub fn truncated(&self, t: usize) -> Self {
        let t = t.min(self.num_snapshots());
        Self {
            n: self.n,
            symbols: self.symbols[..t * self.n].to_vec(),
            seed: self.seed,
        }
    }

    /// Snapshots `range` as a new shadow.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            n: self.n,
            symbols: self.symbols[range.start * self.n..range.end * self.n].to_vec(),
            seed: self.seed,
        }
    }
}

/// Complex Hermitian matrix, possibly a shadow estimate that is not PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `||self - other||_1` (sum of absolute eigenvalues of the difference).
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(trace_norm(&(&self.matrix - &other.matrix)))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        crate::linalg::hermiticity_defect(&self.matrix)
    }

    /// Nearest PSD unit-trace matrix by eigenvalue clipping.
    pub fn psd_project(&self) -> DensityMatrix {
        DensityMatrix::new(crate::linalg::psd_project(&self.matrix))
    }

    /// Partial trace onto the sites in `keep`, given that this matrix lives on
    /// `sites` sites of local dimension `local_dim` (tensor order as listed).
    pub fn partial_trace(&self, local_dim: usize, sites: usize, keep: &[usize]) -> Result<DensityMatrix> {
        let dim = local_dim.pow(sites as u32);
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        if keep.iter().any(|&k| k >= sites) {
            return Err(Error::InvalidSubsystem(format!("{keep:?} on {sites} sites")));
        }
        let env: Vec<usize> = (0..sites).filter(|s| !keep.contains(s)).collect();
        let dk = local_dim.pow(keep.len() as u32);
        let de = local_dim.pow(env.len() as u32);
        let compose = |ks: &[usize], kd: &[usize], es: &[usize], ed: &[usize]| -> usize {
            let mut d = vec![0; sites];
            for (s, v) in ks.iter().zip(kd) {
                d[*s] = *v;
            }
            for (s, v) in es.iter().zip(ed) {
                d[*s] = *v;
            }
            d.iter().fold(0, |acc, &x| acc * local_dim + x)
        };
        let split = |idx: usize, n: usize| -> Vec<usize> {
            let mut d = vec![0; n];
            let mut r = idx;
            for s in (0..n).rev() {
                d[s] = r % local_dim;
                r /= local_dim;
            }
            d
        };
        let mut out = CMatrix::zeros(dk, dk);
        for a in 0..dk {
            let ad = split(a, keep.len());
            for b in 0..dk {
                let bd = split(b, keep.len());
                let mut acc = ZERO;
                for e in 0..de {
                    let ed = split(e, env.len());
                    acc += self.matrix[(compose(keep, &ad, &env, &ed), compose(keep, &bd, &env, &ed))];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix::new(out))
    }
}

fn check_subsystem(n: usize, sites: &[usize], cap: usize) -> Result<()> {
    if sites.len() > cap {
        return Err(Error::SubsystemTooLarge { size: sites.len(), cap });
    }
    for (k, &s) in sites.iter().enumerate() {
        if s >= n || sites[..k].contains(&s) {
            return Err(Error::InvalidSubsystem(format!("{sites:?} on {n} qubits")));
        }
    }
    Ok(())
}

/// `(1/T) sum_t (x)_{i in subsystem} (3 |s_i^(t)><s_i^(t)| - I)`.
pub fn shadow_rdm(shadow: &ClassicalShadow, subsystem: &[usize]) -> Result<DensityMatrix> {
    check_subsystem(shadow.n(), subsystem, DEFAULT_SUBSYSTEM_CAP)?;
    let t = shadow.num_snapshots();
    if t == 0 {
        return Err(Error::EmptyShadow);
    }
    // count each symbol pattern, then build one tensor product per pattern
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for k in 0..t {
        let row = shadow.snapshot(k);
        let key = subsystem.iter().fold(0u64, |acc, &i| acc * 6 + row[i] as u64);
        *counts.entry(key).or_default() += 1;
    }
    let table = snapshot_table();
    let dim = 1usize << subsystem.len();
    let mut patterns: Vec<_> = counts.into_iter().collect();
    patterns.sort_unstable();
    let mut rho = CMatrix::zeros(dim, dim);
    for (key, count) in patterns {
        let mut syms = vec![0usize; subsystem.len()];
        let mut r = key;
        for s in syms.iter_mut().rev() {
            *s = (r % 6) as usize;
            r /= 6;
        }
        let mut prod = CMatrix::from_element(1, 1, ONE);
        for &s in &syms {
            prod = kron(&prod, &crate::linalg::to_dynamic(&table[s]));
        }
        rho += prod * c(count as f64, 0.0);
    }
    rho /= c(t as f64, 0.0);
    Ok(DensityMatrix::new(rho))
}

/// Tensor-product observable `coefficient * (x)_i O_i` given as `(site, O_i)` factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductTerm {
    pub factors: Vec<(usize, CMatrix2)>,
    pub coefficient: f64,
}

impl ProductTerm {
    pub fn new(factors: Vec<(usize, CMatrix2)>, coefficient: f64) -> Self {
        Self { factors, coefficient }
    }
}

/// `Tr(O s)` for every symbol.
fn factor_table(o: &CMatrix2) -> [f64; 6] {
    snapshot_table().map(|s| (o * s).trace().re)
}

/// `(1/T) sum_t prod_i Tr(O_i sigma_i^(t))`.
pub fn estimate_product_observable(shadow: &ClassicalShadow, factors: &[(usize, CMatrix2)]) -> Result<f64> {
    let sites: Vec<usize> = factors.iter().map(|f| f.0).collect();
    check_subsystem(shadow.n(), &sites, DEFAULT_SUBSYSTEM_CAP)?;
    let t = shadow.num_snapshots();
    if t == 0 {
        return Err(Error::EmptyShadow);
    }
    let tables: Vec<(usize, [f64; 6])> = factors.iter().map(|(s, o)| (*s, factor_table(o))).collect();
    let mut total = 0.0;
    for k in 0..t {
        let row = shadow.snapshot(k);
        let mut p = 1.0;
        for (s, tab) in &tables {
            p *= tab[row[*s] as usize];
        }
        total += p;
    }
    Ok(total / t as f64)
}

/// `sum_j c_j * estimate_product_observable(shadow, factors_j)`.
pub fn estimate_observable_sum(shadow: &ClassicalShadow, terms: &[ProductTerm]) -> Result<f64> {
    let mut total = 0.0;
    for term in terms {
        if term.coefficient != 0.0 {
            total += term.coefficient * estimate_product_observable(shadow, &term.factors)?;
        }
    }
    Ok(total)
}

/// Snapshot count sufficient for every `r`-body reduced density matrix of an
/// `n`-qubit state to lie within trace distance `eps` with probability at
/// least `1 - delta`: `(8/3) 12^r (r (ln n + ln 12) + ln(1/delta)) / eps^2`.
pub fn rdm_shadow_size(n: usize, r: usize, eps: f64, delta: f64) -> usize {
    let n = n.max(1) as f64;
    let r_f = r as f64;
    let bound = (8.0 / 3.0) * 12f64.powi(r as i32) * (r_f * (n.ln() + 12f64.ln()) + (1.0 / delta).ln()) / (eps * eps);
    bound.ceil() as usize
}

/// Single-qubit Pauli matrix for a basis label.
pub fn pauli_matrix(p: Pauli) -> CMatrix2 {
    match p {
        Pauli::Z => crate::linalg::pauli_z(),
        Pauli::X => crate::linalg::pauli_x(),
        Pauli::Y => crate::linalg::pauli_y(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, pauli_x, pauli_y, pauli_z, to_dynamic};
    use crate::simulator::{exact_expectation, exact_rdm, sample_shadow, LocalTerm, StateVector};
    use proptest::prelude::*;

    fn close(a: &CMatrix2, b: &CMatrix2, tol: f64) -> bool {
        (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn snapshot_matrix_examples() {
        let zp = snapshot_matrix(SnapshotSymbol::ZPlus);
        assert!(close(&zp, &CMatrix2::new(c(2.0, 0.0), ZERO, ZERO, c(-1.0, 0.0)), 1e-15));
        let xp = snapshot_matrix(SnapshotSymbol::XPlus);
        let expect = CMatrix2::new(c(0.5, 0.0), c(1.5, 0.0), c(1.5, 0.0), c(0.5, 0.0));
        assert!(close(&xp, &expect, 1e-15));
        for s in SnapshotSymbol::ALL {
            let m = snapshot_matrix(s);
            assert!((m.trace() - ONE).norm() < 1e-15);
            let ev = hermitian_eigenvalues(&to_dynamic(&m));
            assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn symbol_encoding_order() {
        for (k, s) in SnapshotSymbol::ALL.iter().enumerate() {
            assert_eq!(*s as usize, k);
            assert_eq!(SnapshotSymbol::from_parts(s.basis(), s.bit()), *s);
        }
        assert!(matches!(SnapshotSymbol::from_u8(6), Err(Error::InvalidSymbol(6))));
    }

    /// Random single-qubit density matrix from a Bloch vector in the unit ball.
    fn bloch(x: f64, y: f64, z: f64) -> CMatrix2 {
        (identity2() + pauli_x() * c(x, 0.0) + pauli_y() * c(y, 0.0) + pauli_z() * c(z, 0.0)) * c(0.5, 0.0)
    }

    fn born(rho: &CMatrix2, s: SnapshotSymbol) -> f64 {
        let v = s.state();
        let mut p = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                p += v[i].conj() * rho[(i, j)] * v[j];
            }
        }
        p.re
    }

    proptest! {
        #[test]
        fn snapshot_channel_is_unbiased(x in -0.57f64..0.57, y in -0.57f64..0.57, z in -0.57f64..0.57) {
            let rho = bloch(x, y, z);
            let mut avg = CMatrix2::zeros();
            for s in SnapshotSymbol::ALL {
                avg += snapshot_matrix(s) * c(born(&rho, s) / 3.0, 0.0);
            }
            prop_assert!(close(&avg, &rho, 1e-12));
        }

        #[test]
        fn product_estimator_matches_rdm_trace(
            syms in proptest::collection::vec(0u8..6, 4 * 7),
            coeffs in proptest::collection::vec(-1.0f64..1.0, 12),
            which in 1usize..=3,
        ) {
            let shadow = ClassicalShadow::new(4, syms, 0).unwrap();
            let sites: Vec<usize> = [2usize, 0, 3][..which].to_vec();
            let factors: Vec<(usize, CMatrix2)> = sites
                .iter()
                .enumerate()
                .map(|(k, &s)| {
                    let a = &coeffs[4 * k..4 * k + 4];
                    (s, bloch(a[1], a[2], a[3]) * c(a[0] + 2.0, 0.0))
                })
                .collect();
            let est = estimate_product_observable(&shadow, &factors).unwrap();
            let rdm = shadow_rdm(&shadow, &sites).unwrap();
            let mut o = CMatrix::from_element(1, 1, ONE);
            for (_, f) in &factors {
                o = kron(&o, &to_dynamic(f));
            }
            let tr = (o * &rdm.matrix).trace();
            prop_assert!((tr.re - est).abs() <= 1e-10 * (1.0 + est.abs()));
            prop_assert!(rdm.hermiticity_defect() <= 1e-12);
            prop_assert!((rdm.trace() - ONE).norm() <= 1e-10);
        }
    }

    #[test]
    fn single_snapshot_rdm() {
        let shadow = ClassicalShadow::new(1, vec![0], 0).unwrap();
        let r = shadow_rdm(&shadow, &[0]).unwrap();
        assert!((r.matrix[(0, 0)].re - 2.0).abs() < 1e-15 && (r.matrix[(1, 1)].re + 1.0).abs() < 1e-15);
        let est = estimate_product_observable(&shadow, &[(0, pauli_z())]).unwrap();
        assert!((est - 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_shadow_errors() {
        let shadow = ClassicalShadow::new(2, vec![], 0).unwrap();
        assert!(matches!(shadow_rdm(&shadow, &[0]), Err(Error::EmptyShadow)));
        assert_eq!(estimate_observable_sum(&shadow, &[]).unwrap(), 0.0);
    }

    #[test]
    fn enumerated_estimator_is_exact_on_zero_state() {
        // average Tr(Z sigma) over bases and Born outcomes of |0>
        let rho = bloch(0.0, 0.0, 1.0);
        let mut avg = 0.0;
        for s in SnapshotSymbol::ALL {
            let sh = ClassicalShadow::new(1, vec![s as u8], 0).unwrap();
            avg += born(&rho, s) / 3.0 * estimate_product_observable(&sh, &[(0, pauli_z())]).unwrap();
        }
        assert!((avg - 1.0).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_rdms() {
        let zero = StateVector::basis(2, &[0, 0, 0]).unwrap();
        let shadow = sample_shadow(&zero, 100_000, 3).unwrap();
        let est = shadow_rdm(&shadow, &[0]).unwrap();
        let exact = exact_rdm(&zero, &[0]).unwrap();
        assert!(est.trace_distance(&exact).unwrap() <= 0.05);

        let ghz = StateVector::ghz(4).unwrap();
        let shadow = sample_shadow(&ghz, 100_000, 4).unwrap();
        let est = shadow_rdm(&shadow, &[0, 1]).unwrap();
        let exact = exact_rdm(&ghz, &[0, 1]).unwrap();
        assert!(est.trace_distance(&exact).unwrap() <= 0.1);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::product(&[[c(h, 0.0), c(h, 0.0)]]).unwrap();
        let shadow = sample_shadow(&plus, 100_000, 5).unwrap();
        let x = estimate_product_observable(&shadow, &[(0, pauli_x())]).unwrap();
        assert!((x - 1.0).abs() < 0.05);
    }

    #[test]
    fn observable_sums() {
        let s01 = StateVector::basis(2, &[0, 1]).unwrap();
        let shadow = sample_shadow(&s01, 50_000, 8).unwrap();
        let terms = vec![
            ProductTerm::new(vec![(0, pauli_z())], 1.0),
            ProductTerm::new(vec![(1, pauli_z())], 1.0),
        ];
        assert!(estimate_observable_sum(&shadow, &terms).unwrap().abs() < 0.06);

        let bell = StateVector::new(2, 2, vec![ONE, ZERO, ZERO, ONE]).unwrap();
        let shadow = sample_shadow(&bell, 100_000, 9).unwrap();
        let corr: Vec<ProductTerm> = [pauli_x(), pauli_y(), pauli_z()]
            .into_iter()
            .map(|p| ProductTerm::new(vec![(0, p), (1, p)], 1.0 / 3.0))
            .collect();
        let exact_terms: Vec<LocalTerm> = corr
            .iter()
            .map(|t| {
                LocalTerm::new(
                    vec![0, 1],
                    kron(&to_dynamic(&t.factors[0].1), &to_dynamic(&t.factors[1].1)),
                    t.coefficient,
                )
            })
            .collect();
        let exact = exact_expectation(&bell, &exact_terms).unwrap();
        assert!((exact - 1.0 / 3.0).abs() < 1e-12);
        assert!((estimate_observable_sum(&shadow, &corr).unwrap() - exact).abs() < 0.1);
    }

    #[test]
    fn partial_trace_composes() {
        let s = StateVector::new(
            3,
            2,
            (0..8)
                .map(|k| c((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
                .collect(),
        )
        .unwrap();
        let r01 = exact_rdm(&s, &[0, 1]).unwrap();
        let r0 = exact_rdm(&s, &[0]).unwrap();
        let traced = r01.partial_trace(2, 2, &[0]).unwrap();
        assert!((traced.matrix - r0.matrix).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn rdm_shadow_size_value() {
        let t = rdm_shadow_size(8, 2, 0.25, 0.1);
        assert!((70_000..70_500).contains(&t), "{t}");
    }

    #[test]
    fn rejects_large_subsystems() {
        let shadow = ClassicalShadow::new(8, vec![0; 8], 0).unwrap();
        assert!(matches!(
            shadow_rdm(&shadow, &[0, 1, 2, 3, 4, 5, 6]),
            Err(Error::SubsystemTooLarge { size: 7, cap: 6 })
        ));
    }
}
