//! Physical observables used as labels and checks: Rydberg order
//! parameters, two-point correlators, the partial-reflection invariant and
//! the spin-1 twist operator.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermiticity_defect, kron, pauli_x, pauli_y, pauli_z, proj0, proj1, to_dynamic, CMatrix, CMatrix2, C64, ONE, ZERO,
};
use crate::shadows::{estimate_observable_sum, ClassicalShadow, ProductTerm};
use crate::simulator::{exact_expectation, exact_rdm, LocalTerm, StateVector};

/// A named sum of tensor-product terms with a canonical content hash.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSpec {
    pub id: String,
    pub name: String,
    pub terms: Vec<ProductTerm>,
}

impl ObservableSpec {
    pub fn new(name: impl Into<String>, terms: Vec<ProductTerm>) -> Self {
        let id = canonical_id(&terms);
        Self {
            id,
            name: name.into(),
            terms,
        }
    }

    /// Checks factor Hermiticity and site ranges for an `n`-site system.
    pub fn validate(&self, n: usize) -> Result<()> {
        for t in &self.terms {
            for (k, (s, m)) in t.factors.iter().enumerate() {
                if *s >= n || t.factors[..k].iter().any(|f| f.0 == *s) {
                    return Err(Error::BadTerm(format!("site {s} invalid in a term on {n} sites")));
                }
                if hermiticity_defect(&to_dynamic(m)) > 1e-12 {
                    return Err(Error::BadTerm(format!("factor on site {s} is not Hermitian")));
                }
            }
        }
        Ok(())
    }

    /// Terms as embedded local operators.
    pub fn to_local_terms(&self) -> Vec<LocalTerm> {
        self.terms
            .iter()
            .map(|t| {
                let sites = t.factors.iter().map(|f| f.0).collect();
                let m = t
                    .factors
                    .iter()
                    .fold(CMatrix::from_element(1, 1, ONE), |acc, f| kron(&acc, &to_dynamic(&f.1)));
                LocalTerm::new(sites, m, t.coefficient)
            })
            .collect()
    }

    /// `<psi|O|psi>`.
    pub fn exact(&self, state: &StateVector) -> Result<f64> {
        self.validate(state.n)?;
        if self.terms.is_empty() {
            return Ok(0.0);
        }
        exact_expectation(state, &self.to_local_terms())
    }

    /// Classical-shadow estimate.
    pub fn estimate(&self, shadow: &ClassicalShadow) -> Result<f64> {
        estimate_observable_sum(shadow, &self.terms)
    }

    /// `sum |c_j| prod ||O_i||`, an upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient.abs()
                    * t.factors
                        .iter()
                        .map(|(_, m)| {
                            let ev = crate::linalg::hermitian_eigenvalues(&to_dynamic(m));
                            ev.iter().fold(0.0f64, |a, v| a.max(v.abs()))
                        })
                        .product::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ObservableDoc {
            id: self.id.clone(),
            name: self.name.clone(),
            terms: self.terms.iter().map(TermDoc::from).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ObservableDoc = serde_json::from_str(text)?;
        let terms = doc
            .terms
            .into_iter()
            .map(ProductTerm::try_from)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(doc.name, terms))
    }
}

fn canonical_id(terms: &[ProductTerm]) -> String {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut eat = |v: u64| h = (h ^ v).wrapping_mul(0x0100_0000_01b3);
    for t in terms {
        eat(t.coefficient.to_bits());
        for (s, m) in &t.factors {
            eat(*s as u64);
            for z in m.iter() {
                eat(z.re.to_bits());
                eat(z.im.to_bits());
            }
        }
        eat(u64::MAX);
    }
    format!("{h:016x}")
}

/// JSON term in the Hamiltonian format (`sites`, full row-major `matrix` of
/// `[re, im]` pairs, `coefficient`), plus the per-site `factors`.
#[derive(Serialize, Deserialize)]
struct TermDoc {
    sites: Vec<usize>,
    matrix: Vec<[f64; 2]>,
    coefficient: f64,
    #[serde(default)]
    factors: Vec<Vec<[f64; 2]>>,
}

fn flat(m: &CMatrix) -> Vec<[f64; 2]> {
    let d = m.nrows();
    (0..d * d)
        .map(|k| {
            let z = m[(k / d, k % d)];
            [z.re, z.im]
        })
        .collect()
}

impl From<&ProductTerm> for TermDoc {
    fn from(t: &ProductTerm) -> Self {
        let full = t
            .factors
            .iter()
            .fold(CMatrix::from_element(1, 1, ONE), |acc, f| kron(&acc, &to_dynamic(&f.1)));
        Self {
            sites: t.factors.iter().map(|f| f.0).collect(),
            matrix: flat(&full),
            coefficient: t.coefficient,
            factors: t.factors.iter().map(|f| flat(&to_dynamic(&f.1))).collect(),
        }
    }
}

impl TryFrom<TermDoc> for ProductTerm {
    type Error = Error;

    fn try_from(doc: TermDoc) -> Result<Self> {
        let to2 = |v: &[[f64; 2]]| -> Result<CMatrix2> {
            if v.len() != 4 {
                return Err(Error::BadTerm(format!("factor has {} entries, expected 4", v.len())));
            }
            Ok(CMatrix2::new(
                c(v[0][0], v[0][1]),
                c(v[1][0], v[1][1]),
                c(v[2][0], v[2][1]),
                c(v[3][0], v[3][1]),
            ))
        };
        let factors: Vec<CMatrix2> = if !doc.factors.is_empty() {
            doc.factors.iter().map(|f| to2(f)).collect::<Result<_>>()?
        } else if doc.sites.len() == 1 {
            vec![to2(&doc.matrix)?]
        } else {
            return Err(Error::BadTerm("multi-site term without per-site factors".into()));
        };
        if factors.len() != doc.sites.len() {
            return Err(Error::LengthMismatch {
                expected: doc.sites.len(),
                got: factors.len(),
            });
        }
        Ok(ProductTerm::new(
            doc.sites.into_iter().zip(factors).collect(),
            doc.coefficient,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct ObservableDoc {
    id: String,
    name: String,
    terms: Vec<TermDoc>,
}

/// `|r>` is `|1>`, `|g>` is `|0>`.
fn rydberg(r: bool) -> CMatrix2 {
    if r {
        proj1()
    } else {
        proj0()
    }
}

/// `1/(n-1) sum_i (|rg><rg| + |gr><gr|)` on neighbouring pairs.
pub fn order_param_z2(n: usize) -> Result<ObservableSpec> {
    if n < 2 {
        return Err(Error::ChainTooShort { n, min: 2 });
    }
    let w = 1.0 / (n - 1) as f64;
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        for pattern in [[true, false], [false, true]] {
            terms.push(ProductTerm::new(
                vec![(i, rydberg(pattern[0])), (i + 1, rydberg(pattern[1]))],
                w,
            ));
        }
    }
    Ok(ObservableSpec::new(format!("O_Z2(n={n})"), terms))
}

/// `1/(n-2) sum_i (|rgg><rgg| + |grg><grg| + |ggr><ggr|)` on neighbouring triples.
pub fn order_param_z3(n: usize) -> Result<ObservableSpec> {
    if n < 3 {
        return Err(Error::ChainTooShort { n, min: 3 });
    }
    let w = 1.0 / (n - 2) as f64;
    let mut terms = Vec::new();
    for i in 0..n - 2 {
        for r in 0..3 {
            terms.push(ProductTerm::new((0..3).map(|k| (i + k, rydberg(k == r))).collect(), w));
        }
    }
    Ok(ObservableSpec::new(format!("O_Z3(n={n})"), terms))
}

/// `C_ij = (X_i X_j + Y_i Y_j + Z_i Z_j) / 3`.
pub fn correlator(i: usize, j: usize) -> Result<ObservableSpec> {
    if i == j {
        return Err(Error::SameSite(i));
    }
    let terms = [pauli_x(), pauli_y(), pauli_z()]
        .into_iter()
        .map(|p| ProductTerm::new(vec![(i, p), (j, p)], 1.0 / 3.0))
        .collect();
    Ok(ObservableSpec::new(format!("C_{i}_{j}"), terms))
}

/// Single-site Pauli observable, e.g. `X_3`.
pub fn single_pauli(label: char, site: usize) -> Result<ObservableSpec> {
    let m = match label {
        'X' => pauli_x(),
        'Y' => pauli_y(),
        'Z' => pauli_z(),
        other => return Err(Error::InvalidParameter(format!("unknown Pauli label {other}"))),
    };
    Ok(ObservableSpec::new(
        format!("{label}_{site}"),
        vec![ProductTerm::new(vec![(site, m)], 1.0)],
    ))
}

/// Rydberg chain phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RydbergPhase {
    Z2Order,
    Z3Order,
    Disordered,
}

/// Threshold on the order parameters.
pub const ORDER_THRESHOLD: f64 = 0.8;

/// Phase from order-parameter values; `z2 == z3` resolves toward Z2.
pub fn rydberg_phase_from_values(z2: f64, z3: f64) -> RydbergPhase {
    if z2 >= z3 && z2 > ORDER_THRESHOLD {
        RydbergPhase::Z2Order
    } else if z3 > ORDER_THRESHOLD {
        RydbergPhase::Z3Order
    } else {
        RydbergPhase::Disordered
    }
}

pub fn classify_rydberg_phase(state: &StateVector) -> Result<RydbergPhase> {
    let z2 = order_param_z2(state.n)?.exact(state)?;
    let z3 = order_param_z3(state.n)?.exact(state)?;
    Ok(rydberg_phase_from_values(z2, z3))
}

pub fn classify_rydberg_phase_shadow(shadow: &ClassicalShadow) -> Result<RydbergPhase> {
    let z2 = order_param_z2(shadow.n())?.estimate(shadow)?;
    let z3 = order_param_z3(shadow.n())?.estimate(shadow)?;
    Ok(rydberg_phase_from_values(z2, z3))
}

/// Largest union `I1 u I2` accepted by [`partial_reflection_invariant`].
pub const REFLECTION_CAP: usize = 12;

/// `Z_R / sqrt((Tr rho_I1^2 + Tr rho_I2^2) / 2)` with `Z_R = Tr(rho_{I1 u I2} R)`,
/// where `R` reverses the site order on the union of the adjacent intervals
/// `i1` (left) and `i2` (right).
///
/// For a pure state `Tr(rho_{I1 u I2} R) = <psi| R |psi>`, which is what is
/// evaluated; the union's reduced density matrix is never formed.
pub fn partial_reflection_invariant(state: &StateVector, i1: Range<usize>, i2: Range<usize>) -> Result<f64> {
    if i1.is_empty() || i1.len() != i2.len() || i1.end != i2.start {
        return Err(Error::NonAdjacent);
    }
    let union = i1.start..i2.end;
    if union.len() > REFLECTION_CAP {
        return Err(Error::SubsystemTooLarge {
            size: union.len(),
            cap: REFLECTION_CAP,
        });
    }
    if union.end > state.n {
        return Err(Error::InvalidSubsystem(format!("{union:?} on {} sites", state.n)));
    }
    let d = state.local_dim;
    let n = state.n;
    let strides: Vec<usize> = (0..n).map(|s| d.pow((n - 1 - s) as u32)).collect();
    let sites: Vec<usize> = union.clone().collect();
    let mut z = ZERO;
    for (b, amp) in state.amplitudes.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        // R|b>: digits on the union reversed
        let mut rb = b;
        for (k, &s) in sites.iter().enumerate() {
            let mirror = sites[sites.len() - 1 - k];
            let digit = (b / strides[mirror]) % d;
            rb = rb - ((b / strides[s]) % d) * strides[s] + digit * strides[s];
        }
        z += state.amplitudes[rb].conj() * amp;
    }
    let p1 = purity(state, i1)?;
    let p2 = purity(state, i2)?;
    Ok(z.re / ((p1 + p2) / 2.0).sqrt())
}

/// Two adjacent intervals of `len` sites meeting at the chain centre.
///
/// For bond-alternating chains with `n / 2` even and `len` even, the centre
/// bond and both outer boundaries fall on the same bond type, which is the
/// placement that yields `+1` / `-1` in the dimer limits.
pub fn central_intervals(n: usize, len: usize) -> Result<(Range<usize>, Range<usize>)> {
    let mid = n / 2;
    if len == 0 || len > mid || mid + len > n {
        return Err(Error::InvalidSubsystem(format!(
            "two intervals of {len} sites on {n} sites"
        )));
    }
    Ok((mid - len..mid, mid..mid + len))
}

fn purity(state: &StateVector, interval: Range<usize>) -> Result<f64> {
    let sites: Vec<usize> = interval.collect();
    let rho = exact_rdm(state, &sites)?;
    Ok((&rho.matrix * &rho.matrix).trace().re)
}

/// Sites `k` (indices around the chain centre) covered by the twist
/// of size `ell`: all integers with `|k - 1/2| <= ell + 1/2`.
fn twist_sites(ell: f64) -> Vec<i64> {
    let lo = (0.5 - (ell + 0.5)).ceil() as i64;
    let hi = (0.5 + (ell + 0.5)).floor() as i64;
    (lo..=hi).collect()
}

/// `<psi| O_ell |psi>` with
/// `O_ell = prod_k exp(-i 2 pi (k + ell)/(2 ell + 1) S^z_k)` over the window
/// `|k - 1/2| <= ell + 1/2`; window index `k` is chain site `floor(n/2) - 1 + k`.
/// Spin-1 basis digits `0, 1, 2` carry `S^z = +1, 0, -1`.
pub fn twist_expectation(state: &StateVector, ell: usize) -> Result<C64> {
    twist_expectation_real(state, ell as f64)
}

/// [`twist_expectation`] for a real twist size `ell >= 0`.
pub fn twist_expectation_real(state: &StateVector, ell: f64) -> Result<C64> {
    if state.local_dim != 3 {
        return Err(Error::WrongLocalDim(state.local_dim));
    }
    if !(ell >= 0.0) {
        return Err(Error::InvalidParameter(format!("twist size {ell} must be nonnegative")));
    }
    let n = state.n;
    let origin = (n / 2) as i64 - 1;
    let ks = twist_sites(ell);
    let sites: Vec<(usize, f64)> = ks
        .iter()
        .map(|&k| {
            let s = origin + k;
            if s < 0 || s >= n as i64 {
                return Err(Error::IntervalOutOfRange {
                    ell: ell.ceil() as usize,
                    n,
                });
            }
            Ok((
                s as usize,
                2.0 * std::f64::consts::PI * (k as f64 + ell) / (2.0 * ell + 1.0),
            ))
        })
        .collect::<Result<_>>()?;
    let strides: Vec<usize> = (0..n).map(|s| 3usize.pow((n - 1 - s) as u32)).collect();
    let mut total = ZERO;
    for (b, amp) in state.amplitudes.iter().enumerate() {
        let mut phase = 0.0;
        for &(s, theta) in &sites {
            let sz = 1.0 - ((b / strides[s]) % 3) as f64;
            phase -= theta * sz;
        }
        total += amp.norm_sqr() * C64::from_polar(1.0, phase);
    }
    Ok(total)
}

/// `O_ell |psi>` (the twist is diagonal in the product basis).
pub fn apply_twist(state: &StateVector, ell: usize) -> Result<Vec<C64>> {
    if state.local_dim != 3 {
        return Err(Error::WrongLocalDim(state.local_dim));
    }
    let n = state.n;
    let origin = (n / 2) as i64 - 1;
    let ellf = ell as f64;
    let strides: Vec<usize> = (0..n).map(|s| 3usize.pow((n - 1 - s) as u32)).collect();
    let mut sites = Vec::new();
    for k in twist_sites(ellf) {
        let s = origin + k;
        if s < 0 || s >= n as i64 {
            return Err(Error::IntervalOutOfRange { ell, n });
        }
        sites.push((
            s as usize,
            2.0 * std::f64::consts::PI * (k as f64 + ellf) / (2.0 * ellf + 1.0),
        ));
    }
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(b, amp)| {
            let phase: f64 = sites
                .iter()
                .map(|&(s, th)| -th * (1.0 - ((b / strides[s]) % 3) as f64))
                .sum();
            amp * C64::from_polar(1.0, phase)
        })
        .collect())
}

/// `Re <O_ell>`, the expectation of `(O_ell + O_ell^dagger) / 2`.
pub fn twist_hermitian(state: &StateVector, ell: usize) -> Result<f64> {
    Ok(twist_expectation(state, ell)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadows::estimate_observable_sum;
    use crate::simulator::{aklt_spin1, ground_state, sample_shadow, xxz_bond_alternating};

    fn rg(pattern: &str) -> StateVector {
        let digits: Vec<usize> = pattern.chars().map(|ch| if ch == 'r' { 1 } else { 0 }).collect();
        StateVector::basis(2, &digits).unwrap()
    }

    #[test]
    fn order_parameters_on_basis_states() {
        assert!((order_param_z2(4).unwrap().exact(&rg("rgrg")).unwrap() - 1.0).abs() < 1e-14);
        assert!(order_param_z2(4).unwrap().exact(&rg("gggg")).unwrap().abs() < 1e-14);
        assert!((order_param_z3(6).unwrap().exact(&rg("rggrgg")).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(order_param_z3(2), Err(Error::ChainTooShort { n: 2, min: 3 })));
        assert!(matches!(order_param_z2(1), Err(Error::ChainTooShort { .. })));
    }

    #[test]
    fn phase_rule() {
        assert_eq!(classify_rydberg_phase(&rg("rgrgrgrg")).unwrap(), RydbergPhase::Z2Order);
        assert_eq!(
            classify_rydberg_phase(&rg("gggggggg")).unwrap(),
            RydbergPhase::Disordered
        );
        assert_eq!(classify_rydberg_phase(&rg("rggrggrgg")).unwrap(), RydbergPhase::Z3Order);
        assert_eq!(rydberg_phase_from_values(0.9, 0.9), RydbergPhase::Z2Order);
    }

    #[test]
    fn correlator_values() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = StateVector::new(2, 2, vec![ZERO, c(h, 0.0), c(-h, 0.0), ZERO]).unwrap();
        assert!((correlator(0, 1).unwrap().exact(&singlet).unwrap() + 1.0).abs() < 1e-12);
        let zz = StateVector::basis(2, &[0, 0]).unwrap();
        assert!((correlator(0, 1).unwrap().exact(&zz).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(correlator(2, 2), Err(Error::SameSite(2))));
    }

    #[test]
    fn shadow_estimate_tracks_exact() {
        let gs = ground_state(&xxz_bond_alternating(6, 1.0, 2.0, 1.0), 1e-8)
            .unwrap()
            .state;
        let shadow = sample_shadow(&gs, 40_000, 3).unwrap();
        let obs = correlator(2, 3).unwrap();
        let est = estimate_observable_sum(&shadow, &obs.terms).unwrap();
        assert!((est - obs.exact(&gs).unwrap()).abs() < 0.05);
    }

    #[test]
    fn json_roundtrip() {
        let o = order_param_z3(5).unwrap();
        let back = ObservableSpec::from_json(&o.to_json().unwrap()).unwrap();
        assert_eq!(back, o);
        let v: serde_json::Value = serde_json::from_str(&o.to_json().unwrap()).unwrap();
        assert_eq!(v["terms"][0]["matrix"].as_array().unwrap().len(), 64);
    }

    #[test]
    fn reflection_on_product_states() {
        let s = StateVector::basis(2, &[0; 8]).unwrap();
        for (a, l) in [(0, 1), (1, 2), (0, 4), (2, 3)] {
            let v = partial_reflection_invariant(&s, a..a + l, a + l..a + 2 * l).unwrap();
            assert!((v - 1.0).abs() < 1e-10);
        }
        let mixed = StateVector::product(&[[c(0.6, 0.0), c(0.0, 0.8)]; 6]).unwrap();
        assert!((partial_reflection_invariant(&mixed, 0..3, 3..6).unwrap() - 1.0).abs() < 1e-10);
        assert!(matches!(
            partial_reflection_invariant(&s, 0..2, 3..5),
            Err(Error::NonAdjacent)
        ));
        assert!(matches!(
            partial_reflection_invariant(&s, 0..2, 2..5),
            Err(Error::NonAdjacent)
        ));
    }

    #[test]
    fn reflection_of_a_central_singlet() {
        // singlet on sites (1, 2) of a 4-site chain, outer sites |0>
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 16];
        amps[0b0100] = c(h, 0.0);
        amps[0b0010] = c(-h, 0.0);
        let s = StateVector::new(4, 2, amps).unwrap();
        // intervals {1}, {2}: Z_R = -1, purities 1/2
        let v = partial_reflection_invariant(&s, 1..2, 2..3).unwrap();
        assert!((v + 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn twist_on_product_state() {
        let s = StateVector::basis(3, &[1; 6]).unwrap();
        for ell in 0..=2 {
            assert_eq!(twist_expectation(&s, ell).unwrap(), ONE);
        }
        assert!(matches!(
            twist_expectation(&s, 3),
            Err(Error::IntervalOutOfRange { .. })
        ));
        let q = StateVector::basis(2, &[0, 0]).unwrap();
        assert!(matches!(twist_expectation(&q, 0), Err(Error::WrongLocalDim(2))));
    }

    #[test]
    fn twist_preserves_magnitudes() {
        let gs = ground_state(&aklt_spin1(6), 1e-8).unwrap().state;
        let tw = apply_twist(&gs, 2).unwrap();
        for (a, b) in gs.amplitudes.iter().zip(&tw) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15);
        }
    }

    #[test]
    fn twist_is_continuous_in_ell() {
        let gs = ground_state(&aklt_spin1(8), 1e-8).unwrap().state;
        let mut prev = twist_expectation_real(&gs, 0.0).unwrap();
        for step in 1..=30 {
            let ell = step as f64 * 0.1;
            let cur = twist_expectation_real(&gs, ell).unwrap();
            assert!((cur - prev).norm() < 0.5, "jump at ell={ell}");
            if prev.norm() >= 0.5 && cur.norm() >= 0.5 {
                assert_eq!(prev.re.signum(), cur.re.signum(), "sign change at ell={ell}");
            }
            prev = cur;
        }
        let at2 = twist_expectation(&gs, 2).unwrap();
        assert!((twist_expectation_real(&gs, 2.0).unwrap() - at2).norm() < 1e-15);
    }

    #[test]
    fn central_interval_layout() {
        assert_eq!(central_intervals(12, 4).unwrap(), (2..6, 6..10));
        assert_eq!(central_intervals(12, 3).unwrap(), (3..6, 6..9));
        assert!(central_intervals(6, 4).is_err());
    }

    #[test]
    fn aklt_twist_sign() {
        let gs = ground_state(&aklt_spin1(8), 1e-8).unwrap();
        assert!(!gs.degenerate);
        for ell in [2, 3] {
            let v = twist_expectation(&gs.state, ell).unwrap();
            assert!(v.re < 0.0, "ell={ell}: {v}");
        }
    }
}
