use super::build::{local_index, replace_local, strides};
use super::{hilbert_dim, LocalTerm};
use crate::error::{Error, Result};
use crate::linalg::{c, norm_sqr, CMatrix, C64, ZERO};
use crate::shadows::DensityMatrix;

/// Default cap on the number of sites in a reduced density matrix.
pub const DEFAULT_RDM_CAP: usize = 6;

/// A pure state on `n` sites of local dimension `local_dim`; site 0 is the
/// most significant digit of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n: usize,
    pub local_dim: usize,
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps amplitudes, normalizing them.
    pub fn new(n: usize, local_dim: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        let dim = hilbert_dim(n, local_dim).ok_or(Error::DimensionCap {
            n,
            local_dim,
            cap: usize::MAX,
        })?;
        if amplitudes.len() != dim {
            return Err(Error::LengthMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        let norm = norm_sqr(&amplitudes).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("state has zero or non-finite norm".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self {
            n,
            local_dim,
            amplitudes,
        })
    }

    /// Computational basis state given per-site digits.
    pub fn basis(local_dim: usize, digits: &[usize]) -> Result<Self> {
        let n = digits.len();
        let dim = hilbert_dim(n, local_dim).ok_or(Error::DimensionCap {
            n,
            local_dim,
            cap: usize::MAX,
        })?;
        let mut idx = 0;
        for &dgt in digits {
            if dgt >= local_dim {
                return Err(Error::InvalidParameter(format!(
                    "digit {dgt} >= local dimension {local_dim}"
                )));
            }
            idx = idx * local_dim + dgt;
        }
        let mut amps = vec![ZERO; dim];
        amps[idx] = c(1.0, 0.0);
        Self::new(n, local_dim, amps)
    }

    /// Product of single-qubit states.
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        let mut amps = vec![c(1.0, 0.0)];
        for q in qubits {
            let mut next = Vec::with_capacity(amps.len() * 2);
            for a in &amps {
                next.push(*a * q[0]);
                next.push(*a * q[1]);
            }
            amps = next;
        }
        Self::new(qubits.len(), 2, amps)
    }

    /// `(|0...0> + |1...1>)/sqrt(2)` on `n` qubits.
    pub fn ghz(n: usize) -> Result<Self> {
        let dim = 1usize << n;
        let mut amps = vec![ZERO; dim];
        amps[0] = c(1.0, 0.0);
        amps[dim - 1] = c(1.0, 0.0);
        Self::new(n, 2, amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }
}

/// `term * psi` (coefficient included).
pub fn apply_local(state: &StateVector, term: &LocalTerm) -> Result<Vec<C64>> {
    term.validate(state.n, state.local_dim)?;
    let d = state.local_dim;
    let st = strides(state.n, d);
    let k = term.matrix.nrows();
    let coef = c(term.coefficient, 0.0);
    let mut out = vec![ZERO; state.dim()];
    let mut visited = vec![false; state.dim()];
    let mut local_in = vec![ZERO; k];
    for b in 0..state.dim() {
        if visited[b] {
            continue;
        }
        // gather the block of basis states sharing all other digits
        let base = replace_local(b, &term.sites, &st, d, 0);
        let members: Vec<usize> = (0..k).map(|j| replace_local(base, &term.sites, &st, d, j)).collect();
        for (j, &m) in members.iter().enumerate() {
            visited[m] = true;
            local_in[j] = state.amplitudes[m];
        }
        for (i, &m) in members.iter().enumerate() {
            let mut acc = ZERO;
            for (j, a) in local_in.iter().enumerate() {
                acc += term.matrix[(i, j)] * a;
            }
            out[m] = coef * acc;
        }
    }
    Ok(out)
}

/// `<psi| sum_j c_j h_j |psi>`.
pub fn exact_expectation(state: &StateVector, observable: &[LocalTerm]) -> Result<f64> {
    let mut total = ZERO;
    for term in observable {
        let applied = apply_local(state, term)?;
        total += crate::linalg::inner(&state.amplitudes, &applied);
    }
    let scale = observable
        .iter()
        .map(|t| t.coefficient.abs() * t.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .sum::<f64>()
        .max(1.0);
    debug_assert!(total.im.abs() <= 1e-10 * scale, "imaginary residue {}", total.im);
    Ok(total.re)
}

fn check_subsystem(n: usize, subsystem: &[usize], cap: usize) -> Result<()> {
    if subsystem.len() > cap {
        return Err(Error::SubsystemTooLarge {
            size: subsystem.len(),
            cap,
        });
    }
    for (k, &s) in subsystem.iter().enumerate() {
        if s >= n || subsystem[..k].contains(&s) {
            return Err(Error::InvalidSubsystem(format!("{subsystem:?} on {n} sites")));
        }
    }
    Ok(())
}

/// Reduced density matrix on `subsystem` (listed order gives the tensor order).
pub fn exact_rdm(state: &StateVector, subsystem: &[usize]) -> Result<DensityMatrix> {
    exact_rdm_mixture(std::slice::from_ref(state), subsystem)
}

/// Reduced density matrix of the uniform mixture of `states`.
pub fn exact_rdm_mixture(states: &[StateVector], subsystem: &[usize]) -> Result<DensityMatrix> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidParameter("no states in mixture".into()))?;
    check_subsystem(first.n, subsystem, DEFAULT_RDM_CAP)?;
    let d = first.local_dim;
    let st = strides(first.n, d);
    let da = hilbert_dim(subsystem.len(), d).unwrap();
    let denv = first.dim() / da;
    let env: Vec<usize> = (0..first.n).filter(|s| !subsystem.contains(s)).collect();
    let mut rho = CMatrix::zeros(da, da);
    for state in states {
        if state.n != first.n || state.local_dim != d {
            return Err(Error::InvalidParameter("mixture members differ in shape".into()));
        }
        let mut psi = CMatrix::zeros(da, denv);
        for (b, amp) in state.amplitudes.iter().enumerate() {
            let a = local_index(b, subsystem, &st, d);
            let e = local_index(b, &env, &st, d);
            psi[(a, e)] = *amp;
        }
        rho += &psi * psi.adjoint();
    }
    rho /= c(states.len() as f64, 0.0);
    Ok(DensityMatrix::new(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_z, to_dynamic};

    fn bell() -> StateVector {
        StateVector::new(2, 2, vec![c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn expectation_basics() {
        let z = LocalTerm::new(vec![0], to_dynamic(&pauli_z()), 1.0);
        let zero = StateVector::basis(2, &[0]).unwrap();
        assert!((exact_expectation(&zero, std::slice::from_ref(&z)).unwrap() - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::product(&[[c(h, 0.0), c(h, 0.0)]]).unwrap();
        assert!(exact_expectation(&plus, &[z]).unwrap().abs() < 1e-14);
        let x = LocalTerm::new(vec![0], to_dynamic(&pauli_x()), 2.0);
        assert!((exact_expectation(&plus, &[x]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rdm_examples() {
        let r = exact_rdm(&StateVector::basis(2, &[0, 0]).unwrap(), &[0]).unwrap();
        assert!((r.matrix[(0, 0)].re - 1.0).abs() < 1e-14 && r.matrix[(1, 1)].norm() < 1e-14);

        let r = exact_rdm(&bell(), &[0]).unwrap();
        assert!((r.matrix[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((r.matrix[(1, 1)].re - 0.5).abs() < 1e-14);
        assert!(r.matrix[(0, 1)].norm() < 1e-14);

        let r = exact_rdm(&StateVector::ghz(4).unwrap(), &[0, 1]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j && (i == 0 || i == 3) { 0.5 } else { 0.0 };
                assert!((r.matrix[(i, j)] - c(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rdm_rejects_oversized_and_invalid() {
        let s = StateVector::ghz(8).unwrap();
        assert!(matches!(
            exact_rdm(&s, &[0, 1, 2, 3, 4, 5, 6]),
            Err(Error::SubsystemTooLarge { .. })
        ));
        assert!(matches!(exact_rdm(&s, &[0, 0]), Err(Error::InvalidSubsystem(_))));
    }

    #[test]
    fn subsystem_order_sets_tensor_order() {
        // |01>: qubit 0 in |0>, qubit 1 in |1>
        let s = StateVector::basis(2, &[0, 1]).unwrap();
        let r01 = exact_rdm(&s, &[0, 1]).unwrap();
        let r10 = exact_rdm(&s, &[1, 0]).unwrap();
        assert!((r01.matrix[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!((r10.matrix[(2, 2)].re - 1.0).abs() < 1e-14);
    }
}
