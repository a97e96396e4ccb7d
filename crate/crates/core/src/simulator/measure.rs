use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::StateVector;
use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::rng;
use crate::shadows::ClassicalShadow;

/// Single-qubit measurement basis. The discriminant matches the basis half of
/// the snapshot symbol encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    Z = 0,
    X = 1,
    Y = 2,
}

impl Pauli {
    pub fn from_index(i: u8) -> Self {
        match i {
            0 => Pauli::Z,
            1 => Pauli::X,
            _ => Pauli::Y,
        }
    }
}

/// Rotates qubit `q` so that the `basis` eigenbasis maps onto the
/// computational basis (`+` eigenstate to `|0>`).
fn rotate_qubit(amps: &mut [C64], n: usize, q: usize, basis: Pauli) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // rows of H (X basis) or H S^dagger (Y basis)
    let (u00, u01, u10, u11) = match basis {
        Pauli::Z => return,
        Pauli::X => (c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
        Pauli::Y => (c(h, 0.0), c(0.0, -h), c(h, 0.0), c(0.0, h)),
    };
    let stride = 1usize << (n - 1 - q);
    let block = stride << 1;
    for start in (0..amps.len()).step_by(block) {
        for i in start..start + stride {
            let a = amps[i];
            let b = amps[i + stride];
            amps[i] = u00 * a + u01 * b;
            amps[i + stride] = u10 * a + u11 * b;
        }
    }
}

fn rotated_probabilities(state: &StateVector, bases: &[Pauli]) -> Vec<f64> {
    let mut amps = state.amplitudes.clone();
    for (q, &b) in bases.iter().enumerate() {
        rotate_qubit(&mut amps, state.n, q, b);
    }
    amps.iter().map(|a| a.norm_sqr()).collect()
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Inverse-CDF sample; `u` in `[0, 1)`.
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().unwrap();
    let target = u * total;
    cdf.partition_point(|&x| x <= target).min(cdf.len() - 1)
}

fn check_qubits(state: &StateVector) -> Result<()> {
    if state.local_dim != 2 {
        return Err(Error::UnsupportedLocalDim(state.local_dim));
    }
    Ok(())
}

/// Measures every qubit in the given bases, using `u` in `[0, 1)` as the
/// single uniform variate. Returns one bit per qubit (`0` for the `+1`
/// eigenvalue).
pub fn measure_in_basis(state: &StateVector, bases: &[Pauli], u: f64) -> Result<Vec<u8>> {
    check_qubits(state)?;
    if bases.len() != state.n {
        return Err(Error::LengthMismatch {
            expected: state.n,
            got: bases.len(),
        });
    }
    let cdf = cumulative(&rotated_probabilities(state, bases));
    Ok(bits_of(draw(&cdf, u), state.n))
}

fn bits_of(idx: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((idx >> (n - 1 - i)) & 1) as u8).collect()
}

/// Per-snapshot draws: which mixture member, the bases, and the uniform variate.
struct Draw {
    member: usize,
    bases: Vec<Pauli>,
    u: f64,
}

fn draw_snapshot(seed: u64, t: usize, n: usize, members: usize) -> Draw {
    let mut r = rng::stream(seed, t as u64);
    let member = if members > 1 { r.gen_range(0..members) } else { 0 };
    let bases = (0..n).map(|_| Pauli::from_index(r.gen_range(0..3u8))).collect();
    let u = r.gen::<f64>();
    Draw { member, bases, u }
}

/// Randomized Pauli measurements: `T` snapshots of `state`. Snapshot `t`
/// draws from its own stream keyed by `(seed, t)`, so the result does not
/// depend on the thread count.
pub fn sample_shadow(state: &StateVector, t: usize, seed: u64) -> Result<ClassicalShadow> {
    sample_shadow_mixture(std::slice::from_ref(state), t, seed)
}

/// Shadow of the uniform mixture of `states`: each snapshot first picks a
/// member uniformly at random.
pub fn sample_shadow_mixture(states: &[StateVector], t: usize, seed: u64) -> Result<ClassicalShadow> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidParameter("no states to sample".into()))?;
    for s in states {
        check_qubits(s)?;
        if s.n != first.n {
            return Err(Error::InvalidParameter("mixture members differ in size".into()));
        }
    }
    if t == 0 {
        return Err(Error::EmptyShadow);
    }
    let n = first.n;
    let draws: Vec<Draw> = (0..t)
        .into_par_iter()
        .map(|k| draw_snapshot(seed, k, n, states.len()))
        .collect();

    // one rotation per distinct (member, basis pattern)
    let mut groups: BTreeMap<(usize, Vec<Pauli>), Vec<usize>> = BTreeMap::new();
    for (k, d) in draws.iter().enumerate() {
        groups.entry((d.member, d.bases.clone())).or_default().push(k);
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let outcomes: Vec<(usize, usize)> = groups
        .par_iter()
        .flat_map_iter(|((member, bases), idxs)| {
            let cdf = cumulative(&rotated_probabilities(&states[*member], bases));
            idxs.iter().map(|&k| (k, draw(&cdf, draws[k].u))).collect::<Vec<_>>()
        })
        .collect();

    let mut symbols = vec![0u8; n * t];
    for (k, idx) in outcomes {
        let row = &mut symbols[k * n..(k + 1) * n];
        for (q, b) in draws[k].bases.iter().enumerate() {
            let bit = ((idx >> (n - 1 - q)) & 1) as u8;
            row[q] = (*b as u8) * 2 + bit;
        }
    }
    ClassicalShadow::new(n, symbols, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::shadows::SnapshotSymbol;

    fn bell() -> StateVector {
        StateVector::new(2, 2, vec![c(1.0, 0.0), ZERO, ZERO, c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn zero_state_in_z_always_gives_z_plus() {
        let s = StateVector::basis(2, &[0]).unwrap();
        let shadow = sample_shadow(&s, 3000, 5).unwrap();
        let mut z_count = 0usize;
        for t in 0..shadow.num_snapshots() {
            let sym = SnapshotSymbol::from_u8(shadow.snapshot(t)[0]).unwrap();
            if sym.basis() == Pauli::Z {
                z_count += 1;
                assert_eq!(sym, SnapshotSymbol::ZPlus);
            }
        }
        assert!(z_count > 800 && z_count < 1200);
    }

    #[test]
    fn basis_fraction_is_one_third() {
        let s = StateVector::basis(2, &[0]).unwrap();
        let t = 30_000;
        let shadow = sample_shadow(&s, t, 99).unwrap();
        let z = shadow.symbols().iter().filter(|&&b| b < 2).count() as f64;
        let p = 1.0 / 3.0;
        let sigma = (t as f64 * p * (1.0 - p)).sqrt();
        assert!((z - t as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn bell_z_outcomes_are_correlated() {
        let shadow = sample_shadow(&bell(), 4000, 1).unwrap();
        let mut seen = 0;
        for t in 0..shadow.num_snapshots() {
            let row = shadow.snapshot(t);
            if row[0] < 2 && row[1] < 2 {
                seen += 1;
                assert_eq!(row[0], row[1]);
            }
        }
        assert!(seen > 300);
    }

    #[test]
    fn sampling_is_reproducible_across_pools() {
        let s = StateVector::ghz(5).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_shadow(&s, 2000, 42).unwrap());
        let b = four.install(|| sample_shadow(&s, 2000, 42).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, sample_shadow(&s, 2000, 43).unwrap());
    }

    #[test]
    fn born_rule_frequencies() {
        // a generic 2-qubit state, fixed bases (X, Y)
        let s = StateVector::new(2, 2, vec![c(0.6, 0.1), c(0.2, -0.3), c(-0.4, 0.2), c(0.1, 0.5)]).unwrap();
        let bases = [Pauli::X, Pauli::Y];
        let probs = rotated_probabilities(&s, &bases);
        let runs = 100_000;
        let mut counts = [0usize; 4];
        let mut r = rng::stream(7, 0);
        for _ in 0..runs {
            let bits = measure_in_basis(&s, &bases, r.gen()).unwrap();
            counts[(bits[0] * 2 + bits[1]) as usize] += 1;
        }
        for k in 0..4 {
            let mean = runs as f64 * probs[k];
            let sigma = (runs as f64 * probs[k] * (1.0 - probs[k])).sqrt();
            assert!(
                (counts[k] as f64 - mean).abs() <= 4.0 * sigma,
                "{k}: {} vs {mean}",
                counts[k]
            );
        }
    }

    #[test]
    fn rejects_qutrits() {
        let s = StateVector::basis(3, &[0, 1]).unwrap();
        assert!(matches!(sample_shadow(&s, 1, 0), Err(Error::UnsupportedLocalDim(3))));
    }
}
