//! Named Hamiltonian families and their parameter boxes.
//!
//! Constructors take physical parameters. [`Family`] describes an
//! experiment-level family whose varied parameters are mapped affinely from
//! `[-1, 1]^m` onto a declared physical box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FamilyTag, HamiltonianSpec, LocalTerm};
use crate::error::{Error, Result};
use crate::linalg::{c, pauli_x, pauli_y, pauli_z, proj1, to_dynamic, CMatrix, ZERO};
use crate::rng;

/// Axis-aligned physical box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub bounds: Vec<(f64, f64)>,
}

impl ParamBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Maps `x` in `[-1, 1]^m` to physical units.
    pub fn to_physical(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        x.iter()
            .zip(&self.bounds)
            .enumerate()
            .map(|(i, (&xi, &(lo, hi)))| {
                if !(-1.0..=1.0).contains(&xi) {
                    return Err(Error::OutOfBox { index: i, value: xi });
                }
                Ok(lo + (xi + 1.0) * 0.5 * (hi - lo))
            })
            .collect()
    }

    /// Maps physical parameters back into `[-1, 1]^m`.
    pub fn to_normalized(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                if hi == lo {
                    0.0
                } else {
                    2.0 * (v - lo) / (hi - lo) - 1.0
                }
            })
            .collect()
    }
}

fn pp(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn with_params(mut spec: HamiltonianSpec, physical: Vec<f64>, pbox: ParamBox) -> HamiltonianSpec {
    spec.params = pbox.to_normalized(&physical);
    spec.physical_params = physical;
    spec.physical_box = pbox.bounds;
    spec
}

/// Transverse-field Ising chain `H = -J sum Z_i Z_{i+1} - h sum X_i`.
pub fn tfim_family(n: usize, coupling: f64, field: f64, periodic: bool) -> HamiltonianSpec {
    let x = to_dynamic(&pauli_x());
    let z = to_dynamic(&pauli_z());
    let zz = pp(&z, &z);
    let mut terms = Vec::new();
    let bonds = if periodic && n > 2 { n } else { n.saturating_sub(1) };
    for i in 0..bonds {
        if coupling != 0.0 {
            terms.push(LocalTerm::new(vec![i, (i + 1) % n], zz.clone(), -coupling));
        }
    }
    for i in 0..n {
        terms.push(LocalTerm::new(vec![i], x.clone(), -field));
    }
    let spec = HamiltonianSpec {
        family_tag: FamilyTag::Tfim,
        ..HamiltonianSpec::custom(n, 2, terms)
    };
    with_params(spec, vec![coupling, field], ParamBox::new(vec![(0.0, 2.0), (0.0, 2.0)]))
}

/// Rydberg atom chain with Rabi frequency 1:
/// `H = 1/2 sum X_i - Delta sum N_i + sum_{i<j} (R_b / |i-j|)^6 N_i N_j`,
/// with the van der Waals tail truncated beyond `range` sites.
/// `|0>` is the atomic ground state and `|1>` the Rydberg state.
pub fn rydberg_chain(n: usize, detuning: f64, blockade_radius: f64, range: usize) -> HamiltonianSpec {
    let x = to_dynamic(&pauli_x());
    let num = to_dynamic(&proj1());
    let nn = pp(&num, &num);
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(LocalTerm::new(vec![i], x.clone(), 0.5));
        terms.push(LocalTerm::new(vec![i], num.clone(), -detuning));
    }
    for i in 0..n {
        for j in (i + 1)..n.min(i + range + 1) {
            let v = (blockade_radius / (j - i) as f64).powi(6);
            terms.push(LocalTerm::new(vec![i, j], nn.clone(), v));
        }
    }
    let spec = HamiltonianSpec {
        family_tag: FamilyTag::RydbergChain,
        ..HamiltonianSpec::custom(n, 2, terms)
    };
    with_params(spec, vec![detuning, blockade_radius], rydberg_default_box())
}

fn rydberg_default_box() -> ParamBox {
    ParamBox::new(vec![(-2.0, 5.0), (1.0, 3.0)])
}

/// Nearest-neighbour edges of an `lx` by `ly` open square lattice, sites in
/// row-major order.
pub fn lattice_edges(lx: usize, ly: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for y in 0..ly {
        for x in 0..lx {
            let s = y * lx + x;
            if x + 1 < lx {
                edges.push((s, s + 1));
            }
            if y + 1 < ly {
                edges.push((s, s + lx));
            }
        }
    }
    edges
}

/// 2D Heisenberg model `sum_<ij> J_ij (X_i X_j + Y_i Y_j + Z_i Z_j)` with one
/// coupling per lattice edge (see [`lattice_edges`]).
pub fn heisenberg2d(lx: usize, ly: usize, couplings: &[f64]) -> Result<HamiltonianSpec> {
    let edges = lattice_edges(lx, ly);
    if couplings.len() != edges.len() {
        return Err(Error::DimensionMismatch {
            expected: edges.len(),
            got: couplings.len(),
        });
    }
    let heis = heisenberg_bond(1.0);
    let terms = edges
        .iter()
        .zip(couplings)
        .map(|(&(a, b), &j)| LocalTerm::new(vec![a, b], heis.clone(), j))
        .collect();
    let spec = HamiltonianSpec {
        family_tag: FamilyTag::Heisenberg2d,
        ..HamiltonianSpec::custom(lx * ly, 2, terms)
    };
    let pbox = ParamBox::new(vec![(0.0, 2.0); edges.len()]);
    Ok(with_params(spec, couplings.to_vec(), pbox))
}

/// [`heisenberg2d`] with couplings drawn uniformly from `[0, 2]`.
pub fn heisenberg2d_random(lx: usize, ly: usize, seed: u64) -> HamiltonianSpec {
    let mut r = rng::stream(seed, 0);
    let couplings: Vec<f64> = lattice_edges(lx, ly).iter().map(|_| r.gen_range(0.0..2.0)).collect();
    heisenberg2d(lx, ly, &couplings).expect("coupling count matches edges")
}

/// `X X + Y Y + delta Z Z` on two qubits.
fn heisenberg_bond(delta: f64) -> CMatrix {
    let x = to_dynamic(&pauli_x());
    let y = to_dynamic(&pauli_y());
    let z = to_dynamic(&pauli_z());
    pp(&x, &x) + pp(&y, &y) + pp(&z, &z) * c(delta, 0.0)
}

/// Bond-alternating XXZ chain (open). Bond `(i, i+1)` carries `J` for even
/// `i` and `J'` for odd `i`, each times `X X + Y Y + delta Z Z`, plus a
/// pinning field `0.1 J Z_0`.
pub fn xxz_bond_alternating(n: usize, coupling: f64, coupling_alt: f64, delta: f64) -> HamiltonianSpec {
    let bond = heisenberg_bond(delta);
    let mut terms = Vec::new();
    for i in 0..n.saturating_sub(1) {
        let j = if i % 2 == 0 { coupling } else { coupling_alt };
        terms.push(LocalTerm::new(vec![i, i + 1], bond.clone(), j));
    }
    terms.push(LocalTerm::new(vec![0], to_dynamic(&pauli_z()), 0.1 * coupling));
    let spec = HamiltonianSpec {
        family_tag: FamilyTag::XxzBondAlternating,
        ..HamiltonianSpec::custom(n, 2, terms)
    };
    let ratio = if coupling != 0.0 { coupling_alt / coupling } else { 0.0 };
    with_params(spec, vec![ratio, delta], xxz_default_box())
}

fn xxz_default_box() -> ParamBox {
    ParamBox::new(vec![(0.0, 3.0), (0.0, 4.0)])
}

/// Spin-1 operators `(S^x, S^y, S^z)` in the basis `(|+1>, |0>, |-1>)`.
pub fn spin1_operators() -> (CMatrix, CMatrix, CMatrix) {
    let r = std::f64::consts::SQRT_2;
    let mut sp = CMatrix::zeros(3, 3);
    sp[(0, 1)] = c(r, 0.0);
    sp[(1, 2)] = c(r, 0.0);
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * c(0.5, 0.0);
    let sy = (&sp - &sm) * c(0.0, -0.5);
    let mut sz = CMatrix::zeros(3, 3);
    sz[(0, 0)] = c(1.0, 0.0);
    sz[(1, 1)] = ZERO;
    sz[(2, 2)] = c(-1.0, 0.0);
    (sx, sy, sz)
}

/// AKLT chain on a ring: `sum_i [S_i . S_{i+1} + (1/3)(S_i . S_{i+1})^2]`.
pub fn aklt_spin1(n: usize) -> HamiltonianSpec {
    let (sx, sy, sz) = spin1_operators();
    let dot = pp(&sx, &sx) + pp(&sy, &sy) + pp(&sz, &sz);
    let bond = &dot + (&dot * &dot) * c(1.0 / 3.0, 0.0);
    let bond = (&bond + bond.adjoint()) * c(0.5, 0.0);
    let terms = (0..n)
        .filter(|&i| n > 2 || i + 1 < n)
        .map(|i| LocalTerm::new(vec![i, (i + 1) % n], bond.clone(), 1.0))
        .collect();
    HamiltonianSpec {
        family_tag: FamilyTag::Aklt,
        ..HamiltonianSpec::custom(n, 3, terms)
    }
}

/// A family varied over a physical box, addressed by `x` in `[-1, 1]^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    /// Transverse field varied, coupling fixed.
    Tfim {
        n: usize,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default)]
        periodic: bool,
        field_box: (f64, f64),
    },
    /// `(Delta/Omega, R_b/a)` varied.
    Rydberg {
        n: usize,
        #[serde(default = "four")]
        range: usize,
        param_box: [(f64, f64); 2],
    },
    /// `(J'/J, delta)` varied with `J = 1`.
    Xxz { n: usize, param_box: [(f64, f64); 2] },
    /// `J'/J` varied at fixed `delta` with `J = 1`.
    XxzRatio {
        n: usize,
        delta: f64,
        ratio_box: (f64, f64),
    },
    /// Every edge coupling varied over `[0, 2]`.
    Heisenberg2d { lx: usize, ly: usize },
}

fn one() -> f64 {
    1.0
}

fn four() -> usize {
    4
}

impl Family {
    pub fn param_box(&self) -> ParamBox {
        match self {
            Family::Tfim { field_box, .. } => ParamBox::new(vec![*field_box]),
            Family::Rydberg { param_box, .. } | Family::Xxz { param_box, .. } => ParamBox::new(param_box.to_vec()),
            Family::XxzRatio { ratio_box, .. } => ParamBox::new(vec![*ratio_box]),
            Family::Heisenberg2d { lx, ly } => ParamBox::new(vec![(0.0, 2.0); lattice_edges(*lx, *ly).len()]),
        }
    }

    pub fn m(&self) -> usize {
        self.param_box().dim()
    }

    pub fn n(&self) -> usize {
        match self {
            Family::Tfim { n, .. } | Family::Rydberg { n, .. } | Family::Xxz { n, .. } | Family::XxzRatio { n, .. } => {
                *n
            }
            Family::Heisenberg2d { lx, ly } => lx * ly,
        }
    }

    /// Hamiltonian at normalized parameters `x`.
    pub fn spec_at(&self, x: &[f64]) -> Result<HamiltonianSpec> {
        let pbox = self.param_box();
        let p = pbox.to_physical(x)?;
        let mut spec = match self {
            Family::Tfim {
                n, coupling, periodic, ..
            } => tfim_family(*n, *coupling, p[0], *periodic),
            Family::Rydberg { n, range, .. } => rydberg_chain(*n, p[0], p[1], *range),
            Family::Xxz { n, .. } => xxz_bond_alternating(*n, 1.0, p[0], p[1]),
            Family::XxzRatio { n, delta, .. } => xxz_bond_alternating(*n, 1.0, p[0], *delta),
            Family::Heisenberg2d { lx, ly } => heisenberg2d(*lx, *ly, &p)?,
        };
        spec.params = x.to_vec();
        spec.physical_params = p;
        spec.physical_box = pbox.bounds;
        Ok(spec)
    }
}
