//! Parameterized local Hamiltonians on qudit chains and lattices, exact
//! ground states, and randomized Pauli measurement sampling.

mod build;
mod eigen;
mod families;
mod measure;
mod sparse;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermiticity_defect, CMatrix};

pub use build::{build_matrix, build_matrix_with_cap};
pub use eigen::{ground_multiplet, ground_state, ground_state_with, EigenConfig, GroundStateResult, Multiplet};
pub use families::{
    aklt_spin1, heisenberg2d, heisenberg2d_random, lattice_edges, rydberg_chain, spin1_operators, tfim_family,
    xxz_bond_alternating, Family, ParamBox,
};
pub use measure::{measure_in_basis, sample_shadow, sample_shadow_mixture, Pauli};
pub use sparse::SparseMatrix;
pub use state::{apply_local, exact_expectation, exact_rdm, exact_rdm_mixture, StateVector, DEFAULT_RDM_CAP};

/// Default cap on the Hilbert dimension for qubit systems (2^14).
pub const DEFAULT_QUBIT_DIM_CAP: usize = 1 << 14;
/// Default cap on the Hilbert dimension for higher local dimensions (3^10).
pub const DEFAULT_QUDIT_DIM_CAP: usize = 59_049;

/// Hermiticity tolerance for term matrices (max-entry norm).
pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) fn default_dim_cap(local_dim: usize) -> usize {
    if local_dim == 2 {
        DEFAULT_QUBIT_DIM_CAP
    } else {
        DEFAULT_QUDIT_DIM_CAP
    }
}

/// `local_dim^n`, or `None` on overflow.
pub(crate) fn hilbert_dim(n: usize, local_dim: usize) -> Option<usize> {
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(local_dim)?;
    }
    Some(dim)
}

/// A Hermitian operator acting on an ordered list of sites, scaled by a real
/// coefficient. The first listed site is the most significant tensor factor.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub matrix: CMatrix,
    pub coefficient: f64,
}

impl LocalTerm {
    pub fn new(sites: Vec<usize>, matrix: CMatrix, coefficient: f64) -> Self {
        Self {
            sites,
            matrix,
            coefficient,
        }
    }

    /// Checks the term against a system of `n` sites with local dimension `local_dim`.
    pub fn validate(&self, n: usize, local_dim: usize) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::BadTerm("term acts on no sites".into()));
        }
        for (k, &s) in self.sites.iter().enumerate() {
            if s >= n {
                return Err(Error::BadTerm(format!("site {s} out of range for {n} sites")));
            }
            if self.sites[..k].contains(&s) {
                return Err(Error::BadTerm(format!("site {s} listed twice")));
            }
        }
        let expected = hilbert_dim(self.sites.len(), local_dim)
            .ok_or_else(|| Error::BadTerm("term dimension overflows".into()))?;
        if self.matrix.nrows() != expected || self.matrix.ncols() != expected {
            return Err(Error::BadTerm(format!(
                "matrix is {}x{}, expected {expected}x{expected}",
                self.matrix.nrows(),
                self.matrix.ncols()
            )));
        }
        let defect = hermiticity_defect(&self.matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::BadTerm(format!("matrix is not Hermitian (defect {defect:e})")));
        }
        if !self.coefficient.is_finite() {
            return Err(Error::BadTerm("coefficient is not finite".into()));
        }
        Ok(())
    }
}

/// Named Hamiltonian families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Tfim,
    RydbergChain,
    Heisenberg2d,
    XxzBondAlternating,
    Aklt,
    Custom,
}

/// A Hamiltonian `H(x) = sum_j c_j h_j` together with the parameters that
/// produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub local_dim: usize,
    pub terms: Vec<LocalTerm>,
    pub family_tag: FamilyTag,
    /// Parameters normalized into `[-1, 1]^m`.
    pub params: Vec<f64>,
    /// The same parameters in physical units.
    pub physical_params: Vec<f64>,
    /// Physical box that maps affinely onto `[-1, 1]^m`.
    pub physical_box: Vec<(f64, f64)>,
}

impl HamiltonianSpec {
    /// A custom Hamiltonian with no family parameters.
    pub fn custom(n: usize, local_dim: usize, terms: Vec<LocalTerm>) -> Self {
        Self {
            n,
            local_dim,
            terms,
            family_tag: FamilyTag::Custom,
            params: Vec::new(),
            physical_params: Vec::new(),
            physical_box: Vec::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        hilbert_dim(self.n, self.local_dim)
    }

    pub fn validate(&self, cap: usize) -> Result<usize> {
        if self.local_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "local dimension {} < 2",
                self.local_dim
            )));
        }
        let dim = match self.dim() {
            Some(d) if d <= cap => d,
            _ => {
                return Err(Error::DimensionCap {
                    n: self.n,
                    local_dim: self.local_dim,
                    cap,
                })
            }
        };
        for term in &self.terms {
            term.validate(self.n, self.local_dim)?;
        }
        Ok(dim)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SpecDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// JSON form of a term: the matrix is stored row-major as `[re, im]` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub sites: Vec<usize>,
    pub matrix: Vec<[f64; 2]>,
    pub coefficient: f64,
}

impl From<&LocalTerm> for TermDoc {
    fn from(t: &LocalTerm) -> Self {
        let d = t.matrix.nrows();
        let mut matrix = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = t.matrix[(i, j)];
                matrix.push([z.re, z.im]);
            }
        }
        Self {
            sites: t.sites.clone(),
            matrix,
            coefficient: t.coefficient,
        }
    }
}

impl TryFrom<TermDoc> for LocalTerm {
    type Error = Error;

    fn try_from(doc: TermDoc) -> Result<Self> {
        let len = doc.matrix.len();
        let d = (len as f64).sqrt().round() as usize;
        if d * d != len {
            return Err(Error::BadTerm(format!("matrix has {len} entries, not a square")));
        }
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            let [re, im] = doc.matrix[i * d + j];
            c(re, im)
        });
        Ok(LocalTerm::new(doc.sites, matrix, doc.coefficient))
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    n: usize,
    local_dim: usize,
    family_tag: FamilyTag,
    params: Vec<f64>,
    #[serde(default)]
    physical_params: Vec<f64>,
    physical_box: Vec<(f64, f64)>,
    terms: Vec<TermDoc>,
}

impl From<&HamiltonianSpec> for SpecDoc {
    fn from(s: &HamiltonianSpec) -> Self {
        Self {
            n: s.n,
            local_dim: s.local_dim,
            family_tag: s.family_tag,
            params: s.params.clone(),
            physical_params: s.physical_params.clone(),
            physical_box: s.physical_box.clone(),
            terms: s.terms.iter().map(TermDoc::from).collect(),
        }
    }
}

impl TryFrom<SpecDoc> for HamiltonianSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        let terms = doc
            .terms
            .into_iter()
            .map(LocalTerm::try_from)
            .collect::<Result<Vec<_>>>()?;
        let spec = HamiltonianSpec {
            n: doc.n,
            local_dim: doc.local_dim,
            terms,
            family_tag: doc.family_tag,
            params: doc.params,
            physical_params: doc.physical_params,
            physical_box: doc.physical_box,
        };
        for t in &spec.terms {
            t.validate(spec.n, spec.local_dim)?;
        }
        Ok(spec)
    }
}
