use super::sparse::SparseMatrix;
use super::{default_dim_cap, HamiltonianSpec, LocalTerm};
use crate::error::Result;
use crate::linalg::{c, C64};

/// Assembles `sum_j c_j * embed(h_j)` as a sparse Hermitian matrix, using the
/// default dimension cap for the spec's local dimension.
pub fn build_matrix(spec: &HamiltonianSpec) -> Result<SparseMatrix> {
    build_matrix_with_cap(spec, default_dim_cap(spec.local_dim))
}

pub fn build_matrix_with_cap(spec: &HamiltonianSpec, cap: usize) -> Result<SparseMatrix> {
    let dim = spec.validate(cap)?;
    let strides = strides(spec.n, spec.local_dim);
    let mut triplets = Vec::new();
    for term in &spec.terms {
        embed_term(term, spec.local_dim, &strides, dim, &mut triplets);
    }
    Ok(SparseMatrix::from_triplets(dim, triplets))
}

/// Place values: site 0 is the most significant digit.
pub(crate) fn strides(n: usize, local_dim: usize) -> Vec<usize> {
    let mut s = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * local_dim;
    }
    s
}

/// Local index of basis state `b` restricted to `sites` (first site most significant).
#[inline]
pub(crate) fn local_index(b: usize, sites: &[usize], strides: &[usize], d: usize) -> usize {
    sites.iter().fold(0, |acc, &s| acc * d + (b / strides[s]) % d)
}

/// Basis state `b` with its digits on `sites` replaced by local index `local`.
#[inline]
pub(crate) fn replace_local(b: usize, sites: &[usize], strides: &[usize], d: usize, mut local: usize) -> usize {
    let mut out = b;
    for &s in sites.iter().rev() {
        let digit = local % d;
        local /= d;
        let old = (b / strides[s]) % d;
        out = out - old * strides[s] + digit * strides[s];
    }
    out
}

fn embed_term(term: &LocalTerm, d: usize, strides: &[usize], dim: usize, out: &mut Vec<(u32, u32, C64)>) {
    let k = term.matrix.nrows();
    // nonzero pattern per column of the local matrix
    let columns: Vec<Vec<(usize, C64)>> = (0..k)
        .map(|j| {
            (0..k)
                .filter_map(|i| {
                    let v = term.matrix[(i, j)] * c(term.coefficient, 0.0);
                    (v.norm() != 0.0).then_some((i, v))
                })
                .collect()
        })
        .collect();
    for b in 0..dim {
        let j = local_index(b, &term.sites, strides, d);
        for &(i, v) in &columns[j] {
            let row = replace_local(b, &term.sites, strides, d, i);
            out.push((row as u32, b as u32, v));
        }
    }
}
