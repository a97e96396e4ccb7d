use crate::linalg::{CMatrix, C64, ZERO};

/// Compressed-sparse-row complex matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(u32, u32, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<u32> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match (rows.last(), col_idx.last()) {
                (Some(&lr), Some(&lc)) if lr == r && lc == c => {
                    *values.last_mut().unwrap() += v;
                }
                _ => {
                    rows.push(r);
                    col_idx.push(c);
                    values.push(v);
                }
            }
        }
        // drop cancelled entries
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&(col as u32)) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    /// `out = self * v`.
    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.values[k] * v[self.col_idx[k] as usize];
            }
            *o = acc;
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.matvec_into(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.col_idx[k] as usize)] = self.values[k];
            }
        }
        m
    }

    /// Max absolute row sum, an upper bound on the spectral norm for
    /// Hermitian matrices.
    pub fn norm_estimate(&self) -> f64 {
        (0..self.dim)
            .map(|row| {
                (self.row_ptr[row]..self.row_ptr[row + 1])
                    .map(|k| self.values[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Largest entry of `|M - M^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in 0..self.dim {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[k] as usize;
                worst = worst.max((self.values[k] - self.get(col, row).conj()).norm());
            }
        }
        worst
    }

    /// Iterator over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |row| {
            (self.row_ptr[row]..self.row_ptr[row + 1]).map(move |k| (row, self.col_idx[k] as usize, self.values[k]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn triplets_merge_and_cancel() {
        let m = SparseMatrix::from_triplets(
            2,
            vec![
                (0, 0, c(1.0, 0.0)),
                (0, 0, c(2.0, 0.0)),
                (1, 0, c(1.0, 0.0)),
                (1, 0, c(-1.0, 0.0)),
                (0, 1, c(0.0, 1.0)),
            ],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), c(3.0, 0.0));
        assert_eq!(m.get(1, 0), ZERO);
        assert_eq!(m.matvec(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(3.0, 1.0), ZERO]);
    }
}
