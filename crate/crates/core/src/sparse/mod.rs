//! Sparse assembly and direct LU solution of the linearized MNA system.

mod lu;
mod ordering;

pub use lu::{LuFactors, LuSolver, SolveStats};
pub use ordering::minimum_degree;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {n}x{n} system")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is singular (no usable pivot for column {column})")]
    Singular { column: usize },
    #[error("solve residual {residual:.3e} above tolerance after refinement")]
    Inaccurate { residual: f64 },
}

/// Square matrix in compressed-column form.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(n: usize) -> Self {
        CscMatrix {
            n,
            col_ptr: vec![0; n + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p]][j] = self.values[p];
            }
        }
        d
    }

    /// Same structure, ignoring values.
    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.n == other.n && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }

    /// MatrixMarket coordinate text, 1-based.
    pub fn write_matrix_market(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                writeln!(out, "{} {} {:.17e}", self.row_idx[p] + 1, j + 1, self.values[p])?;
            }
        }
        out.flush()
    }
}

/// Assembled matrix with its dense right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    pub matrix: CscMatrix,
    pub rhs: Vec<f64>,
}

/// Sum triplets into compressed-column form. Duplicates are added in input
/// order; entries that sum to zero stay in the pattern.
pub fn assemble(triplets: &[(usize, usize, f64)], rhs: &[(usize, f64)], n: usize) -> Result<SparseSystem, SparseError> {
    for &(row, col, v) in triplets {
        if row >= n || col >= n {
            return Err(SparseError::IndexOutOfRange { row, col, n });
        }
        if !v.is_finite() {
            return Err(SparseError::NonFinite { row, col });
        }
    }
    let mut b = vec![0.0; n];
    for &(row, v) in rhs {
        if row >= n {
            return Err(SparseError::IndexOutOfRange { row, col: 0, n });
        }
        if !v.is_finite() {
            return Err(SparseError::NonFinite { row, col: 0 });
        }
        b[row] += v;
    }

    // Counting sort by column, then a stable sort by row inside each column.
    let mut counts = vec![0usize; n + 1];
    for &(_, col, _) in triplets {
        counts[col + 1] += 1;
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let mut next = counts.clone();
    let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
    for &(row, col, v) in triplets {
        bucket[next[col]] = (row, v);
        next[col] += 1;
    }

    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::with_capacity(triplets.len());
    let mut values = Vec::with_capacity(triplets.len());
    col_ptr.push(0);
    for j in 0..n {
        let col = &mut bucket[counts[j]..counts[j + 1]];
        col.sort_by_key(|e| e.0);
        for &(row, v) in col.iter() {
            if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == row {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(row);
                values.push(v);
            }
        }
        col_ptr.push(row_idx.len());
    }
    Ok(SparseSystem {
        matrix: CscMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        },
        rhs: b,
    })
}

/// One-shot factorization and solve with a fresh ordering.
pub fn factor_solve(system: &SparseSystem) -> Result<Vec<f64>, SparseError> {
    LuSolver::new().solve(system).map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let s = assemble(&[(0, 0, 1.0), (0, 0, 2.0)], &[], 1).unwrap();
        assert_eq!(s.matrix.get(0, 0), 3.0);
        assert_eq!(s.matrix.nnz(), 1);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let s = assemble(&[], &[], 4).unwrap();
        assert_eq!(s.matrix, CscMatrix::zeros(4));
    }

    #[test]
    fn out_of_range_and_non_finite_rejected() {
        assert!(matches!(assemble(&[(3, 0, 1.0)], &[], 3), Err(SparseError::IndexOutOfRange { .. })));
        assert!(matches!(assemble(&[(0, 0, f64::NAN)], &[], 3), Err(SparseError::NonFinite { .. })));
    }

    #[test]
    fn structural_zero_kept() {
        let s = assemble(&[(1, 0, 1.0), (1, 0, -1.0)], &[], 2).unwrap();
        assert_eq!(s.matrix.nnz(), 1);
    }

    #[test]
    fn identity_solve() {
        let s = SparseSystem {
            matrix: CscMatrix::identity(5),
            rhs: vec![1.0, 0.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(factor_solve(&s).unwrap(), s.rhs);
    }

    #[test]
    fn structurally_singular_reported() {
        // Column 1 is empty.
        let s = assemble(&[(0, 0, 1.0), (1, 0, 2.0)], &[(0, 1.0)], 2).unwrap();
        assert!(matches!(factor_solve(&s), Err(SparseError::Singular { .. })));
    }

    #[test]
    fn matrix_market_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        let s = assemble(&[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 3.0)], &[], 2).unwrap();
        s.matrix.write_matrix_market(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 2 3");
        assert!(lines[3].starts_with("2 1 -1"));
    }
}
