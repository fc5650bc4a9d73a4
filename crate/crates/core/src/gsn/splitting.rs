//! Block splitting J = M - N of a bordered block-diagonal matrix, its
//! iteration spectral radius and the row dominance check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::sparse::CscMatrix;

/// Default weight of the diagonal augmentation.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct Splitting {
    /// Block-diagonal part of J.
    pub d: DMatrix<f64>,
    /// Off-block part of J.
    pub e: DMatrix<f64>,
    /// Diagonal with `e_bar[i][i] = alpha * sum_j e[i][j]`.
    pub e_bar: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

/// Block of every row for consecutive blocks of the given sizes.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &len)| std::iter::repeat_n(b, len))
        .collect()
}

/// Split `j` by the block labels of its rows and columns:
/// `M = D + Ē`, `N = Ē - E`, so `M - N = J`.
pub fn build_augmented_splitting(j: &DMatrix<f64>, blocks: &[usize], alpha: f64) -> Splitting {
    let n = j.nrows();
    assert_eq!(j.ncols(), n, "square matrix");
    assert_eq!(blocks.len(), n, "one block label per row");
    let mut d = DMatrix::zeros(n, n);
    let mut e = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            if blocks[r] == blocks[c] {
                d[(r, c)] = j[(r, c)];
            } else {
                e[(r, c)] = j[(r, c)];
            }
        }
    }
    let e_bar = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| alpha * e.row(i).sum()));
    let m = &d + &e_bar;
    let nn = &e_bar - &e;
    Splitting { d, e, e_bar, m, n: nn }
}

impl Splitting {
    /// Spectral radius of `M⁻¹N`, or `None` when `M` is singular.
    pub fn spectral_radius(&self) -> Option<f64> {
        let inv = self.m.clone().try_inverse()?;
        let g = inv * &self.n;
        Some(g.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// `M + N`, whose strict dominance is the sufficient condition checked here.
    pub fn sum(&self) -> DMatrix<f64> {
        &self.m + &self.n
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDominance {
    pub row: usize,
    pub diagonal: f64,
    pub off_diagonal: f64,
    /// `off_diagonal - |diagonal|`; a row is strictly dominant when this is negative.
    pub margin: f64,
}

impl RowDominance {
    pub fn dominant(&self) -> bool {
        self.margin < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub rows: Vec<RowDominance>,
    pub dominant: bool,
}

impl DominanceReport {
    pub fn violations(&self) -> impl Iterator<Item = &RowDominance> {
        self.rows.iter().filter(|r| !r.dominant())
    }

    fn from_rows(rows: Vec<RowDominance>) -> Self {
        let dominant = rows.iter().all(RowDominance::dominant);
        DominanceReport { rows, dominant }
    }
}

/// Strict row diagonal dominance of a dense matrix.
pub fn check_diagonal_dominance(a: &DMatrix<f64>) -> DominanceReport {
    let rows = (0..a.nrows())
        .map(|r| {
            let diagonal = a[(r, r)];
            let off_diagonal: f64 = (0..a.ncols()).filter(|&c| c != r).map(|c| a[(r, c)].abs()).sum();
            RowDominance {
                row: r,
                diagonal,
                off_diagonal,
                margin: off_diagonal - diagonal.abs(),
            }
        })
        .collect();
    DominanceReport::from_rows(rows)
}

/// [`check_diagonal_dominance`] on a sparse matrix without densifying it.
pub fn check_diagonal_dominance_sparse(a: &CscMatrix) -> DominanceReport {
    let mut diagonal = vec![0.0; a.n];
    let mut off = vec![0.0; a.n];
    for c in 0..a.n {
        for k in a.col_ptr[c]..a.col_ptr[c + 1] {
            let r = a.row_idx[k];
            if r == c {
                diagonal[r] += a.values[k];
            } else {
                off[r] += a.values[k].abs();
            }
        }
    }
    let rows = (0..a.n)
        .map(|r| RowDominance {
            row: r,
            diagonal: diagonal[r],
            off_diagonal: off[r],
            margin: off[r] - diagonal[r].abs(),
        })
        .collect();
    DominanceReport::from_rows(rows)
}

/// Dense copy of a sparse matrix.
pub fn to_dmatrix(a: &CscMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n, a.n);
    for c in 0..a.n {
        for k in a.col_ptr[c]..a.col_ptr[c + 1] {
            m[(a.row_idx[k], c)] += a.values[k];
        }
    }
    m
}
