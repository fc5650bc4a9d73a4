//! Left-looking sparse LU with threshold partial pivoting (Gilbert-Peierls).

use super::ordering::minimum_degree;
use super::{CscMatrix, SparseError, SparseSystem};

/// Prefer the diagonal entry when it is at least this fraction of the column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Pivots below this fraction of the largest matrix entry count as zero.
const SINGULAR_RELATIVE: f64 = 1e-14;
const REFINE_STEPS: usize = 3;
const RESIDUAL_TARGET: f64 = 1e-10;

/// `P A Q = L U` with unit-lower `L` (diagonal stored first in each column)
/// and upper `U` (diagonal stored last).
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Original row -> pivot step.
    pinv: Vec<usize>,
    /// Pivot step -> original column.
    q: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &CscMatrix, q: &[usize]) -> Result<Self, SparseError> {
        let n = a.n;
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = SINGULAR_RELATIVE * scale.max(f64::MIN_POSITIVE);

        let mut l_ptr = vec![0usize; n + 1];
        let mut l_idx = Vec::with_capacity(a.nnz() * 2);
        let mut l_val = Vec::with_capacity(a.nnz() * 2);
        let mut u_ptr = vec![0usize; n + 1];
        let mut u_idx = Vec::with_capacity(a.nnz() * 2);
        let mut u_val = Vec::with_capacity(a.nnz() * 2);
        const NONE: usize = usize::MAX;
        let mut pinv = vec![NONE; n];

        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack: Vec<(usize, usize)> = Vec::with_capacity(n);

        for k in 0..n {
            let col = q[k];
            l_ptr[k] = l_idx.len();
            u_ptr[k] = u_idx.len();

            // Reach of A(:, col) in the graph of L, in topological order in xi[top..].
            let mut top = n;
            for p in a.col_ptr[col]..a.col_ptr[col + 1] {
                let start = a.row_idx[p];
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, 0));
                while let Some(&(j, mut next)) = stack.last() {
                    let jcol = pinv[j];
                    let mut child = None;
                    if jcol != NONE {
                        let (lo, hi) = (l_ptr[jcol] + 1, l_ptr[jcol + 1]);
                        while lo + next < hi {
                            let i = l_idx[lo + next];
                            next += 1;
                            if mark[i] != k {
                                child = Some(i);
                                break;
                            }
                        }
                    }
                    match child {
                        Some(i) => {
                            stack.last_mut().expect("non-empty").1 = next;
                            mark[i] = k;
                            stack.push((i, 0));
                        }
                        None => {
                            stack.pop();
                            top -= 1;
                            xi[top] = j;
                        }
                    }
                }
            }

            // Sparse triangular solve L x = A(:, col).
            for &i in &xi[top..n] {
                x[i] = 0.0;
            }
            for p in a.col_ptr[col]..a.col_ptr[col + 1] {
                x[a.row_idx[p]] += a.values[p];
            }
            for px in top..n {
                let j = xi[px];
                let jcol = pinv[j];
                if jcol == NONE {
                    continue;
                }
                let xj = x[j];
                for p in l_ptr[jcol] + 1..l_ptr[jcol + 1] {
                    x[l_idx[p]] -= l_val[p] * xj;
                }
            }

            // Pivot among rows not yet pivoted.
            let mut ipiv = NONE;
            let mut best = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let v = x[i].abs();
                    if v > best {
                        best = v;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || !(best > tiny) || !best.is_finite() {
                return Err(SparseError::Singular { column: col });
            }
            if pinv[col] == NONE && mark[col] == k && x[col].abs() >= PIVOT_THRESHOLD * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
            }
        }
        l_ptr[n] = l_idx.len();
        u_ptr[n] = u_idx.len();
        for i in l_idx.iter_mut() {
            *i = pinv[*i];
        }
        Ok(LuFactors {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            pinv,
            q: q.to_vec(),
        })
    }

    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.pinv[i]] = b[i];
        }
        for j in 0..n {
            let yj = y[j];
            for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                y[self.l_idx[p]] -= self.l_val[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[last];
            let yj = y[j];
            for p in self.u_ptr[j]..last {
                y[self.u_idx[p]] -= self.u_val[p] * yj;
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        x
    }
}

/// Diagnostics from one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// `‖Ax − b‖∞ / max(1, ‖b‖∞)` after refinement.
    pub residual: f64,
    pub refinements: usize,
    pub ordering_reused: bool,
    pub fill: usize,
}

/// LU solver that keeps the fill-reducing ordering while the pattern is unchanged.
#[derive(Clone, Debug, Default)]
pub struct LuSolver {
    cached: Option<(CscMatrix, Vec<usize>)>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl LuSolver {
    pub fn new() -> Self {
        LuSolver::default()
    }

    pub fn solve(&mut self, system: &SparseSystem) -> Result<(Vec<f64>, SolveStats), SparseError> {
        let a = &system.matrix;
        let b = &system.rhs;
        let reused = matches!(&self.cached, Some((pattern, _)) if pattern.same_pattern(a));
        if !reused {
            let q = minimum_degree(a);
            let pattern = CscMatrix {
                values: Vec::new(),
                ..a.clone()
            };
            self.cached = Some((pattern, q));
        }
        let q = &self.cached.as_ref().expect("ordering cached").1;
        let lu = LuFactors::factor(a, q)?;

        let mut x = lu.solve(b);
        let scale = inf_norm(b).max(1.0);
        let mut residual = f64::INFINITY;
        let mut refinements = 0;
        for step in 0..=REFINE_STEPS {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            residual = inf_norm(&r) / scale;
            if !residual.is_finite() {
                return Err(SparseError::Singular { column: 0 });
            }
            if residual <= RESIDUAL_TARGET || step == REFINE_STEPS {
                break;
            }
            let dx = lu.solve(&r);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            refinements += 1;
        }
        if residual > RESIDUAL_TARGET {
            return Err(SparseError::Inaccurate { residual });
        }
        Ok((
            x,
            SolveStats {
                residual,
                refinements,
                ordering_reused: reused,
                fill: lu.fill(),
            },
        ))
    }
}
