//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Factors `P B Q = L U` where `B` is a square matrix given column-wise,
//! `Q` is a caller-chosen column order and `P` is picked during elimination.
//! The triangular solves in the factorization use a depth-first reach over
//! the partial `L` graph, so the cost is proportional to the flops performed
//! rather than to the dimension.

use std::fmt;

/// Compressed sparse column matrix.
#[derive(Clone, Debug, Default)]
pub struct Csc {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rows: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csc {
    /// Builds from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(_, c, _) in triplets {
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }
        // sort within columns and merge duplicates
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        colptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(r, _)| r);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut v = 0.0;
                while i < scratch.len() && scratch[i].0 == r {
                    v += scratch[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    out_rows.push(r);
                    out_vals.push(v);
                }
            }
            colptr.push(out_rows.len());
        }
        Csc {
            nrows,
            ncols,
            colptr,
            rows: out_rows,
            vals: out_vals,
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.colptr[j], self.colptr[j + 1]);
        (&self.rows[a..b], &self.vals[a..b])
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singular {
    /// Elimination step at which no acceptable pivot was found.
    pub step: usize,
}

impl fmt::Display for Singular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "matrix is numerically singular at elimination step {}", self.step)
    }
}

#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    // unit lower factor without its diagonal; row indices in pivot order
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    // upper factor without its diagonal; row indices in pivot order
    u_colptr: Vec<usize>,
    u_rows: Vec<usize>,
    u_vals: Vec<f64>,
    u_diag: Vec<f64>,
    /// original row -> pivot step
    pinv: Vec<usize>,
    /// pivot step -> column of the factored matrix
    q: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl SparseLu {
    /// Factors the square matrix `b` taking columns in the order `q`.
    ///
    /// `threshold` in (0, 1] controls partial pivoting: among candidates whose
    /// magnitude is at least `threshold` times the column maximum, the one
    /// with the smallest original row index is chosen.
    pub fn factor(b: &Csc, q: Vec<usize>, threshold: f64, abs_tol: f64) -> Result<Self, Singular> {
        let n = b.ncols;
        assert_eq!(b.nrows, n, "LU requires a square matrix");
        assert_eq!(q.len(), n);

        let mut l_colptr = Vec::with_capacity(n + 1);
        let mut l_rows: Vec<usize> = Vec::with_capacity(b.nnz() + n);
        let mut l_vals: Vec<f64> = Vec::with_capacity(b.nnz() + n);
        let mut u_colptr = Vec::with_capacity(n + 1);
        let mut u_rows: Vec<usize> = Vec::with_capacity(b.nnz());
        let mut u_vals: Vec<f64> = Vec::with_capacity(b.nnz());
        let mut u_diag = vec![0.0; n];
        let mut pinv = vec![NONE; n];

        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut marked = vec![false; n];

        for k in 0..n {
            l_colptr.push(l_rows.len());
            u_colptr.push(u_rows.len());
            let (brows, bvals) = b.col(q[k]);

            // symbolic: reach of the column's pattern through the partial L
            let mut top = n;
            for &i in brows {
                if !marked[i] {
                    top = dfs(
                            i, top, &mut xi, &mut stack, &mut pstack, &mut marked, &l_colptr, &l_rows, &pinv,
                    );
                }
            }
            for &j in &xi[top..n] {
                marked[j] = false;
                x[j] = 0.0;
            }
            for (&i, &v) in brows.iter().zip(bvals) {
                x[i] = v;
            }
            // numeric: sparse forward substitution
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                // first entry of each stored L column is the unit diagonal
                for p in l_colptr[jj] + 1..l_colptr[jj + 1] {
                    x[l_rows[p]] -= l_vals[p] * xj;
                }
            }

            let mut max_abs = 0.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    max_abs = max_abs.max(x[i].abs());
                }
            }
            if max_abs <= abs_tol {
                return Err(Singular { step: k });
            }
            let mut ipiv = NONE;
            for &i in &xi[top..n] {
                if pinv[i] == NONE && x[i].abs() >= threshold * max_abs && (ipiv == NONE || i < ipiv) {
                    ipiv = i;
                }
            }
            let pivot = x[ipiv];
            for &i in &xi[top..n] {
                let jj = pinv[i];
                if jj != NONE && x[i] != 0.0 {
                    u_rows.push(jj);
                    u_vals.push(x[i]);
                }
            }
            u_diag[k] = pivot;
            pinv[ipiv] = k;
            l_rows.push(ipiv);
            l_vals.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE && x[i] != 0.0 {
                    l_rows.push(i);
                    l_vals.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_colptr.push(l_rows.len());
        u_colptr.push(u_rows.len());

        // strip unit diagonals and renumber L rows into pivot order
        let mut lc = Vec::with_capacity(n + 1);
        let mut lr = Vec::with_capacity(l_rows.len() - n);
        let mut lv = Vec::with_capacity(l_rows.len() - n);
        lc.push(0);
        for k in 0..n {
            for p in l_colptr[k] + 1..l_colptr[k + 1] {
                lr.push(pinv[l_rows[p]]);
                lv.push(l_vals[p]);
            }
            lc.push(lr.len());
        }

        Ok(SparseLu {
            n,
            l_colptr: lc,
            l_rows: lr,
            l_vals: lv,
            u_colptr,
            u_rows,
            u_vals,
            u_diag,
            pinv,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.l_rows.len() + self.u_rows.len() + self.n
    }

    /// Solves `B z = rhs`. `rhs` is indexed by row, `z` by column of `B`.
    /// `work` must have length n; it is left zeroed.
    pub fn solve(&self, rhs: &[f64], z: &mut [f64], work: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            work[self.pinv[i]] = rhs[i];
        }
        for k in 0..n {
            let wk = work[k];
            if wk != 0.0 {
                for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                    work[self.l_rows[p]] -= self.l_vals[p] * wk;
                }
            }
        }
        for k in (0..n).rev() {
            let wk = work[k] / self.u_diag[k];
            work[k] = wk;
            if wk != 0.0 {
                for p in self.u_colptr[k]..self.u_colptr[k + 1] {
                    work[self.u_rows[p]] -= self.u_vals[p] * wk;
                }
            }
        }
        for k in 0..n {
            z[self.q[k]] = work[k];
            work[k] = 0.0;
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by column of `B`, `y` by row.
    pub fn solve_transpose(&self, c: &[f64], y: &mut [f64], work: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            work[k] = c[self.q[k]];
        }
        for k in 0..n {
            let mut s = work[k];
            for p in self.u_colptr[k]..self.u_colptr[k + 1] {
                s -= self.u_vals[p] * work[self.u_rows[p]];
            }
            work[k] = s / self.u_diag[k];
        }
        for k in (0..n).rev() {
            let mut s = work[k];
            for p in self.l_colptr[k]..self.l_colptr[k + 1] {
                s -= self.l_vals[p] * work[self.l_rows[p]];
            }
            work[k] = s;
        }
        for i in 0..n {
            y[i] = work[self.pinv[i]];
        }
        work.iter_mut().for_each(|w| *w = 0.0);
    }
}

/// Iterative depth-first search from `start` over the graph of the partial L
/// factor; finished nodes are pushed onto `xi[..top]` from the back.
#[allow(clippy::too_many_arguments)]
fn dfs(
    start: usize,
    mut top: usize,
    xi: &mut [usize],
    stack: &mut [usize],
    pstack: &mut [usize],
    marked: &mut [bool],
    l_colptr: &[usize],
    l_rows: &[usize],
    pinv: &[usize],
) -> usize {
    let mut head = 0usize;
    stack[0] = start;
    loop {
        let j = stack[head];
        let jj = pinv[j];
        if !marked[j] {
            marked[j] = true;
            pstack[head] = if jj == NONE { 0 } else { l_colptr[jj] };
        }
        let mut done = true;
        if jj != NONE {
            let end = l_colptr[jj + 1];
            let mut p = pstack[head];
            while p < end {
                let i = l_rows[p];
                p += 1;
                if !marked[i] {
                    pstack[head] = p;
                    head += 1;
                    stack[head] = i;
                    done = false;
                    break;
                }
            }
            if done {
                pstack[head] = end;
            }
        }
        if done {
            top -= 1;
            xi[top] = j;
            if head == 0 {
                return top;
            }
            head -= 1;
        }
    }
}
