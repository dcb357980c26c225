//! Bounded-variable primal revised simplex.
//!
//! The basis is kept as a sparse LU factorization plus a product-form eta
//! file, refactorized every `refactor_every` pivots. Phase 1 minimizes the sum
//! of one artificial per row unless a feasible starting basis is supplied.

use super::lu::{Csc, SparseLu};
use super::{LpBackend, LpError, LpProblem, LpSolution, LpStatus, PivotRule, SolveOptions};

const NONE: usize = usize::MAX;

/// The built-in solver backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct RevisedSimplex;

impl LpBackend for RevisedSimplex {
    fn solve(&self, lp: &LpProblem, opts: &SolveOptions) -> Result<LpSolution, LpError> {
        lp.validate()?;
        Solver::new(lp, opts).run()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Nonbasic {
    Lower,
    Upper,
    Free,
}

#[derive(Debug, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

struct Solver<'a> {
    lp: &'a LpProblem,
    opts: &'a SolveOptions,
    m: usize,
    n: usize,
    a: Csc,
    art_rows: Vec<usize>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    state: Vec<Nonbasic>,
    lu: Option<SparseLu>,
    etas: Vec<Eta>,
    iterations: usize,
    max_iters: usize,
    degenerate_run: usize,
    y: Vec<f64>,
    alpha: Vec<f64>,
    cb: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a LpProblem, opts: &'a SolveOptions) -> Self {
        let (m, n) = (lp.n_eq, lp.n_vars);
        let a = Csc::from_triplets(m, n, &lp.eq_matrix);
        let total = n + m;
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, m));
        up.extend(std::iter::repeat_n(0.0, m));
        let max_iters = opts.max_iters.unwrap_or(10_000 + 20 * (m + n));
        Solver {
            lp,
            opts,
            m,
            n,
            a,
            art_rows: (0..m).collect(),
            art_sign: vec![1.0; m],
            lo,
            up,
            x: vec![0.0; total],
            cost: vec![0.0; total],
            basis: Vec::new(),
            pos: vec![NONE; total],
            state: vec![Nonbasic::Lower; total],
            lu: None,
            etas: Vec::new(),
            iterations: 0,
            max_iters,
            degenerate_run: 0,
            y: vec![0.0; m],
            alpha: vec![0.0; m],
            cb: vec![0.0; m],
            rhs: vec![0.0; m],
            work: vec![0.0; m],
        }
    }

    #[inline]
    fn column(&self, j: usize) -> (&[usize], &[f64]) {
        if j < self.n {
            self.a.col(j)
        } else {
            let i = j - self.n;
            (&self.art_rows[i..i + 1], &self.art_sign[i..i + 1])
        }
    }

    fn place_structurals_at_bounds(&mut self) {
        for j in 0..self.n {
            let (l, u) = (self.lo[j], self.up[j]);
            let (st, v) = if l.is_finite() {
                (Nonbasic::Lower, l)
            } else if u.is_finite() {
                (Nonbasic::Upper, u)
            } else {
                (Nonbasic::Free, 0.0)
            };
            self.state[j] = st;
            self.x[j] = v;
            self.pos[j] = NONE;
        }
    }

    /// Sets up an all-artificial basis. Returns whether phase 1 is needed.
    fn start_artificial(&mut self) {
        self.place_structurals_at_bounds();
        let mut resid = self.lp.eq_rhs.clone();
        for j in 0..self.n {
            let xj = self.x[j];
            if xj != 0.0 {
                let (r, v) = self.a.col(j);
                for (&i, &a) in r.iter().zip(v) {
                    resid[i] -= a * xj;
                }
            }
        }
        self.basis = (self.n..self.n + self.m).collect();
        for i in 0..self.m {
            let j = self.n + i;
            self.art_sign[i] = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
            self.x[j] = resid[i].abs();
            self.lo[j] = 0.0;
            self.up[j] = f64::INFINITY;
            self.pos[j] = i;
        }
    }

    /// Tries the caller's basis. Leaves artificials fixed at zero on success.
    fn start_from_hint(&mut self) -> bool {
        let Some(hint) = self.opts.hint.as_ref() else {
            return false;
        };
        if hint.basic.len() != self.m {
            return false;
        }
        self.place_structurals_at_bounds();
        for &j in &hint.at_upper {
            if j < self.n && self.up[j].is_finite() {
                self.state[j] = Nonbasic::Upper;
                self.x[j] = self.up[j];
            }
        }
        for i in 0..self.m {
            let j = self.n + i;
            self.art_sign[i] = 1.0;
            self.x[j] = 0.0;
            self.lo[j] = 0.0;
            self.up[j] = 0.0;
            self.pos[j] = NONE;
            self.state[j] = Nonbasic::Lower;
        }
        for (p, &j) in hint.basic.iter().enumerate() {
            if j >= self.n || self.pos[j] != NONE {
                return false;
            }
            self.pos[j] = p;
        }
        self.basis = hint.basic.clone();
        if self.refactor().is_err() {
            return false;
        }
        let tol = self.opts.feas_tol * 10.0;
        let feasible = self.basis.iter().all(|&j| {
            let v = self.x[j];
            v >= self.lo[j] - tol * self.lo[j].abs().max(1.0) && v <= self.up[j] + tol * self.up[j].abs().max(1.0)
        });
        if !feasible {
            for j in 0..self.n + self.m {
                self.pos[j] = NONE;
            }
        }
        feasible
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut colptr = Vec::with_capacity(m + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        colptr.push(0);
        let mut keys = Vec::with_capacity(m);
        for (p, &j) in self.basis.iter().enumerate() {
            let (r, v) = self.column(j);
            rows.extend_from_slice(r);
            vals.extend_from_slice(v);
            colptr.push(rows.len());
            keys.push((r.first().copied().unwrap_or(NONE), r.len(), p));
        }
        let b = Csc {
            nrows: m,
            ncols: m,
            colptr,
            rows,
            vals,
        };
        keys.sort_unstable();
        let order = keys.into_iter().map(|(_, _, p)| p).collect();
        let lu = SparseLu::factor(&b, order, 0.1, 1e-11).map_err(|e| LpError::Numerical(e.to_string()))?;
        self.lu = Some(lu);
        self.etas.clear();
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let mut rhs = self.lp.eq_rhs.clone();
        for j in 0..self.n + self.m {
            if self.pos[j] == NONE {
                let xj = self.x[j];
                if xj != 0.0 {
                    let (r, v) = self.column(j);
                    for (&i, &a) in r.iter().zip(v) {
                        rhs[i] -= a * xj;
                    }
                }
            }
        }
        let mut xb = vec![0.0; self.m];
        self.solve_basis(&rhs, &mut xb);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    /// `B z = rhs` including the eta file.
    fn solve_basis(&mut self, rhs: &[f64], z: &mut [f64]) {
        let lu = self.lu.as_ref().expect("factorized");
        lu.solve(rhs, z, &mut self.work);
        for eta in &self.etas {
            let zp = z[eta.pos] / eta.pivot;
            z[eta.pos] = zp;
            if zp != 0.0 {
                for &(i, a) in &eta.entries {
                    z[i] -= a * zp;
                }
            }
        }
    }

    fn ftran(&mut self, j: usize) {
        let (r, v) = if j < self.n {
            self.a.col(j)
        } else {
            let i = j - self.n;
            (&self.art_rows[i..i + 1], &self.art_sign[i..i + 1])
        };
        for (&i, &a) in r.iter().zip(v) {
            self.rhs[i] = a;
        }
        let rhs = std::mem::take(&mut self.rhs);
        let mut alpha = std::mem::take(&mut self.alpha);
        self.solve_basis(&rhs, &mut alpha);
        self.rhs = rhs;
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        self.alpha = alpha;
    }

    fn compute_duals(&mut self) {
        for (p, &j) in self.basis.iter().enumerate() {
            self.cb[p] = self.cost[j];
        }
        for eta in self.etas.iter().rev() {
            let mut s = self.cb[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * self.cb[i];
            }
            self.cb[eta.pos] = s / eta.pivot;
        }
        let lu = self.lu.as_ref().expect("factorized");
        lu.solve_transpose(&self.cb, &mut self.y, &mut self.work);
    }

    #[inline]
    fn reduced_cost(&self, j: usize) -> f64 {
        let (r, v) = self.column(j);
        let mut d = self.cost[j];
        for (&i, &a) in r.iter().zip(v) {
            d -= a * self.y[i];
        }
        d
    }

    /// Picks the entering column and its direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            if self.pos[j] != NONE || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = match self.state[j] {
                Nonbasic::Lower if d < -tol => 1.0,
                Nonbasic::Upper if d > tol => -1.0,
                Nonbasic::Free if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self, bland_only: bool) -> Result<PhaseEnd, LpError> {
        let ftol = self.opts.feas_tol;
        let ptol = self.opts.pivot_tol;
        let mut confirmed = false;
        loop {
            if self.etas.len() >= self.opts.refactor_every {
                self.refactor()?;
            }
            if self.iterations >= self.max_iters {
                return Ok(PhaseEnd::IterationLimit);
            }
            self.compute_duals();
            let bland = bland_only || self.degenerate_run >= self.opts.bland_after;
            let Some((q, dir)) = self.price(bland) else {
                // confirm optimality on a fresh factorization
                if !self.etas.is_empty() && !confirmed {
                    self.refactor()?;
                    confirmed = true;
                    continue;
                }
                return Ok(PhaseEnd::Optimal);
            };
            confirmed = false;
            self.ftran(q);

            // Harris two-pass ratio test
            let mut tmax = f64::INFINITY;
            for p in 0..self.m {
                let a = self.alpha[p];
                if a.abs() <= ptol {
                    continue;
                }
                let j = self.basis[p];
                let rate = -dir * a;
                let t = if rate < 0.0 {
                    if self.lo[j].is_finite() {
                        (self.x[j] - self.lo[j] + ftol) / -rate
                    } else {
                        continue;
                    }
                } else if self.up[j].is_finite() {
                    (self.up[j] - self.x[j] + ftol) / rate
                } else {
                    continue;
                };
                tmax = tmax.min(t);
            }
            let mut leave: Option<(usize, f64, bool)> = None; // (position, step, hits upper)
            let mut leave_key = 0.0f64;
            if tmax.is_finite() {
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a.abs() <= ptol {
                        continue;
                    }
                    let j = self.basis[p];
                    let rate = -dir * a;
                    let (t, upper) = if rate < 0.0 {
                        if !self.lo[j].is_finite() {
                            continue;
                        }
                        (((self.x[j] - self.lo[j]) / -rate).max(0.0), false)
                    } else {
                        if !self.up[j].is_finite() {
                            continue;
                        }
                        (((self.up[j] - self.x[j]) / rate).max(0.0), true)
                    };
                    if t > tmax {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((bp, _, _)) => {
                            if bland {
                                j < self.basis[bp]
                            } else {
                                a.abs() > leave_key
                            }
                        }
                    };
                    if better {
                        leave = Some((p, t, upper));
                        leave_key = a.abs();
                    }
                }
            }
            let range = self.up[q] - self.lo[q];
            let flip = match leave {
                None => range.is_finite(),
                Some((_, t, _)) => range.is_finite() && range <= t,
            };
            if leave.is_none() && !flip {
                return Ok(PhaseEnd::Unbounded);
            }
            self.iterations += 1;
            let step = if flip { range } else { leave.unwrap().1 };
            if step <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            if step != 0.0 {
                let delta = dir * step;
                self.x[q] += delta;
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        let j = self.basis[p];
                        self.x[j] -= delta * a;
                    }
                }
            }
            if flip {
                if dir > 0.0 {
                    self.state[q] = Nonbasic::Upper;
                    self.x[q] = self.up[q];
                } else {
                    self.state[q] = Nonbasic::Lower;
                    self.x[q] = self.lo[q];
                }
                continue;
            }
            let (p, _, upper) = leave.unwrap();
            let l = self.basis[p];
            if upper {
                self.x[l] = self.up[l];
                self.state[l] = Nonbasic::Upper;
            } else {
                self.x[l] = self.lo[l];
                self.state[l] = Nonbasic::Lower;
            }
            self.pos[l] = NONE;
            self.basis[p] = q;
            self.pos[q] = p;
            let pivot = self.alpha[p];
            let entries = self
                .alpha
                .iter()
                .enumerate()
                .filter(|&(i, &a)| i != p && a != 0.0)
                .map(|(i, &a)| (i, a))
                .collect();
            self.etas.push(Eta { pos: p, pivot, entries });
        }
    }

    fn finish(&self, status: LpStatus, y: Vec<f64>) -> LpSolution {
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let d = if status == LpStatus::Optimal {
            self.lp.reduced_costs(&y)
        } else {
            vec![0.0; self.n]
        };
        LpSolution {
            status,
            objective: self.lp.objective(&x),
            x,
            y,
            d,
            iterations: self.iterations,
            work: (self.iterations * self.m) as f64,
        }
    }

    fn run(mut self) -> Result<LpSolution, LpError> {
        let bland_only = self.opts.pivot_rule == PivotRule::Bland;
        if self.m == 0 {
            // only bounds: each variable sits at its cheapest bound
            self.place_structurals_at_bounds();
            for j in 0..self.n {
                let c = self.lp.cost[j];
                let v = if c > 0.0 {
                    self.lo[j]
                } else if c < 0.0 {
                    self.up[j]
                } else if self.lo[j].is_finite() {
                    self.lo[j]
                } else if self.up[j].is_finite() {
                    self.up[j]
                } else {
                    0.0
                };
                if !v.is_finite() {
                    return Ok(self.finish(LpStatus::Unbounded, Vec::new()));
                }
                self.x[j] = v;
            }
            return Ok(self.finish(LpStatus::Optimal, Vec::new()));
        }

        if !self.start_from_hint() {
            self.start_artificial();
            self.refactor()?;
            for j in 0..self.n + self.m {
                self.cost[j] = if j >= self.n { 1.0 } else { 0.0 };
            }
            match self.iterate(bland_only)? {
                PhaseEnd::IterationLimit => return Ok(self.finish(LpStatus::IterationLimit, vec![0.0; self.m])),
                PhaseEnd::Unbounded => {
                    return Err(LpError::Numerical("phase 1 reported an unbounded ray".into()));
                }
                PhaseEnd::Optimal => {}
            }
            let infeas: f64 = (self.n..self.n + self.m).map(|j| self.x[j].max(0.0)).sum();
            let bscale = self.lp.eq_rhs.iter().fold(1.0f64, |acc, b| acc.max(b.abs()));
            if infeas > 1e-7 * bscale {
                return Ok(self.finish(LpStatus::Infeasible, vec![0.0; self.m]));
            }
            for j in self.n..self.n + self.m {
                self.up[j] = 0.0;
                if self.pos[j] == NONE {
                    self.x[j] = 0.0;
                    self.state[j] = Nonbasic::Lower;
                }
            }
        }

        for j in 0..self.n + self.m {
            self.cost[j] = if j < self.n { self.lp.cost[j] } else { 0.0 };
        }
        self.degenerate_run = 0;
        match self.iterate(bland_only)? {
            PhaseEnd::IterationLimit => return Ok(self.finish(LpStatus::IterationLimit, vec![0.0; self.m])),
            PhaseEnd::Unbounded => return Ok(self.finish(LpStatus::Unbounded, vec![0.0; self.m])),
            PhaseEnd::Optimal => {}
        }
        self.compute_duals();
        let y = self.y.clone();

        if let Some(secondary) = self.opts.tie_break.as_ref() {
            if secondary.len() == self.n {
                // Restrict to the optimal face: nonbasic columns with a
                // nonzero reduced cost stay where they are.
                let tol = self.opts.opt_tol;
                for j in 0..self.n {
                    if self.pos[j] == NONE && self.reduced_cost(j).abs() > tol {
                        self.lo[j] = self.x[j];
                        self.up[j] = self.x[j];
                    }
                }
                self.cost[..self.n].copy_from_slice(&secondary[..self.n]);
                self.degenerate_run = 0;
                // an iteration limit here still leaves an optimal point
                let _ = self.iterate(bland_only)?;
            }
        }
        Ok(self.finish(LpStatus::Optimal, y))
    }
}
