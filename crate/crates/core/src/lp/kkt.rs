use super::{LpProblem, LpSolution};
use serde::Serialize;

/// Scaled KKT violations of a claimed optimal solution.
///
/// Every measure is relative: residuals against `1 + |b_i|`, bound violations
/// against `1 + |bound|`, reduced costs against `1 + |c_j|` and the duality gap
/// against `1 + |c^T x|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktReport {
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    /// Largest mismatch between the reported `d` and `c - A^T y`.
    pub reduced_cost_mismatch: f64,
    pub tol: f64,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.primal_infeasibility <= self.tol
            && self.dual_infeasibility <= self.tol
            && self.complementarity <= self.tol
            && self.duality_gap <= self.tol
            && self.reduced_cost_mismatch <= self.tol
    }

    pub fn worst(&self) -> f64 {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.complementarity)
            .max(self.duality_gap)
            .max(self.reduced_cost_mismatch)
    }
}

pub fn verify_kkt(lp: &LpProblem, sol: &LpSolution, tol: f64) -> KktReport {
    let x = &sol.x;
    let y = &sol.y;
    let ax = lp.row_activity(x);
    let mut primal: f64 = 0.0;
    for (&a, &b) in ax.iter().zip(&lp.eq_rhs) {
        primal = primal.max((a - b).abs() / (1.0 + b.abs()));
    }
    for j in 0..lp.n_vars {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if l.is_finite() {
            primal = primal.max((l - x[j]) / (1.0 + l.abs()));
        }
        if u.is_finite() {
            primal = primal.max((x[j] - u) / (1.0 + u.abs()));
        }
    }

    let d = lp.reduced_costs(y);
    let mut mismatch: f64 = 0.0;
    if sol.d.len() == d.len() {
        for (a, b) in d.iter().zip(&sol.d) {
            mismatch = mismatch.max((a - b).abs() / (1.0 + a.abs()));
        }
    } else {
        mismatch = f64::INFINITY;
    }

    let mut dual_inf: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj: f64 = lp.eq_rhs.iter().zip(y).map(|(b, y)| b * y).sum();
    for j in 0..lp.n_vars {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let scale = 1.0 + lp.cost[j].abs();
        let dj = d[j];
        if dj > 0.0 {
            // priced as a lower-bound dual
            if l.is_finite() {
                dual_obj += l * dj;
                let gap = (x[j] - l).max(0.0) / (1.0 + l.abs());
                comp = comp.max(gap.min(dj / scale));
            } else {
                dual_inf = dual_inf.max(dj / scale);
            }
        } else if dj < 0.0 {
            if u.is_finite() {
                dual_obj += u * dj;
                let gap = (u - x[j]).max(0.0) / (1.0 + u.abs());
                comp = comp.max(gap.min(-dj / scale));
            } else {
                dual_inf = dual_inf.max(-dj / scale);
            }
        }
    }
    let primal_obj = lp.objective(x);
    let gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs());

    KktReport {
        primal_infeasibility: primal.max(0.0),
        dual_infeasibility: dual_inf,
        complementarity: comp,
        duality_gap: gap,
        reduced_cost_mismatch: mismatch,
        tol,
    }
}
