//! The storage/VRE co-scheduling LP over a set of weighted representative
//! periods.
//!
//! Columns are laid out period by period as `[p_t, p_v, p_ns, p_c, p_d, e]`.
//! Rows alternate `balance_r, soc_r`, followed by a single `soc_final` row
//! pinning the last state of charge to `E_min`.

use crate::data::{CaseConfig, RepPeriodSeries};
use crate::lp::{self, BasisHint, LpProblem, LpSolution, LpStatus, SolveOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("no representative periods")]
    Empty,
    #[error("period {0} has zero weight")]
    ZeroWeight(usize),
    #[error("solution status is {0:?}, expected Optimal")]
    NotOptimal(LpStatus),
    #[error("period {period}: power balance residual {residual} exceeds tolerance")]
    Balance { period: usize, residual: f64 },
    #[error(transparent)]
    Lp(#[from] lp::LpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    Thermal = 0,
    Vre = 1,
    Nsp = 2,
    Charge = 3,
    Discharge = 4,
    Soc = 5,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::Thermal, Var::Vre, Var::Nsp, Var::Charge, Var::Discharge, Var::Soc];

    pub fn symbol(self) -> &'static str {
        match self {
            Var::Thermal => "p_t",
            Var::Vre => "p_v",
            Var::Nsp => "p_ns",
            Var::Charge => "p_c",
            Var::Discharge => "p_d",
            Var::Soc => "e",
        }
    }
}

/// Column and row indices of a built model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub periods: usize,
}

impl VarMap {
    #[inline]
    pub fn col(&self, r: usize, v: Var) -> usize {
        6 * r + v as usize
    }

    #[inline]
    pub fn balance_row(&self, r: usize) -> usize {
        2 * r
    }

    #[inline]
    pub fn soc_row(&self, r: usize) -> usize {
        2 * r + 1
    }

    #[inline]
    pub fn soc_final_row(&self) -> usize {
        2 * self.periods
    }

    pub fn n_vars(&self) -> usize {
        6 * self.periods
    }

    pub fn n_eq(&self) -> usize {
        2 * self.periods + 1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodPrimal {
    pub p_t: f64,
    pub p_v: f64,
    pub p_ns: f64,
    pub p_c: f64,
    pub p_d: f64,
    pub e: f64,
}

impl PeriodPrimal {
    pub fn get(&self, v: Var) -> f64 {
        match v {
            Var::Thermal => self.p_t,
            Var::Vre => self.p_v,
            Var::Nsp => self.p_ns,
            Var::Charge => self.p_c,
            Var::Discharge => self.p_d,
            Var::Soc => self.e,
        }
    }
}

pub fn build_lp(case: &CaseConfig, reps: &RepPeriodSeries) -> Result<(LpProblem, VarMap), ModelError> {
    let n = reps.len();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if let Some(r) = reps.weights.iter().position(|&w| w == 0) {
        return Err(ModelError::ZeroWeight(r));
    }
    let map = VarMap { periods: n };
    let mut lp = LpProblem::new(map.n_vars(), map.n_eq());
    lp.eq_matrix.reserve(13 * n + 1);
    let (ec, ed) = (case.eta_c, case.eta_d);

    for r in 0..n {
        let w = reps.weights[r] as f64;
        let d = reps.avg_demand[r];
        let vre: f64 = reps.avg_cf.iter().map(|cf| case.vre_capacity * cf[r]).sum();
        let c = |v| map.col(r, v);

        lp.cost[c(Var::Thermal)] = w * case.thermal_cost;
        lp.cost[c(Var::Vre)] = w * case.vre_cost;
        lp.cost[c(Var::Nsp)] = w * case.nse_cost;
        lp.cost[c(Var::Discharge)] = w * case.discharge_cost;

        lp.upper[c(Var::Thermal)] = case.thermal_capacity;
        lp.upper[c(Var::Vre)] = vre;
        lp.upper[c(Var::Nsp)] = d;
        lp.upper[c(Var::Charge)] = case.storage_pc_max;
        lp.upper[c(Var::Discharge)] = case.storage_pd_max;
        lp.lower[c(Var::Soc)] = case.storage_emin;
        lp.upper[c(Var::Soc)] = case.storage_emax;

        let b = map.balance_row(r);
        for v in [Var::Thermal, Var::Vre, Var::Nsp, Var::Discharge] {
            lp.eq_matrix.push((b, c(v), 1.0));
        }
        lp.eq_matrix.push((b, c(Var::Charge), -1.0));
        lp.eq_rhs[b] = d;

        let s = map.soc_row(r);
        lp.eq_matrix.push((s, c(Var::Soc), 1.0));
        lp.eq_matrix.push((s, c(Var::Charge), -w * ec));
        lp.eq_matrix.push((s, c(Var::Discharge), w / ed));
        if r == 0 {
            lp.eq_rhs[s] = case.storage_emin;
        } else {
            lp.eq_matrix.push((s, map.col(r - 1, Var::Soc), -1.0));
        }
    }
    let f = map.soc_final_row();
    lp.eq_matrix.push((f, map.col(n - 1, Var::Soc), 1.0));
    lp.eq_rhs[f] = case.storage_emin;
    Ok((lp, map))
}

/// A primal feasible starting basis with idle storage and merit-order
/// dispatch in every period.
pub fn basis_hint(lp: &LpProblem, map: &VarMap) -> BasisHint {
    let n = map.periods;
    let mut basic = Vec::with_capacity(map.n_eq());
    let mut at_upper = Vec::new();
    for r in 0..n {
        let d = lp.eq_rhs[map.balance_row(r)];
        let vre = lp.upper[map.col(r, Var::Vre)];
        let thermal = lp.upper[map.col(r, Var::Thermal)];
        if d <= vre {
            basic.push(map.col(r, Var::Vre));
        } else if d <= vre + thermal {
            at_upper.push(map.col(r, Var::Vre));
            basic.push(map.col(r, Var::Thermal));
        } else {
            at_upper.push(map.col(r, Var::Vre));
            at_upper.push(map.col(r, Var::Thermal));
            basic.push(map.col(r, Var::Nsp));
        }
        basic.push(map.col(r, Var::Soc));
    }
    // the final row is carried by e of the last period, its soc row by p_c
    basic.push(map.col(n - 1, Var::Charge));
    BasisHint { basic, at_upper }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Secondary costs in [1, 2) keyed by source hour and variable, so that a
/// period is tie-broken the same way in every model that contains it.
pub fn tie_break_weights(map: &VarMap, first_hours: &[usize]) -> Vec<f64> {
    let mut w = vec![0.0; map.n_vars()];
    for r in 0..map.periods {
        for v in Var::ALL {
            let h = splitmix64((first_hours[r] as u64) << 3 | v as u64);
            w[map.col(r, v)] = 1.0 + (h >> 11) as f64 / (1u64 << 53) as f64;
        }
    }
    w
}

/// Solves a built model with the merit-order start and tie-breaking keyed
/// by `first_hours`.
pub fn solve_model(
    lp: &LpProblem,
    map: &VarMap,
    first_hours: &[usize],
    backend: &dyn lp::LpBackend,
    base: &SolveOptions,
) -> Result<LpSolution, ModelError> {
    let opts = SolveOptions {
        hint: Some(basis_hint(lp, map)),
        tie_break: Some(tie_break_weights(map, first_hours)),
        ..base.clone()
    };
    Ok(backend.solve(lp, &opts)?)
}

pub fn extract_primal(sol: &LpSolution, lp: &LpProblem, map: &VarMap) -> Result<Vec<PeriodPrimal>, ModelError> {
    if !sol.is_optimal() {
        return Err(ModelError::NotOptimal(sol.status));
    }
    let x = &sol.x;
    let out: Vec<PeriodPrimal> = (0..map.periods)
        .map(|r| PeriodPrimal {
            p_t: x[map.col(r, Var::Thermal)],
            p_v: x[map.col(r, Var::Vre)],
            p_ns: x[map.col(r, Var::Nsp)],
            p_c: x[map.col(r, Var::Charge)],
            p_d: x[map.col(r, Var::Discharge)],
            e: x[map.col(r, Var::Soc)],
        })
        .collect();
    for (r, p) in out.iter().enumerate() {
        let d = lp.eq_rhs[map.balance_row(r)];
        let residual = p.p_t + p.p_v + p.p_ns + p.p_d - p.p_c - d;
        if residual.abs() > 1e-7 * d.abs().max(1.0) {
            return Err(ModelError::Balance { period: r, residual });
        }
    }
    Ok(out)
}

/// Sum of submodel objective values.
pub fn total_objective<'a>(sols: impl IntoIterator<Item = &'a LpSolution>) -> Result<f64, ModelError> {
    let mut z = 0.0;
    for s in sols {
        if !s.is_optimal() {
            return Err(ModelError::NotOptimal(s.status));
        }
        z += s.objective;
    }
    Ok(z)
}
