//! Disaggregation at empty-storage periods, aggregation by signature, and
//! parallel solution of the resulting submodels.

mod partition;

pub use partition::{
    aggregate, aggregate_linked, aggregate_unlinked, disaggregate, Partition, PartitionError, RepPeriod, Submodel,
    SubmodelKind,
};

use crate::data::{average_periods, CaseConfig, RepPeriodSeries, SeriesFrame};
use crate::exec::par_map;
use crate::lp::{LpBackend, LpProblem, LpSolution, RevisedSimplex, SolveOptions};
use crate::model::{build_lp, extract_primal, solve_model, ModelError, PeriodPrimal, Var, VarMap};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TsaError {
    #[error("invalid partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("submodel {index}: {source}")]
    Submodel { index: usize, source: ModelError },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    /// Worker count; 1 solves sequentially.
    pub threads: usize,
    pub lp: SolveOptions,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            threads: 1,
            lp: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubmodelResult {
    pub kind: SubmodelKind,
    pub reps: RepPeriodSeries,
    pub lp: LpProblem,
    pub map: VarMap,
    pub solution: LpSolution,
    pub primal: Vec<PeriodPrimal>,
}

#[derive(Clone, Debug)]
pub struct PartitionSolution {
    pub submodels: Vec<SubmodelResult>,
    /// Sum of submodel objective values.
    pub objective: f64,
}

/// Weighted energy totals per technology (MWh).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TechTotals {
    pub vre: f64,
    pub thermal: f64,
    pub nsp: f64,
    pub charging: f64,
    pub discharging: f64,
}

impl PartitionSolution {
    pub fn totals(&self) -> TechTotals {
        let mut t = TechTotals::default();
        for s in &self.submodels {
            for (p, &w) in s.primal.iter().zip(&s.reps.weights) {
                let w = w as f64;
                t.vre += w * p.p_v;
                t.thermal += w * p.p_t;
                t.nsp += w * p.p_ns;
                t.charging += w * p.p_c;
                t.discharging += w * p.p_d;
            }
        }
        t
    }

    pub fn works(&self) -> Vec<f64> {
        self.submodels.iter().map(|s| crate::pipeline::work_units(&s.solution)).collect()
    }

    /// Per-hour values, each hour taking the values of the period that
    /// represents it.
    pub fn expand_primal(&self, partition: &Partition) -> Vec<PeriodPrimal> {
        let mut out = vec![PeriodPrimal::default(); partition.horizon];
        for (sub, res) in partition.submodels.iter().zip(&self.submodels) {
            for (period, value) in sub.periods.iter().zip(&res.primal) {
                for h in period.iter_hours() {
                    out[h] = *value;
                }
            }
        }
        out
    }
}

pub fn solve_submodel(
    case: &CaseConfig,
    frame: &SeriesFrame,
    sub: &Submodel,
    backend: &dyn LpBackend,
    opts: &SolveOptions,
) -> Result<SubmodelResult, ModelError> {
    let reps = average_periods(frame, sub.periods.iter().map(|p| p.hours.as_slice()));
    let (lp, map) = build_lp(case, &reps)?;
    let first_hours: Vec<usize> = sub.periods.iter().map(RepPeriod::first_hour).collect();
    let solution = solve_model(&lp, &map, &first_hours, backend, opts)?;
    let primal = extract_primal(&solution, &lp, &map)?;
    Ok(SubmodelResult {
        kind: sub.kind,
        reps,
        lp,
        map,
        solution,
        primal,
    })
}

pub fn solve_partition(
    case: &CaseConfig,
    frame: &SeriesFrame,
    partition: &Partition,
    cfg: &SolveConfig,
) -> Result<PartitionSolution, TsaError> {
    solve_partition_with(&RevisedSimplex, case, frame, partition, cfg)
}

/// Solves every submodel independently and sums objectives in submodel
/// order, so the result does not depend on the worker count.
pub fn solve_partition_with(
    backend: &dyn LpBackend,
    case: &CaseConfig,
    frame: &SeriesFrame,
    partition: &Partition,
    cfg: &SolveConfig,
) -> Result<PartitionSolution, TsaError> {
    partition.validate(frame.horizon_len())?;
    let results = par_map(cfg.threads, &partition.submodels, |_, sub| {
        solve_submodel(case, frame, sub, backend, &cfg.lp)
    });
    let mut submodels = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        submodels.push(r.map_err(|source| TsaError::Submodel { index, source })?);
    }
    let objective = submodels.iter().map(|s| s.solution.objective).sum();
    Ok(PartitionSolution { submodels, objective })
}

/// The full-scale reference: one linked submodel with a period per hour.
pub fn solve_full(case: &CaseConfig, frame: &SeriesFrame, cfg: &SolveConfig) -> Result<PartitionSolution, TsaError> {
    solve_partition(case, frame, &Partition::identity(frame.horizon_len()), cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    Ofv,
    Vre,
    Thermal,
    Nsp,
    Charging,
    Discharging,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Ofv,
        Quantity::Vre,
        Quantity::Thermal,
        Quantity::Nsp,
        Quantity::Charging,
        Quantity::Discharging,
    ];

    /// Short column label.
    pub fn label(self) -> &'static str {
        match self {
            Quantity::Ofv => "OFV",
            Quantity::Vre => "VRE",
            Quantity::Thermal => "Thermal",
            Quantity::Nsp => "NSP",
            Quantity::Charging => "Ch",
            Quantity::Discharging => "Dis",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Ofv => "OFV",
            Quantity::Vre => "VRE",
            Quantity::Thermal => "Thermal",
            Quantity::Nsp => "NSP",
            Quantity::Charging => "Charging",
            Quantity::Discharging => "Discharging",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityError {
    pub quantity: Quantity,
    pub full: f64,
    pub agg: f64,
    /// Percent error, or the absolute difference when `denominator_zero`.
    pub error: f64,
    pub denominator_zero: bool,
}

impl QuantityError {
    pub fn new(quantity: Quantity, full: f64, agg: f64) -> Self {
        let denominator_zero = full == 0.0;
        let error = if denominator_zero {
            agg - full
        } else {
            100.0 * (agg - full) / full
        };
        QuantityError {
            quantity,
            full,
            agg,
            error,
            denominator_zero,
        }
    }

    /// `|agg - full| / |full|`, or the absolute difference on a zero base.
    pub fn relative(&self) -> f64 {
        if self.denominator_zero {
            (self.agg - self.full).abs()
        } else {
            ((self.agg - self.full) / self.full).abs()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ofv_full: f64,
    pub ofv_agg: f64,
    pub errors: Vec<QuantityError>,
    pub periods_total: usize,
    pub work_full: f64,
    pub work_parallel_bound: f64,
    pub speedup: f64,
}

impl RunReport {
    pub fn error(&self, q: Quantity) -> &QuantityError {
        self.errors.iter().find(|e| e.quantity == q).expect("every quantity is reported")
    }
}

pub fn compare(full: &PartitionSolution, agg: &PartitionSolution, partition: &Partition) -> RunReport {
    let (a, b) = (full.totals(), agg.totals());
    let pairs = [
        (full.objective, agg.objective),
        (a.vre, b.vre),
        (a.thermal, b.thermal),
        (a.nsp, b.nsp),
        (a.charging, b.charging),
        (a.discharging, b.discharging),
    ];
    let errors = Quantity::ALL
        .iter()
        .zip(pairs)
        .map(|(&q, (f, g))| QuantityError::new(q, f, g))
        .collect();
    let work_full: f64 = full.works().iter().sum();
    let works = agg.works();
    let work_parallel_bound = works.iter().cloned().fold(0.0, f64::max);
    RunReport {
        ofv_full: full.objective,
        ofv_agg: agg.objective,
        errors,
        periods_total: partition.periods_total(),
        work_full,
        work_parallel_bound,
        speedup: crate::pipeline::speedup(work_full, &works),
    }
}

/// Largest per-hour difference of any variable between two expanded
/// solutions.
pub fn max_primal_gap(a: &[PeriodPrimal], b: &[PeriodPrimal]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| Var::ALL.map(|v| (p.get(v) - q.get(v)).abs()))
        .fold(0.0, f64::max)
}
