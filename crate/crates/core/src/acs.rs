//! Per-period active constraint sets, storage states, marginal generators and
//! duals, and the signatures used to merge periods.

use crate::data::CaseConfig;
use crate::lp::{at_bound, LpProblem, LpSolution};
use crate::model::{extract_primal, ModelError, PeriodPrimal, Var, VarMap};
use crate::tsa::{disaggregate, Partition, RepPeriod, Submodel, SubmodelKind};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcsTolerances {
    /// Flow magnitude below which storage counts as idle (MW).
    pub flow: f64,
    /// Absolute match between `mu_bal` and a technology cost (EUR/MWh).
    pub price: f64,
    /// Relative grid for dual quantization in Full signatures.
    pub dual_quantum: f64,
}

impl Default for AcsTolerances {
    fn default() -> Self {
        AcsTolerances {
            flow: 1e-6,
            price: 1e-6,
            dual_quantum: 1e-6,
        }
    }
}

/// Duals of one period, per unit of period weight for the power terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodDuals {
    pub mu_bal: f64,
    pub mu_soc: f64,
    /// `[lower, upper]` bound duals per variable in `Var` order.
    pub lambda: [[f64; 2]; 6],
}

impl PeriodDuals {
    pub fn as_vec(&self) -> Vec<f64> {
        let mut v = vec![self.mu_bal, self.mu_soc];
        v.extend(self.lambda.iter().flatten());
        v
    }
}

pub fn period_duals(sol: &LpSolution, map: &VarMap, weights: &[usize]) -> Vec<PeriodDuals> {
    (0..map.periods)
        .map(|r| {
            let w = weights[r] as f64;
            let mut lambda = [[0.0; 2]; 6];
            for v in Var::ALL {
                let scale = if v == Var::Soc { 1.0 } else { w };
                let d = sol.d[map.col(r, v)] / scale;
                lambda[v as usize] = [d.max(0.0), (-d).max(0.0)];
            }
            PeriodDuals {
                mu_bal: sol.y[map.balance_row(r)] / w,
                mu_soc: sol.y[map.soc_row(r)],
                lambda,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StorageState {
    Empty,
    Full,
    Charging,
    MaxCharging,
    Discharging,
    MaxDischarging,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarginalGen {
    Vre,
    Thermal,
    Nsp,
    StorageComposite,
}

impl fmt::Display for StorageState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for MarginalGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginalGen::Vre => "VRE",
            MarginalGen::Thermal => "Thermal",
            MarginalGen::Nsp => "NSP",
            MarginalGen::StorageComposite => "Storage/Composite",
        })
    }
}

/// `(lower, upper)` per variable in `Var` order.
pub type PeriodBounds = [(f64, f64); 6];

pub fn period_bounds(lp: &LpProblem, map: &VarMap, r: usize) -> PeriodBounds {
    Var::ALL.map(|v| (lp.lower[map.col(r, v)], lp.upper[map.col(r, v)]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodDiagnostics {
    pub primal: PeriodPrimal,
    pub duals: PeriodDuals,
    /// Bit `2v` marks the lower bound of variable `v` active, bit `2v+1` the
    /// upper bound.
    pub active_mask: u16,
    pub storage_state: StorageState,
    pub marginal_gen: MarginalGen,
    /// Both charging and discharging above the flow tolerance.
    pub simultaneous: bool,
}

impl PeriodDiagnostics {
    pub fn is_active(&self, v: Var, upper: bool) -> bool {
        self.active_mask >> (2 * v as usize + upper as usize) & 1 == 1
    }
}

pub fn classify_period(
    primal: &PeriodPrimal,
    duals: &PeriodDuals,
    bounds: &PeriodBounds,
    case: &CaseConfig,
    tol: &AcsTolerances,
) -> PeriodDiagnostics {
    let mut mask = 0u16;
    for v in Var::ALL {
        let (lo, up) = bounds[v as usize];
        let x = primal.get(v);
        if at_bound(x, lo) {
            mask |= 1 << (2 * v as usize);
        }
        if at_bound(x, up) {
            mask |= 1 << (2 * v as usize + 1);
        }
    }
    let bit = |v: Var, upper: bool| mask >> (2 * v as usize + upper as usize) & 1 == 1;
    let charging = primal.p_c > tol.flow;
    let discharging = primal.p_d > tol.flow;
    let storage_state = if bit(Var::Soc, false) {
        StorageState::Empty
    } else if bit(Var::Soc, true) {
        StorageState::Full
    } else if charging && (!discharging || primal.p_c >= primal.p_d) {
        if bit(Var::Charge, true) {
            StorageState::MaxCharging
        } else {
            StorageState::Charging
        }
    } else if discharging {
        if bit(Var::Discharge, true) {
            StorageState::MaxDischarging
        } else {
            StorageState::Discharging
        }
    } else {
        StorageState::Idle
    };
    let near = |c: f64| (duals.mu_bal - c).abs() <= tol.price;
    let marginal_gen = if near(case.vre_cost) {
        MarginalGen::Vre
    } else if near(case.thermal_cost) {
        MarginalGen::Thermal
    } else if near(case.nse_cost) {
        MarginalGen::Nsp
    } else {
        MarginalGen::StorageComposite
    };
    PeriodDiagnostics {
        primal: *primal,
        duals: *duals,
        active_mask: mask,
        storage_state,
        marginal_gen,
        simultaneous: charging && discharging,
    }
}

/// Diagnostics of every period of a solved model.
pub fn diagnose(
    lp: &LpProblem,
    sol: &LpSolution,
    map: &VarMap,
    weights: &[usize],
    case: &CaseConfig,
    tol: &AcsTolerances,
) -> Result<Vec<PeriodDiagnostics>, ModelError> {
    let primal = extract_primal(sol, lp, map)?;
    let duals = period_duals(sol, map, weights);
    Ok((0..map.periods)
        .map(|r| classify_period(&primal[r], &duals[r], &period_bounds(lp, map, r), case, tol))
        .collect())
}

/// `flag_r` holds when the state of charge sits at `emin` at the end of both
/// period `r - 1` and period `r`, with the state before the first period
/// taken as `emin`.
pub fn cut_flags_from_soc(soc: &[f64], emin: f64) -> Vec<bool> {
    let empty: Vec<bool> = soc.iter().map(|&e| at_bound(e, emin)).collect();
    (0..soc.len()).map(|r| empty[r] && (r == 0 || empty[r - 1])).collect()
}

pub fn find_cut_flags(diag: &[PeriodDiagnostics], emin: f64) -> Vec<bool> {
    let soc: Vec<f64> = diag.iter().map(|d| d.primal.e).collect();
    cut_flags_from_soc(&soc, emin)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutRule {
    /// Empty at both ends of a period; such periods become unlinked.
    #[default]
    ConsecutiveEmpty,
    /// Cut after every period that ends empty.
    SingleEndpoint,
}

/// Partition of the horizon implied by a state-of-charge trajectory.
pub fn cut_partition(soc: &[f64], emin: f64, rule: CutRule) -> Partition {
    match rule {
        CutRule::ConsecutiveEmpty => disaggregate(&cut_flags_from_soc(soc, emin)),
        CutRule::SingleEndpoint => {
            let flags = cut_flags_from_soc(soc, emin);
            let mut submodels = Vec::new();
            let mut start = 0;
            for h in 0..soc.len() {
                if at_bound(soc[h], emin) || h + 1 == soc.len() {
                    let kind = if flags[h] && start == h {
                        SubmodelKind::Unlinked
                    } else {
                        SubmodelKind::Linked
                    };
                    submodels.push(Submodel {
                        kind,
                        periods: (start..=h).map(|t| RepPeriod::contiguous(t..t + 1)).collect(),
                    });
                    start = h + 1;
                }
            }
            Partition {
                horizon: soc.len(),
                submodels,
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureMode {
    #[default]
    Full,
    Reduced,
}

impl std::str::FromStr for SignatureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(SignatureMode::Full),
            "reduced" => Ok(SignatureMode::Reduced),
            _ => Err(format!("unknown signature mode `{s}` (expected full|reduced)")),
        }
    }
}

/// Grid cell of a quantized dual value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantKey {
    /// `round(v / q)` for `|v| <= 1`.
    Abs(i64),
    /// Sign and `round(ln|v| / ln(1 + q))` for `|v| > 1`.
    Rel(bool, i64),
}

pub fn quantize(v: f64, quantum: f64) -> QuantKey {
    if v.abs() <= 1.0 {
        QuantKey::Abs((v / quantum).round() as i64)
    } else {
        QuantKey::Rel(v > 0.0, (v.abs().ln() / quantum.ln_1p()).round() as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signature {
    Full { mask: u16, duals: Vec<QuantKey> },
    Reduced { state: StorageState, marginal: MarginalGen },
}

pub fn signature_of(diag: &PeriodDiagnostics, mode: SignatureMode, dual_quantum: f64) -> Signature {
    match mode {
        SignatureMode::Full => Signature::Full {
            mask: diag.active_mask,
            duals: diag.duals.as_vec().into_iter().map(|v| quantize(v, dual_quantum)).collect(),
        },
        SignatureMode::Reduced => Signature::Reduced {
            state: diag.storage_state,
            marginal: diag.marginal_gen,
        },
    }
}

/// One row per period: `period,storage_state,marginal_gen,simultaneous,mu_bal,
/// mu_soc,e,p_t,p_v,p_ns,p_c,p_d,active_mask`.
pub fn write_diagnostics(diag: &[PeriodDiagnostics], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "period",
        "storage_state",
        "marginal_gen",
        "simultaneous",
        "mu_bal",
        "mu_soc",
        "e",
        "p_t",
        "p_v",
        "p_ns",
        "p_c",
        "p_d",
        "active_mask",
    ])?;
    for (r, d) in diag.iter().enumerate() {
        let p = &d.primal;
        w.write_record([
            r.to_string(),
            d.storage_state.to_string(),
            d.marginal_gen.to_string(),
            d.simultaneous.to_string(),
            format!("{:.6}", d.duals.mu_bal),
            format!("{:.6}", d.duals.mu_soc),
            format!("{:.6}", p.e),
            format!("{:.6}", p.p_t),
            format!("{:.6}", p.p_v),
            format!("{:.6}", p.p_ns),
            format!("{:.6}", p.p_c),
            format!("{:.6}", p.p_d),
            format!("{:012b}", d.active_mask),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CasePreset, RepPeriodSeries};
    use crate::lp::{RevisedSimplex, SolveOptions};
    use crate::model::{build_lp, solve_model};

    fn solved(case: &CaseConfig, demand: &[f64], cf: &[f64]) -> Vec<PeriodDiagnostics> {
        let reps = RepPeriodSeries {
            weights: vec![1; demand.len()],
            avg_demand: demand.to_vec(),
            avg_cf: vec![cf.to_vec()],
        };
        let (lp, map) = build_lp(case, &reps).unwrap();
        let hours: Vec<usize> = (0..demand.len()).collect();
        let sol = solve_model(&lp, &map, &hours, &RevisedSimplex, &SolveOptions::default()).unwrap();
        diagnose(&lp, &sol, &map, &reps.weights, case, &AcsTolerances::default()).unwrap()
    }

    fn zero_duals() -> PeriodDuals {
        PeriodDuals {
            mu_bal: 0.0,
            mu_soc: 0.0,
            lambda: [[0.0; 2]; 6],
        }
    }

    fn bess_bounds() -> PeriodBounds {
        [(0.0, 480.0), (0.0, 500.0), (0.0, 300.0), (0.0, 100.0), (0.0, 100.0), (0.0, 400.0)]
    }

    #[test]
    fn empty_and_flow_states() {
        let case = CasePreset::BessSolar.config();
        let tol = AcsTolerances::default();
        let empty = PeriodPrimal::default();
        let d = classify_period(&empty, &zero_duals(), &bess_bounds(), &case, &tol);
        assert_eq!(d.storage_state, StorageState::Empty);
        assert!(d.is_active(Var::Soc, false));

        let charging = PeriodPrimal {
            p_c: 50.0,
            e: 120.0,
            ..Default::default()
        };
        let d = classify_period(&charging, &zero_duals(), &bess_bounds(), &case, &tol);
        assert_eq!(d.storage_state, StorageState::Charging);
        let max = PeriodPrimal { p_c: 100.0, ..charging };
        let d = classify_period(&max, &zero_duals(), &bess_bounds(), &case, &tol);
        assert_eq!(d.storage_state, StorageState::MaxCharging);
        let full = PeriodPrimal { e: 400.0, ..charging };
        assert_eq!(
            classify_period(&full, &zero_duals(), &bess_bounds(), &case, &tol).storage_state,
            StorageState::Full
        );
        let idle = PeriodPrimal { e: 10.0, ..Default::default() };
        assert_eq!(
            classify_period(&idle, &zero_duals(), &bess_bounds(), &case, &tol).storage_state,
            StorageState::Idle
        );
        let both = PeriodPrimal {
            p_c: 10.0,
            p_d: 20.0,
            e: 10.0,
            ..Default::default()
        };
        let d = classify_period(&both, &zero_duals(), &bess_bounds(), &case, &tol);
        assert!(d.simultaneous);
        assert_eq!(d.storage_state, StorageState::Discharging);
    }

    #[test]
    fn marginal_generator_from_price() {
        let case = CasePreset::BessSolar.config();
        let tol = AcsTolerances::default();
        let mut duals = zero_duals();
        duals.mu_bal = 5000.0;
        let d = classify_period(&PeriodPrimal::default(), &duals, &bess_bounds(), &case, &tol);
        assert_eq!(d.marginal_gen, MarginalGen::Nsp);
        duals.mu_bal = 55.2;
        let d = classify_period(&PeriodPrimal::default(), &duals, &bess_bounds(), &case, &tol);
        assert_eq!(d.marginal_gen, MarginalGen::StorageComposite);

        // demand between VRE potential and VRE plus thermal capacity
        let diag = solved(&case, &[500.0], &[0.2]);
        assert_eq!(diag[0].marginal_gen, MarginalGen::Thermal);
        assert!((diag[0].duals.mu_bal - 60.0).abs() < 1e-9);
    }

    #[test]
    fn cut_flag_examples() {
        let flags = cut_flags_from_soc(&[0.0, 0.0, 5.0, 3.0, 0.0, 0.0], 0.0);
        assert_eq!(flags, vec![true, true, false, false, false, true]);
        let p = disaggregate(&flags);
        assert_eq!(p.count(SubmodelKind::Unlinked), 3);
        assert_eq!(p.linked_lengths(), vec![3]);
        assert!(cut_flags_from_soc(&[1.0, 2.0, 0.5], 0.0).iter().all(|f| !f));
    }

    #[test]
    fn single_endpoint_rule() {
        let soc = [0.0, 0.0, 5.0, 3.0, 0.0, 2.0, 0.0, 0.0];
        let p = cut_partition(&soc, 0.0, CutRule::SingleEndpoint);
        p.validate(8).unwrap();
        let shape: Vec<(SubmodelKind, usize)> = p.submodels.iter().map(|s| (s.kind, s.hours())).collect();
        use SubmodelKind::*;
        assert_eq!(
            shape,
            vec![(Unlinked, 1), (Unlinked, 1), (Linked, 3), (Linked, 2), (Unlinked, 1)]
        );
        let q = cut_partition(&soc, 0.0, CutRule::ConsecutiveEmpty);
        assert_eq!(q.linked_lengths(), vec![5]);
    }

    #[test]
    fn signatures() {
        let case = CasePreset::BessSolar.config();
        let tol = AcsTolerances::default();
        let p = PeriodPrimal {
            p_c: 50.0,
            e: 120.0,
            ..Default::default()
        };
        let mut a = zero_duals();
        a.mu_bal = 60.0;
        let mut b = a;
        b.mu_soc = 65.0;
        let da = classify_period(&p, &a, &bess_bounds(), &case, &tol);
        let db = classify_period(&p, &b, &bess_bounds(), &case, &tol);
        let q = tol.dual_quantum;
        assert_eq!(signature_of(&da, SignatureMode::Full, q), signature_of(&da, SignatureMode::Full, q));
        assert_eq!(signature_of(&da, SignatureMode::Reduced, q), signature_of(&db, SignatureMode::Reduced, q));
        assert_ne!(signature_of(&da, SignatureMode::Full, q), signature_of(&db, SignatureMode::Full, q));
    }

    #[test]
    fn quantization_grid() {
        assert_eq!(quantize(60.0, 1e-6), quantize(60.0 * (1.0 + 1e-9), 1e-6));
        assert_ne!(quantize(60.0, 1e-6), quantize(60.0 * (1.0 + 1e-5), 1e-6));
        assert_eq!(quantize(0.0, 1e-6), quantize(1e-9, 1e-6));
        assert_ne!(quantize(-60.0, 1e-6), quantize(60.0, 1e-6));
    }

    #[test]
    fn solar_day_charging_run_shares_reduced_signature() {
        let case = CasePreset::BessSolar.config();
        let demand = vec![400.0; 24];
        let cf: Vec<f64> = (0..24).map(|h| if (9..15).contains(&h) { 0.45 } else { 0.0 }).collect();
        let diag = solved(&case, &demand, &cf);
        let charging: Vec<usize> = (0..24)
            .filter(|&r| matches!(diag[r].storage_state, StorageState::Charging | StorageState::MaxCharging))
            .collect();
        assert!(!charging.is_empty());
        let sigs: Vec<Signature> = charging
            .iter()
            .map(|&r| signature_of(&diag[r], SignatureMode::Reduced, 1e-6))
            .collect();
        assert!(sigs.windows(2).all(|w| w[0] == w[1]), "{sigs:?}");
        let mut buf = Vec::new();
        write_diagnostics(&diag, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 25);
    }

    #[test]
    fn complementarity_of_solved_periods() {
        let case = CasePreset::PhsWind.config();
        let demand: Vec<f64> = (0..48).map(|h| 350.0 + 150.0 * ((h as f64) / 4.0).sin()).collect();
        let cf: Vec<f64> = (0..48).map(|h| 0.3 + 0.25 * ((h as f64) / 7.0).cos()).collect();
        let diag = solved(&case, &demand, &cf);
        for d in &diag {
            for v in Var::ALL {
                for (side, upper) in [(0, false), (1, true)] {
                    if d.duals.lambda[v as usize][side] > 1e-6 {
                        assert!(d.is_active(v, upper), "{v:?} {upper} {d:?}");
                    }
                }
            }
        }
    }
}
