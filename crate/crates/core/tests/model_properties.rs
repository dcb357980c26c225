use exact_tsa::acs::{signature_of, AcsTolerances, SignatureMode, StorageState};
use exact_tsa::data::{synth_series, CasePreset};
use exact_tsa::lp::{at_bound, verify_kkt};
use exact_tsa::model::Var;
use exact_tsa::pipeline::full_diagnostics;
use exact_tsa::tsa::{solve_full, SolveConfig};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (usize, u64, usize, usize, f64)> {
    (0usize..4, 0u64..50, 0usize..8000, 24usize..200, 0.5f64..1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_windows_satisfy_model_invariants((case_ix, seed, start, len, scale) in instance()) {
        let preset = CasePreset::ALL[case_ix];
        let case = preset.config();
        let mut frame = synth_series(seed, 1, preset.profile()).unwrap().window(start..(start + len).min(8736));
        frame.scale_demand(scale);
        let full = solve_full(&case, &frame, &SolveConfig::default()).unwrap();
        let sub = &full.submodels[0];
        prop_assert!(verify_kkt(&sub.lp, &sub.solution, 1e-7).passed());

        let p = &sub.primal;
        let mut prev = case.storage_emin;
        for q in p {
            let residual = q.e - prev - (case.eta_c * q.p_c - q.p_d / case.eta_d);
            prop_assert!(residual.abs() <= 1e-7 * (1.0 + q.e.abs()), "soc residual {}", residual);
            prev = q.e;
        }
        prop_assert!((p.last().unwrap().e - case.storage_emin).abs() <= 1e-7);

        let diag = full_diagnostics(&full, &case);
        let tol = AcsTolerances::default();
        for d in &diag {
            for v in Var::ALL {
                let [lo, up] = d.duals.lambda[v as usize];
                prop_assert!(lo <= tol.price || up <= tol.price);
                if lo > tol.price {
                    prop_assert!(d.is_active(v, false));
                }
                if up > tol.price {
                    prop_assert!(d.is_active(v, true));
                }
            }
            let empty = at_bound(d.primal.e, case.storage_emin);
            prop_assert_eq!(d.storage_state == StorageState::Empty, empty);
        }
        for a in &diag {
            for b in &diag {
                if signature_of(a, SignatureMode::Full, tol.dual_quantum) == signature_of(b, SignatureMode::Full, tol.dual_quantum) {
                    prop_assert_eq!(
                        signature_of(a, SignatureMode::Reduced, tol.dual_quantum),
                        signature_of(b, SignatureMode::Reduced, tol.dual_quantum)
                    );
                }
            }
        }
    }
}
