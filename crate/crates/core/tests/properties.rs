//! Randomized invariants on the public surface: phase bookkeeping, norm
//! monotonicity under decay, and closed-form/integrator agreement across the
//! parameter space rather than at hand-picked points.

use std::f64::consts::PI;

use proptest::prelude::*;

use geomphase::models::{
    dispersive_conditional, dispersive_initial, dispersive_lowering, dispersive_state,
    dispersive_system_hamiltonian, DispersiveQubitParams,
};
use geomphase::phase::{circle_dist, phase_report, wrap_principal, Method};
use geomphase::state::{conditional_hamiltonian, propagate, C64};

fn qubit_params(b: f64, gamma: f64, theta: f64, t: f64) -> DispersiveQubitParams {
    DispersiveQubitParams::new(b, gamma, theta, t).unwrap()
}

proptest! {
    #[test]
    fn wrapped_angles_stay_on_the_principal_branch(x in -50.0f64..50.0, k in -5i32..5) {
        let w = wrap_principal(x);
        prop_assert!(w > -PI && w <= PI, "wrap({x}) = {w}");
        let shifted = wrap_principal(x + 2.0 * PI * k as f64);
        prop_assert!(circle_dist(w, shifted) < 1e-9);
    }

    #[test]
    fn circle_distance_is_a_symmetric_pseudometric(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        let d = circle_dist(a, b);
        prop_assert!((0.0..=PI + 1e-12).contains(&d));
        prop_assert!((d - circle_dist(b, a)).abs() < 1e-12);
        prop_assert!(circle_dist(a, a + 2.0 * PI) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decaying_norm_never_rises(
        b in 0.2f64..2.0,
        gamma in 0.0f64..1.5,
        theta in 0.0f64..PI,
        t in 0.5f64..6.0,
    ) {
        let p = qubit_params(b, gamma, theta, t);
        let traj = propagate(
            &dispersive_conditional(&p).unwrap(),
            &dispersive_initial(&p),
            t,
            5e-3,
        ).unwrap();
        let mut prev = f64::INFINITY;
        for st in traj.states() {
            let n = st.norm_sqr();
            prop_assert!(n <= prev + 1e-12, "norm rose from {prev} to {n}");
            prev = n;
        }
    }

    #[test]
    fn damping_term_is_exactly_what_was_added(
        b in 0.2f64..2.0,
        gamma in 0.0f64..1.5,
    ) {
        let p = qubit_params(b, gamma, 1.0, 1.0);
        let h_s = dispersive_system_hamiltonian(&p);
        let o = dispersive_lowering();
        let h_c = conditional_hamiltonian(&h_s, &o, gamma).unwrap();
        let damping = o.dagger_times_self();
        for i in 0..2 {
            for j in 0..2 {
                let expect = h_s[(i, j)] - C64::new(0.0, 0.5 * gamma) * damping[(i, j)];
                prop_assert!((h_c[(i, j)] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn phase_reports_are_internally_consistent(
        b in 0.2f64..2.0,
        gamma in 0.0f64..1.0,
        theta in 0.1f64..2.6,
        cycles in 0.3f64..2.5,
        jump in proptest::bool::ANY,
    ) {
        let t = cycles * 2.0 * PI / b;
        let p = qubit_params(b, gamma, theta, t);
        let traj = propagate(
            &dispersive_conditional(&p).unwrap(),
            &dispersive_initial(&p),
            t,
            2e-3,
        ).unwrap();
        let method = if jump { Method::QuantumJump } else { Method::JointState };
        let report = match phase_report(&dispersive_system_hamiltonian(&p), &traj, method) {
            Ok(r) => r,
            // a final state orthogonal to the start has no defined phase;
            // rejecting it is the contract, not a failure of the invariant
            Err(geomphase::PhaseError::OrthogonalStates { .. }) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        prop_assert!(report.beta_principal > -PI && report.beta_principal <= PI);
        prop_assert!(wrap_principal(report.beta_unwrapped - report.beta_principal).abs() < 1e-9);
        prop_assert!(circle_dist(
            wrap_principal(report.total_phase - report.dynamical_phase),
            report.beta_principal,
        ) < 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&report.survival_prob));
    }

    #[test]
    fn integrator_tracks_the_closed_form_everywhere(
        b in 0.2f64..2.0,
        gamma in 0.0f64..1.0,
        theta in 0.0f64..PI,
        t in 0.2f64..6.0,
    ) {
        let p = qubit_params(b, gamma, theta, t);
        let traj = propagate(
            &dispersive_conditional(&p).unwrap(),
            &dispersive_initial(&p),
            t,
            2e-3,
        ).unwrap();
        let gap = dispersive_state(&p, t).unwrap().max_amp_diff(traj.final_state()).unwrap();
        prop_assert!(gap < 1e-6, "closed-form gap {gap}");
    }

    #[test]
    fn survival_splits_into_decayed_and_protected_weight(
        b in 0.2f64..2.0,
        gamma in 0.0f64..1.5,
        theta in 0.0f64..PI,
        t in 0.2f64..6.0,
    ) {
        let p = qubit_params(b, gamma, theta, t);
        let traj = propagate(
            &dispersive_conditional(&p).unwrap(),
            &dispersive_initial(&p),
            t,
            2e-3,
        ).unwrap();
        let half = theta / 2.0;
        let expect = half.cos().powi(2) * (-gamma * t).exp() + half.sin().powi(2);
        prop_assert!((traj.survival_prob() - expect).abs() < 1e-7);
    }
}
