//! End-to-end acceptance checklist.  Each test prints exactly one
//! `ACCEPTANCE <n> PASS|FAIL` line with its measured numbers, so the output
//! of `cargo test --test acceptance -- --nocapture` reads as a report.
//!
//! Criterion 3 pins the originally quoted quadratic decay coefficient for
//! the detuned dimer.  Both the propagated phases and the independent
//! series re-derivation disagree with that quoted value in sign and
//! magnitude (see the printed comparison), so the test fails for the two
//! detuned points; it is kept as stated rather than silently repinned.

use std::f64::consts::PI;
use std::time::Instant;

use geomphase::models::{
    dispersive_beta_cyclic, dispersive_conditional, dispersive_initial,
    dispersive_jump_slope, dispersive_system_hamiltonian, dissipative_jc_beta_exact,
    jc_beta_baseline, jc_conditional, jc_initial, jc_system_hamiltonian,
    DispersiveQubitParams, JCParams,
};
use geomphase::phase::{circle_dist, phase_report, wrap_principal, Method};
use geomphase::state::{default_step, propagate};
use geomphase::suite::{run_validation, Level};

fn report_line(n: u32, passed: bool, what: &str, detail: &str) {
    println!(
        "ACCEPTANCE {n} {}: {what} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
}

/// Propagate the decaying qubit over one cyclic period and return the
/// requested phase report.
fn qubit_cycle_report(b: f64, gamma: f64, theta: f64, method: Method) -> geomphase::PhaseReport {
    let p = DispersiveQubitParams::cyclic(b, gamma, theta).unwrap();
    let traj = propagate(
        &dispersive_conditional(&p).unwrap(),
        &dispersive_initial(&p),
        p.t_total,
        default_step(p.t_total),
    )
    .unwrap();
    phase_report(&dispersive_system_hamiltonian(&p), &traj, method).unwrap()
}

#[test]
fn criterion_1_cyclic_phase_is_decay_independent() {
    let start = Instant::now();
    let b = 1.0;
    let t = 2.0 * PI / b;
    let mut worst = 0.0f64;
    for theta in [PI / 6.0, PI / 4.0, PI / 2.0, 2.0 * PI / 3.0] {
        let expect =
            dispersive_beta_cyclic(&DispersiveQubitParams::cyclic(b, 0.0, theta).unwrap())
                .unwrap();
        for gamma_t in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let report = qubit_cycle_report(b, gamma_t / t, theta, Method::JointState);
            worst = worst.max(circle_dist(report.beta_principal, expect));
        }
    }
    let elapsed = start.elapsed();
    let passed = worst < 1e-7 && elapsed.as_secs_f64() < 5.0;
    report_line(
        1,
        passed,
        "propagated cyclic phase matches -pi(1-cos theta) at every decay strength",
        &format!("worst gap {worst:.3e} vs 1e-7, {elapsed:.2?} vs 5 s"),
    );
    assert!(passed);
}

#[test]
fn criterion_2_jump_reference_slope_matches_first_order() {
    let start = Instant::now();
    let b = 1.0;
    let t = 2.0 * PI / b;
    let h = 0.5 / t;
    let mut worst_rel = 0.0f64;
    for theta in [PI / 6.0, PI / 4.0, PI / 2.0, 2.0 * PI / 3.0] {
        let beta_at = |gamma: f64| qubit_cycle_report(b, gamma, theta, Method::QuantumJump)
            .beta_principal;
        let b0 = beta_at(0.0);
        let d1 = wrap_principal(beta_at(h) - b0);
        let d2 = wrap_principal(beta_at(2.0 * h) - b0);
        let slope = (4.0 * d1 - d2) / (2.0 * h);
        let reference =
            dispersive_jump_slope(&DispersiveQubitParams::cyclic(b, 0.0, theta).unwrap())
                .unwrap();
        worst_rel = worst_rel.max((slope - reference).abs() / reference.abs());
    }
    let elapsed = start.elapsed();
    let passed = worst_rel < 0.05 && elapsed.as_secs_f64() < 10.0;
    report_line(
        2,
        passed,
        "jump-convention slope in the rate matches -(pi sin theta)^2 / 2B",
        &format!("worst relative gap {worst_rel:.3e} vs 5e-2, {elapsed:.2?} vs 10 s"),
    );
    assert!(passed);
}

/// Least-squares cubic through the origin, y ~ c1 x + c2 x^2 + c3 x^3.
#[allow(clippy::needless_range_loop)]
fn fit_cubic_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let powers = [x, x * x, x * x * x];
        for i in 0..3 {
            rhs[i] += y * powers[i];
            for j in 0..3 {
                m[i][j] += powers[i] * powers[j];
            }
        }
    }
    // tiny fixed-size Gaussian elimination with partial pivoting
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= f * m[col][j];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut c = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for j in row + 1..3 {
            acc -= m[row][j] * c[j];
        }
        c[row] = acc / m[row][row];
    }
    (c[0], c[1], c[2])
}

#[test]
fn criterion_3_quadratic_decay_coefficient_as_originally_quoted() {
    let start = Instant::now();
    let g = 1.0;
    let gammas: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
    let mut all_pass = true;
    let mut lines = Vec::new();
    for delta in [0.0, 0.5, 1.0] {
        let lossless = JCParams::new(g, delta, 0.0, 0.0, 0).unwrap();
        let t = lossless.cycle_time();
        let omega = lossless.rabi();
        let baseline = jc_beta_baseline(&lossless);
        let mut diffs = Vec::new();
        for &gamma in &gammas {
            let p = JCParams::new(g, delta, gamma, 0.0, 0).unwrap();
            let traj = propagate(
                &jc_conditional(&p),
                &jc_initial(&p),
                t,
                default_step(t),
            )
            .unwrap();
            let report =
                phase_report(&jc_system_hamiltonian(&p), &traj, Method::JointState).unwrap();
            // align each sample to the baseline branch before fitting
            diffs.push(wrap_principal(report.beta_principal - baseline));
        }
        let (c1, c2, _c3) = fit_cubic_through_origin(&gammas, &diffs);
        let quoted = PI * delta * (3.0 * g * g - delta * delta / 2.0) / (64.0 * omega.powi(5));
        let rederived = -3.0 * PI * delta * g * g / (64.0 * omega.powi(5));
        let quad_ok = if quoted == 0.0 {
            c2.abs() < 1e-3
        } else {
            (c2 / quoted - 1.0).abs() <= 0.10
        };
        let ok = c1.abs() < 1e-3 && quad_ok;
        all_pass &= ok;
        lines.push(format!(
            "delta {delta}: linear {c1:.3e}, quadratic {c2:.6} vs quoted {quoted:.6} vs independent series {rederived:.6}"
        ));
    }
    let elapsed = start.elapsed();
    let passed = all_pass && elapsed.as_secs_f64() < 10.0;
    for l in &lines {
        println!("    {l}");
    }
    report_line(
        3,
        passed,
        "quadratic decay coefficient matches its originally quoted closed form",
        &format!("{elapsed:.2?} vs 10 s; propagation and the series re-derivation agree with each other, not with the quoted sign"),
    );
    assert!(passed);
}

#[test]
fn criterion_4_lossless_baselines() {
    let mut worst_prop = 0.0f64;
    let mut worst_closed = 0.0f64;
    for (delta, n) in [(0.5, 0), (1.0, 0), (1.0, 1), (1.0, 3)] {
        let p = JCParams::new(1.0, delta, 0.0, 0.0, n).unwrap();
        let t = p.cycle_time();
        let baseline = jc_beta_baseline(&p);
        let traj = propagate(&jc_conditional(&p), &jc_initial(&p), t, default_step(t)).unwrap();
        let report = phase_report(&jc_system_hamiltonian(&p), &traj, Method::JointState).unwrap();
        worst_prop = worst_prop.max(circle_dist(report.beta_principal, baseline));
        worst_closed = worst_closed
            .max(circle_dist(dissipative_jc_beta_exact(&p, t).unwrap(), baseline));
    }
    let passed = worst_prop < 1e-8 && worst_closed < 1e-12;
    report_line(
        4,
        passed,
        "half-cycle phase without decay equals pi (1 - delta / 2 Omega_n)",
        &format!("propagated gap {worst_prop:.3e} vs 1e-8, closed-form gap {worst_closed:.3e} vs 1e-12"),
    );
    assert!(passed);
}

#[test]
fn criterion_5_balanced_rates_cancel_the_correction() {
    let mut worst_rel = 0.0f64;
    for n in 0..=3 {
        let p = JCParams::new(1.0, 1.0, 0.1, 0.1, n).unwrap();
        let t = p.cycle_time();
        let baseline = jc_beta_baseline(&p);
        let traj = propagate(&jc_conditional(&p), &jc_initial(&p), t, default_step(t)).unwrap();
        let report = phase_report(&jc_system_hamiltonian(&p), &traj, Method::JointState).unwrap();
        worst_rel = worst_rel.max(circle_dist(report.beta_principal, baseline) / baseline);
    }
    let passed = worst_rel < 1e-3;
    report_line(
        5,
        passed,
        "equal atom and photon rates leave the lossless phase untouched",
        &format!("worst relative gap {worst_rel:.3e} vs 1e-3"),
    );
    assert!(passed);
}

#[test]
fn criterion_6_discretized_reservoir_oracle() {
    use geomphase::bath::{
        build_flat_bath, dispersive_joint_problem, evolve_joint, joint_phase_report,
        EvolveOptions,
    };
    use geomphase::models::dispersive_state;

    let start = Instant::now();
    let p = DispersiveQubitParams::cyclic(1.0, 1.0, PI / 2.0).unwrap();
    let bath = build_flat_bath(1.0, 40.0, 801).unwrap();
    let problem = dispersive_joint_problem(&p, &bath).unwrap();
    let run = evolve_joint(
        &problem,
        p.t_total,
        &EvolveOptions {
            dt: 1e-3,
            store_every: 10,
        },
    )
    .unwrap();

    let mut block_err = 0.0f64;
    for (i, &t) in run.times.iter().enumerate() {
        if t <= 0.0 || t > 3.0 {
            continue;
        }
        let block = run.block_state(i);
        let closed = dispersive_state(&p, t).unwrap();
        let mut diff2 = 0.0;
        for j in 0..2 {
            diff2 += (block.amplitude(j) - closed.amplitude(j)).norm_sqr();
        }
        block_err = block_err.max((diff2 / closed.norm_sqr()).sqrt());
    }
    let report = joint_phase_report(&run).unwrap();
    let beta_sys = dispersive_beta_cyclic(&p).unwrap();
    let beta_rel = circle_dist(report.beta_principal, beta_sys) / beta_sys.abs();
    let elapsed = start.elapsed();
    let passed = block_err < 0.02
        && beta_rel < 0.01
        && run.transport_residual < 1e-5
        && run.max_norm_drift < 1e-9
        && elapsed.as_secs_f64() < 60.0;
    report_line(
        6,
        passed,
        "unitary 801-mode reservoir reproduces the no-jump block and its phase",
        &format!(
            "block gap {block_err:.3e} vs 2e-2, relative phase gap {beta_rel:.3e} vs 1e-2, transport residual {:.3e} vs 1e-5, norm drift {:.3e} vs 1e-9, {elapsed:.2?} vs 60 s",
            run.transport_residual, run.max_norm_drift
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_7_interferometer_round_trip() {
    use geomphase::ramsey::{ramsey_pf_fock, ramsey_pg};

    let p = JCParams::vacuum(1.0, 0.5, 0.05).unwrap();
    let out = ramsey_pg(&p, p.cycle_time()).unwrap();
    let recovery_err =
        (out.cos_beta_recovered.unwrap() - out.beta_reference.cos()).abs();

    let q = JCParams::new(1.0, 0.5, 0.05, 0.03, 1).unwrap();
    let fock = ramsey_pf_fock(&q, q.cycle_time()).unwrap();
    let fock_err = (fock.p_formula - fock.p_simulated).abs();

    let passed = recovery_err < 5e-3 && fock_err < 5e-3;
    report_line(
        7,
        passed,
        "fringe inversion returns the phase and the filtered fringe matches",
        &format!("cosine recovery gap {recovery_err:.3e} vs 5e-3, filtered fringe gap {fock_err:.3e} vs 5e-3"),
    );
    assert!(passed);
}

#[test]
fn criterion_8_fast_validation_suite() {
    let report = run_validation(Level::Fast);
    for c in &report.checks {
        println!("    {}", c.line());
    }
    let required = [
        "norm-monotonicity",
        "branch-invariance",
        "dressed-completeness",
        "integrator-convergence-order",
    ];
    let named_green = required.iter().all(|name| {
        report
            .checks
            .iter()
            .any(|c| c.name == *name && c.passed)
    });
    let passed =
        report.all_passed() && named_green && report.elapsed.as_secs_f64() < 60.0;
    report_line(
        8,
        passed,
        "fast validation suite is green",
        &format!(
            "{} checks, all named invariants present, {:.2?} vs 60 s",
            report.checks.len(),
            report.elapsed
        ),
    );
    assert!(passed);
}
