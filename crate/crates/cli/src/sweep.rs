//! Grid expansion and CSV assembly.
//!
//! Every grid point is an independent work item; rayon executes them on a
//! bounded pool and the indexed collect keeps row order identical to the
//! serial expansion, so the same scenario always produces byte-identical
//! output regardless of thread count.

use rayon::prelude::*;

use geomphase::models::{
    dispersive_conditional, dispersive_initial, dispersive_system_hamiltonian,
    jc_conditional, jc_initial, jc_system_hamiltonian,
};
use geomphase::phase::phase_report;
use geomphase::ramsey::{ramsey_pf_fock, ramsey_pg};
use geomphase::state::{default_step, propagate};
use geomphase::Method;

use crate::config::{BuiltPoint, ModelKind, PointParams, SweepSection};
use crate::CliError;

pub const CSV_HEADER: &str = "model,method,theta,gamma,b,t,g,delta,kappa,n,\
phi,phi_d,beta_principal,beta_unwrapped,survival_prob,p_g,p_f,warning,error";

/// One output row: the point's inputs, one method's phases, and the
/// protocol probabilities shared by the point.
pub struct Row {
    pub model: &'static str,
    pub method: String,
    pub theta: Option<f64>,
    pub gamma: f64,
    pub b: Option<f64>,
    pub t: Option<f64>,
    pub g: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub n: Option<usize>,
    pub phi: Option<f64>,
    pub phi_d: Option<f64>,
    pub beta_principal: Option<f64>,
    pub beta_unwrapped: Option<f64>,
    pub survival_prob: Option<f64>,
    pub p_g: Option<f64>,
    pub p_f: Option<f64>,
    pub warning: String,
    pub error: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// CSV fields must stay single-cell even when a message contains the
/// separator; messages are diagnostics, not data, so flattening them is fine.
fn sanitize(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

impl Row {
    fn bare(pp: &PointParams, method: &str) -> Self {
        let jc = pp.kind == ModelKind::Jc;
        Row {
            model: pp.kind.label(),
            method: method.to_string(),
            theta: (!jc).then_some(pp.theta),
            gamma: pp.gamma,
            b: (!jc).then_some(pp.b),
            t: pp.t,
            g: jc.then_some(pp.g),
            delta: jc.then_some(pp.delta),
            kappa: jc.then_some(pp.kappa),
            n: jc.then_some(pp.n),
            phi: None,
            phi_d: None,
            beta_principal: None,
            beta_unwrapped: None,
            survival_prob: None,
            p_g: None,
            p_f: None,
            warning: String::new(),
            error: String::new(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        [
            self.model.to_string(),
            self.method.clone(),
            fmt_opt(self.theta),
            fmt_opt(Some(self.gamma)),
            fmt_opt(self.b),
            fmt_opt(self.t),
            fmt_opt(self.g),
            fmt_opt(self.delta),
            fmt_opt(self.kappa),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            fmt_opt(self.phi),
            fmt_opt(self.phi_d),
            fmt_opt(self.beta_principal),
            fmt_opt(self.beta_unwrapped),
            fmt_opt(self.survival_prob),
            fmt_opt(self.p_g),
            fmt_opt(self.p_f),
            sanitize(&self.warning),
            sanitize(&self.error),
        ]
        .join(",")
    }
}

/// Compute all requested methods for one point.  Parameter or propagation
/// failures land in the row's error column instead of aborting the sweep.
pub fn evaluate_point(pp: &PointParams, methods: &[Method], dt: Option<f64>) -> Vec<Row> {
    let built = match pp.build() {
        Ok(b) => b,
        Err(e) => {
            return methods
                .iter()
                .map(|m| {
                    let mut row = Row::bare(pp, &m.to_string());
                    row.error = sanitize(&e.to_string());
                    row
                })
                .collect()
        }
    };
    let t = built.duration();
    let step = dt.unwrap_or_else(|| default_step(t));

    let (h_s, traj) = match &built {
        BuiltPoint::Dispersive { p } => {
            let h_s = dispersive_system_hamiltonian(p);
            let traj = dispersive_conditional(p)
                .and_then(|h| propagate(&h, &dispersive_initial(p), t, step));
            (h_s, traj)
        }
        BuiltPoint::Jc { p, .. } => {
            let h_s = jc_system_hamiltonian(p);
            let traj = propagate(&jc_conditional(p), &jc_initial(p), t, step);
            (h_s, traj)
        }
    };

    // the interferometer outcome belongs to the point, not the method; a
    // protocol that rejects the parameters is a note, not an error
    let mut p_g = None;
    let mut p_f = None;
    let mut warning = String::new();
    if let BuiltPoint::Jc { p, .. } = &built {
        if p.n == 0 && p.kappa == 0.0 {
            match ramsey_pg(p, t) {
                Ok(out) => p_g = Some(out.p_simulated),
                Err(e) => warning = format!("ground-fraction protocol skipped: {e}"),
            }
        } else {
            match ramsey_pf_fock(p, t) {
                Ok(out) => p_f = Some(out.p_simulated),
                Err(e) => warning = format!("filtered protocol skipped: {e}"),
            }
        }
    }

    methods
        .iter()
        .map(|&m| {
            let mut row = Row::bare(pp, &m.to_string());
            row.t = Some(t);
            row.warning.clone_from(&warning);
            match &traj {
                Ok(traj) => match phase_report(&h_s, traj, m) {
                    Ok(rep) => {
                        row.phi = Some(rep.total_phase);
                        row.phi_d = Some(rep.dynamical_phase);
                        row.beta_principal = Some(rep.beta_principal);
                        row.beta_unwrapped = Some(rep.beta_unwrapped);
                        row.survival_prob = Some(rep.survival_prob);
                        row.p_g = p_g;
                        row.p_f = p_f;
                    }
                    Err(e) => row.error = sanitize(&e.to_string()),
                },
                Err(e) => row.error = sanitize(&e.to_string()),
            }
            row
        })
        .collect()
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for name in names {
        out.push(match name.as_str() {
            "joint" | "joint-state" => Method::JointState,
            "jump" | "quantum-jump" => Method::QuantumJump,
            other => {
                return Err(CliError::Config(format!(
                    "unknown method \"{other}\" (joint|jump)"
                )))
            }
        });
    }
    if out.is_empty() {
        return Err(CliError::Config("sweep.methods must not be empty".into()));
    }
    Ok(out)
}

fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    (0..steps)
        .map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64)
        .collect()
}

/// Expand the grid in axis-lexicographic order (first axis outermost).
pub fn expand_grid(
    base: &PointParams,
    sweep: &SweepSection,
    degrees: bool,
) -> Result<Vec<PointParams>, CliError> {
    if sweep.axis.len() > 2 {
        return Err(CliError::Config(format!(
            "at most two sweep axes are supported, got {}",
            sweep.axis.len()
        )));
    }
    for ax in &sweep.axis {
        if ax.steps == 0 {
            return Err(CliError::Config(format!(
                "axis \"{}\" has zero steps",
                ax.name
            )));
        }
        if !(ax.start.is_finite() && ax.stop.is_finite()) {
            return Err(CliError::Config(format!(
                "axis \"{}\" has non-finite bounds",
                ax.name
            )));
        }
        // reject unknown names up front, with a throwaway clone
        base.clone().set_axis(&ax.name, ax.start, degrees)?;
    }
    let mut points = vec![base.clone()];
    for ax in &sweep.axis {
        let values = linspace(ax.start, ax.stop, ax.steps);
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for &v in &values {
                let mut p = point.clone();
                p.set_axis(&ax.name, v, degrees)?;
                next.push(p);
            }
        }
        points = next;
    }
    Ok(points)
}

/// Evaluate every point (in parallel when a pool is configured) and return
/// the CSV body rows in deterministic grid order.
pub fn run_sweep(points: &[PointParams], methods: &[Method], dt: Option<f64>) -> Vec<String> {
    points
        .par_iter()
        .map(|pp| {
            evaluate_point(pp, methods, dt)
                .iter()
                .map(Row::to_csv_line)
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}
