//! Brute-force joint evolution against explicitly discretized reservoirs.
//!
//! Everything the rest of the crate computes from a 2x2 non-Hermitian
//! generator is re-derived here from a strictly unitary problem: the system
//! plus a few hundred band modes, one excitation shared among them.  Decay,
//! geometric phase, and the transport condition then have to emerge from the
//! microscopic couplings instead of being put in by hand, which is what makes
//! this module an oracle for the others.
//!
//! The price is a recurrence horizon: a finite band of spacing `dw` echoes
//! the emitted excitation back after `2 pi / dw`, so every run checks its
//! window against that horizon first.

use std::sync::Arc;

use crate::error::{PhaseError, Result};
use crate::models::{
    dispersive_basis, jc_basis, DispersiveQubitParams, JCParams,
};
use crate::phase::{wrap_principal, OVERLAP_FLOOR};
use crate::state::{rk4_step, C64, Hamiltonian, StateVector};

/// Fewest modes for which the flat band behaves Markovian over the windows
/// this crate probes.
pub const MIN_MODES: usize = 201;

/// Bandwidth must exceed this multiple of the target rate, or the band edges
/// sit close enough to resonance to distort the decay.
pub const MIN_BANDWIDTH_RATIOS: f64 = 20.0;

/// Hard cap on the joint dimension; past this the dense state stops fitting
/// comfortably in memory and the fixed-step integrator stops being the right
/// tool.
pub const MAX_JOINT_DIM: usize = 100_000;

/// A flat band of equally spaced modes with a uniform coupling chosen so the
/// golden-rule decay rate equals `target_rate`.
#[derive(Debug, Clone)]
pub struct BathSpec {
    mode_count: usize,
    bandwidth: f64,
    target_rate: f64,
    mode_spacing: f64,
    coupling: f64,
    detunings: Vec<f64>,
}

impl BathSpec {
    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn mode_spacing(&self) -> f64 {
        self.mode_spacing
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Time at which the discretized band echoes the excitation back.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.mode_spacing
    }

    /// `|2 pi g^2 / dw - gamma|`: how far the coupling is from reproducing
    /// the golden-rule rate.  Zero up to roundoff by construction.
    pub fn rate_identity_defect(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.coupling * self.coupling / self.mode_spacing
            - self.target_rate)
            .abs()
    }
}

/// Lay out `mode_count` modes uniformly over `[-bandwidth/2, bandwidth/2]`
/// and size the uniform coupling as `sqrt(gamma dw / 2 pi)`.
///
/// `mode_count` must be odd (a mode sits exactly at band center) and at
/// least [`MIN_MODES`]; the bandwidth must clear the rate by
/// [`MIN_BANDWIDTH_RATIOS`].  `gamma = 0` is allowed and gives a decoupled
/// band, the cheapest possible null test.
pub fn build_flat_bath(gamma: f64, bandwidth: f64, mode_count: usize) -> Result<BathSpec> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(PhaseError::NegativeRate { rate: gamma });
    }
    if mode_count < MIN_MODES {
        return Err(PhaseError::TooFewModes {
            n: mode_count,
            min: MIN_MODES,
        });
    }
    if mode_count.is_multiple_of(2) {
        return Err(PhaseError::EvenModeCount { n: mode_count });
    }
    let required = MIN_BANDWIDTH_RATIOS * gamma;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) || bandwidth < required {
        return Err(PhaseError::BandwidthTooNarrow {
            w: bandwidth,
            gamma,
            required,
        });
    }
    let dw = bandwidth / (mode_count - 1) as f64;
    let coupling = (gamma * dw / (2.0 * std::f64::consts::PI)).sqrt();
    let detunings = (0..mode_count)
        .map(|k| -bandwidth / 2.0 + k as f64 * dw)
        .collect();
    Ok(BathSpec {
        mode_count,
        bandwidth,
        target_rate: gamma,
        mode_spacing: dw,
        coupling,
        detunings,
    })
}

/// Real-symmetric arrow-structured generator: a diagonal plus a sparse list
/// of symmetric couplings.  Real entries suffice for every joint problem in
/// this crate, and the matvec is linear in the dimension.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    diag: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
}

impl SparseHamiltonian {
    pub fn new(diag: Vec<f64>, pairs: Vec<(usize, usize, f64)>) -> Result<Self> {
        let dim = diag.len();
        if dim == 0 {
            return Err(PhaseError::EmptyState);
        }
        for &(a, b, g) in &pairs {
            if a >= dim || b >= dim || a == b {
                return Err(PhaseError::InvalidParams {
                    what: format!("coupling pair ({a}, {b}) out of range for dim {dim}"),
                });
            }
            if !g.is_finite() {
                return Err(PhaseError::NonFinite {
                    context: format!("in coupling pair ({a}, {b})"),
                });
            }
        }
        Ok(Self { dim, diag, pairs })
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

impl Hamiltonian for SparseHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for i in 0..self.dim {
            out[i] = self.diag[i] * x[i];
        }
        for &(a, b, g) in &self.pairs {
            out[a] += g * x[b];
            out[b] += g * x[a];
        }
    }

    fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&d, xi) in self.diag.iter().zip(x) {
            acc += d * xi.norm_sqr();
        }
        for &(a, b, g) in &self.pairs {
            // symmetric pair contributes 2 g Re(x_a* x_b)
            acc += 2.0 * g * (x[a].conj() * x[b]).re;
        }
        acc
    }
}

/// A fully assembled joint system-reservoir problem.
#[derive(Debug, Clone)]
pub struct JointProblem {
    pub label: String,
    pub basis: Arc<Vec<String>>,
    pub hamiltonian: SparseHamiltonian,
    pub initial: StateVector,
    /// Leading components that form the no-reservoir-excitation block.
    pub system_dim: usize,
    /// Labels for the projected block, shared with the closed-form models.
    pub system_basis: Arc<Vec<String>>,
    /// Conserved-sector id per component; populations per id must be
    /// constant under the joint evolution.
    pub sectors: Vec<u8>,
    /// Recurrence horizon inherited from the narrowest band involved.
    pub t_max: f64,
}

/// Decaying qubit against one flat band: the excited component hybridizes
/// with `|g, one photon in mode k>`, the ground component is a spectator.
pub fn dispersive_joint_problem(
    p: &DispersiveQubitParams,
    bath: &BathSpec,
) -> Result<JointProblem> {
    if (bath.target_rate - p.gamma).abs() > 1e-12 {
        return Err(PhaseError::InvalidParams {
            what: format!(
                "bath was built for rate {} but the qubit decays at {}",
                bath.target_rate, p.gamma
            ),
        });
    }
    let n = bath.mode_count;
    let dim = 2 + n;
    if dim > MAX_JOINT_DIM {
        return Err(PhaseError::DimensionOverflow {
            dim,
            max: MAX_JOINT_DIM,
        });
    }
    let mut labels = Vec::with_capacity(dim);
    labels.push("e|vac".to_string());
    labels.push("g|vac".to_string());
    let mut diag = Vec::with_capacity(dim);
    diag.push(p.b / 2.0);
    diag.push(-p.b / 2.0);
    let mut pairs = Vec::with_capacity(n);
    for (k, dk) in bath.detunings.iter().enumerate() {
        labels.push(format!("g|k{k}"));
        diag.push(-p.b / 2.0 + dk);
        pairs.push((0, 2 + k, bath.coupling));
    }
    let basis = Arc::new(labels);
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[0] = C64::new((p.theta / 2.0).cos(), 0.0);
    amps[1] = C64::new((p.theta / 2.0).sin(), 0.0);
    let initial = StateVector::new(basis.clone(), amps)?;
    // |e,vac> and every one-photon component share an excitation; |g,vac>
    // sits alone in the zero-excitation sector
    let mut sectors = vec![1u8; dim];
    sectors[1] = 0;
    Ok(JointProblem {
        label: format!(
            "decaying qubit, {} modes over bandwidth {}",
            n, bath.bandwidth
        ),
        basis,
        hamiltonian: SparseHamiltonian::new(diag, pairs)?,
        initial,
        system_dim: 2,
        system_basis: dispersive_basis(),
        sectors,
        t_max: bath.recurrence_time(),
    })
}

/// Vacuum atom-cavity manifold against two independent flat bands, one fed
/// by the atomic channel and one by the cavity channel.  Everything lives in
/// the single-excitation sector, written in the frame where the block
/// diagonal is `(0, delta)`.
pub fn jc_two_bath_problem(
    p: &JCParams,
    atom_bath: &BathSpec,
    cavity_bath: &BathSpec,
) -> Result<JointProblem> {
    if p.n != 0 {
        return Err(PhaseError::InvalidParams {
            what: format!(
                "the two-band check tracks a single shared excitation, so the \
                 cavity must start empty (n = 0); got n = {}",
                p.n
            ),
        });
    }
    if (atom_bath.target_rate - p.gamma).abs() > 1e-12 {
        return Err(PhaseError::InvalidParams {
            what: format!(
                "atomic band was built for rate {} but the model decays at {}",
                atom_bath.target_rate, p.gamma
            ),
        });
    }
    if (cavity_bath.target_rate - p.kappa).abs() > 1e-12 {
        return Err(PhaseError::InvalidParams {
            what: format!(
                "cavity band was built for rate {} but the model leaks at {}",
                cavity_bath.target_rate, p.kappa
            ),
        });
    }
    let na = atom_bath.mode_count;
    let nc = cavity_bath.mode_count;
    let dim = 2 + na + nc;
    if dim > MAX_JOINT_DIM {
        return Err(PhaseError::DimensionOverflow {
            dim,
            max: MAX_JOINT_DIM,
        });
    }
    let mut labels = Vec::with_capacity(dim);
    labels.push("e,0|vac,vac".to_string());
    labels.push("g,1|vac,vac".to_string());
    let mut diag = Vec::with_capacity(dim);
    diag.push(0.0);
    diag.push(p.delta);
    let mut pairs = Vec::with_capacity(1 + na + nc);
    pairs.push((0, 1, p.g));
    for (k, dk) in atom_bath.detunings.iter().enumerate() {
        labels.push(format!("g,0|a{k}"));
        diag.push(*dk);
        pairs.push((0, 2 + k, atom_bath.coupling));
    }
    for (k, dk) in cavity_bath.detunings.iter().enumerate() {
        labels.push(format!("g,0|c{k}"));
        diag.push(p.delta + dk);
        pairs.push((1, 2 + na + k, cavity_bath.coupling));
    }
    let basis = Arc::new(labels);
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[0] = C64::new(1.0, 0.0);
    let initial = StateVector::new(basis.clone(), amps)?;
    Ok(JointProblem {
        label: format!("atom-cavity pair, {na} atomic and {nc} cavity modes"),
        basis,
        hamiltonian: SparseHamiltonian::new(diag, pairs)?,
        initial,
        system_dim: 2,
        system_basis: jc_basis(0),
        sectors: vec![1u8; dim],
        t_max: atom_bath
            .recurrence_time()
            .min(cavity_bath.recurrence_time()),
    })
}

/// Keep the leading block of a joint state as a system-basis state.  The
/// result is unnormalized: its squared norm is the probability that the
/// reservoir has absorbed nothing.
pub fn project_no_excitation(problem: &JointProblem, joint: &StateVector) -> Result<StateVector> {
    if joint.dim() != problem.basis.len() {
        return Err(PhaseError::DimensionMismatch {
            op_dim: problem.basis.len(),
            state_dim: joint.dim(),
        });
    }
    StateVector::new(
        problem.system_basis.clone(),
        joint.amplitudes()[..problem.system_dim].to_vec(),
    )
}

/// Controls for [`evolve_joint`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Fine integration step.
    pub dt: f64,
    /// Keep every `store_every`-th fine state (the endpoints always).
    pub store_every: usize,
}

impl EvolveOptions {
    /// Step `min(1e-3, t/1e4)` and a stride that keeps about a thousand
    /// stored states.
    pub fn for_duration(t_final: f64) -> Self {
        let dt = (1e-3_f64).min(t_final / 1e4);
        let n_steps = (t_final / dt).ceil().max(1.0);
        Self {
            dt,
            store_every: (n_steps / 1000.0).ceil() as usize,
        }
    }
}

/// A completed joint run with its streaming diagnostics.
///
/// The diagnostics are accumulated on the fine integration grid while the
/// stored states are subsampled; the transport residual in particular decays
/// quadratically with the probing stride, so evaluating it on subsampled
/// states would inflate it far above what the evolution actually does.
#[derive(Debug, Clone)]
pub struct JointRun {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Conserved energy `<Phi(0)|H|Phi(0)>`.
    pub initial_energy: f64,
    /// Continuously accumulated `arg <Phi(0)|Phi(t)>` at the final time.
    pub unwrapped_total_phase: f64,
    /// Max centered-difference deviation from the transport condition after
    /// the dynamical phase factor is peeled off, fine grid.
    pub transport_residual: f64,
    /// Same probe without the phase removal; stays near `|initial_energy|`
    /// and certifies the probe itself is live.
    pub transport_residual_unremoved: f64,
    /// Max deviation of the joint norm^2 from one, fine grid.
    pub max_norm_drift: f64,
    /// Max deviation of any conserved-sector population from its initial
    /// value, fine grid.
    pub max_sector_drift: f64,
    pub fine_dt: f64,
    pub duration: f64,
    system_dim: usize,
    system_basis: Arc<Vec<String>>,
}

impl JointRun {
    /// System block of stored state `idx`, unnormalized.
    pub fn block_state(&self, idx: usize) -> StateVector {
        StateVector::new(
            self.system_basis.clone(),
            self.states[idx].amplitudes()[..self.system_dim].to_vec(),
        )
        .expect("block of a finite state is a finite state")
    }

    pub fn final_block(&self) -> StateVector {
        self.block_state(self.states.len() - 1)
    }
}

/// Integrate the joint Schroedinger equation with the fixed-step 4th-order
/// scheme, accumulating phase and conservation diagnostics per fine step.
pub fn evolve_joint(
    problem: &JointProblem,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<JointRun> {
    let h = &problem.hamiltonian;
    let dim = h.dim();
    if dim > MAX_JOINT_DIM {
        return Err(PhaseError::DimensionOverflow {
            dim,
            max: MAX_JOINT_DIM,
        });
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(PhaseError::InvalidParams {
            what: format!("evolution window must be positive and finite, got {t_final}"),
        });
    }
    if t_final >= problem.t_max {
        return Err(PhaseError::RecurrenceHorizon {
            t_final,
            t_max: problem.t_max,
        });
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(PhaseError::InvalidStep { dt: opts.dt });
    }
    if opts.store_every == 0 {
        return Err(PhaseError::InvalidParams {
            what: "store_every must be at least 1".into(),
        });
    }
    let n0 = problem.initial.norm_sqr();
    if (n0 - 1.0).abs() > 1e-9 {
        return Err(PhaseError::NotNormalized { norm_sqr: n0 });
    }

    let n_steps = (t_final / opts.dt).ceil() as usize;
    let dt = t_final / n_steps as f64;
    let e0 = h.expectation(problem.initial.amplitudes()).re;
    // e^{+i E0 dt}: one fine step of the dynamical phase factor removal
    let rot = C64::from_polar(1.0, e0 * dt);

    // initial-state support for the cheap overlap: the starting vector has a
    // handful of nonzero components, so <Phi0|Phi(t)> is a short dot product
    let support: Vec<(usize, C64)> = problem
        .initial
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (i, a.conj()))
        .collect();

    let n_sectors = problem.sectors.iter().copied().max().unwrap_or(0) as usize + 1;
    let sector_of = &problem.sectors;
    let mut sector_ref = vec![0.0f64; n_sectors];
    for (i, a) in problem.initial.amplitudes().iter().enumerate() {
        sector_ref[sector_of[i] as usize] += a.norm_sqr();
    }

    let mut k1 = vec![C64::new(0.0, 0.0); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut prev: Vec<C64> = Vec::new();
    let mut cur = problem.initial.amplitudes().to_vec();
    let mut next: Vec<C64> = Vec::with_capacity(dim);

    let mut times = vec![0.0];
    let mut states = vec![problem.initial.clone()];

    let mut acc_phase = 0.0f64;
    let mut ov_prev = C64::new(1.0, 0.0);
    let mut resid = 0.0f64;
    let mut resid_raw = 0.0f64;
    let mut norm_drift = 0.0f64;
    let mut sector_drift = 0.0f64;
    let mut sector_acc = vec![0.0f64; n_sectors];

    for step in 0..n_steps {
        rk4_step(
            h, &cur, dt, &mut next, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp,
        );
        let t = if step + 1 == n_steps {
            t_final
        } else {
            (step + 1) as f64 * dt
        };

        sector_acc.iter_mut().for_each(|s| *s = 0.0);
        let mut norm2 = 0.0;
        for (i, a) in next.iter().enumerate() {
            let p = a.norm_sqr();
            norm2 += p;
            sector_acc[sector_of[i] as usize] += p;
        }
        if !norm2.is_finite() {
            return Err(PhaseError::NonFinite {
                context: format!("during joint evolution at t = {t:.6}"),
            });
        }
        norm_drift = norm_drift.max((norm2 - 1.0).abs());
        for (s, r) in sector_acc.iter().zip(&sector_ref) {
            sector_drift = sector_drift.max((s - r).abs());
        }

        let ov: C64 = support.iter().map(|&(i, c)| c * next[i]).sum();
        // bridge isolated zeros of the overlap exactly as the system-side
        // tracker does; a final state orthogonal to the start is still
        // rejected when the phases are read out
        if ov.norm() >= OVERLAP_FLOOR {
            acc_phase += (ov * ov_prev.conj()).arg();
            ov_prev = ov;
        }

        if step >= 1 {
            // centered difference at the previous fine point: cur is the
            // center, prev and next the neighbors
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for i in 0..dim {
                let c = cur[i].conj();
                a += c * next[i];
                b += c * prev[i];
            }
            resid = resid.max(((rot * a - rot.conj() * b).im / (2.0 * dt)).abs());
            resid_raw = resid_raw.max(((a - b).im / (2.0 * dt)).abs());
        }

        if (step + 1) % opts.store_every == 0 || step + 1 == n_steps {
            times.push(t);
            states.push(StateVector::new(problem.basis.clone(), next.clone())?);
        }

        if prev.is_empty() {
            prev = cur.clone();
            std::mem::swap(&mut cur, &mut next);
        } else {
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
    }

    Ok(JointRun {
        times,
        states,
        initial_energy: e0,
        unwrapped_total_phase: acc_phase,
        transport_residual: resid,
        transport_residual_unremoved: resid_raw,
        max_norm_drift: norm_drift,
        max_sector_drift: sector_drift,
        fine_dt: dt,
        duration: t_final,
        system_dim: problem.system_dim,
        system_basis: problem.system_basis.clone(),
    })
}

/// Phase bookkeeping of a joint run.
#[derive(Debug, Clone, Copy)]
pub struct JointPhaseReport {
    /// `arg <Phi(0)|Phi(T)>`, principal branch.
    pub total_phase: f64,
    /// `-<Phi(0)|H|Phi(0)> T`; exact because the joint energy is conserved.
    pub dynamical_phase: f64,
    pub beta_principal: f64,
    pub beta_unwrapped: f64,
    /// `|<Phi0|Phi(T)> - <block 0|block T>|`.  Structurally zero: the
    /// initial state has no reservoir excitation, so components outside the
    /// block never meet the reference.
    pub block_overlap_defect: f64,
    pub initial_energy: f64,
}

pub fn joint_phase_report(run: &JointRun) -> Result<JointPhaseReport> {
    let phi0 = &run.states[0];
    let phi_t = run.states.last().expect("run stores at least the start");
    let ov = phi0.inner(phi_t)?;
    if ov.norm() < OVERLAP_FLOOR {
        return Err(PhaseError::OrthogonalStates {
            overlap: ov.norm(),
            floor: OVERLAP_FLOOR,
        });
    }
    let block0 = run.block_state(0);
    let block_t = run.final_block();
    let block_ov = block0.inner(&block_t)?;
    let defect = (ov - block_ov).norm();

    let total = wrap_principal(ov.arg());
    let dynamical = -run.initial_energy * run.duration;
    let beta_p = wrap_principal(total - dynamical);
    let beta_raw = run.unwrapped_total_phase - dynamical;
    let winding = ((beta_raw - beta_p) / (2.0 * std::f64::consts::PI)).round();
    Ok(JointPhaseReport {
        total_phase: total,
        dynamical_phase: dynamical,
        beta_principal: beta_p,
        beta_unwrapped: beta_p + 2.0 * std::f64::consts::PI * winding,
        block_overlap_defect: defect,
        initial_energy: run.initial_energy,
    })
}
