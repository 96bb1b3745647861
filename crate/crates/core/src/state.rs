//! Complex state and operator primitives, plus fixed-step propagation of
//! no-jump trajectories under non-Hermitian conditional Hamiltonians.
//!
//! The central object is the unnormalized no-jump trajectory: a state evolved
//! under `H - i(gamma/2) o^dag o` whose squared norm is the survival
//! probability.  Nothing in this module ever renormalizes; derived quantities
//! that need normalization do it themselves and say so.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{PhaseError, Result};

pub type C64 = Complex64;

/// Entrywise tolerance for declaring an operator Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Maximum deviation of an initial norm^2 from one before propagation refuses.
const NORMALIZATION_TOL: f64 = 1e-9;

/// A pure state over an explicit, ordered basis.
///
/// The basis labels travel with the amplitudes so that cross-module overlaps
/// (system-only against joint-state blocks, closed form against integrator)
/// fail loudly instead of silently misaligning components.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Arc<Vec<String>>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: Arc<Vec<String>>, amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(PhaseError::EmptyState);
        }
        if basis.len() != amps.len() {
            return Err(PhaseError::DimensionMismatch {
                op_dim: basis.len(),
                state_dim: amps.len(),
            });
        }
        if !amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(PhaseError::NonFinite {
                context: "in state construction".into(),
            });
        }
        Ok(Self { basis, amps })
    }

    /// Convenience constructor that owns fresh labels.
    pub fn from_labels<S: Into<String>>(labels: Vec<S>, amps: Vec<C64>) -> Result<Self> {
        let basis = Arc::new(labels.into_iter().map(Into::into).collect::<Vec<_>>());
        Self::new(basis, amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn basis(&self) -> &Arc<Vec<String>> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>` with the physics convention: conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_basis(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn check_same_basis(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis {
            Ok(())
        } else {
            Err(PhaseError::BasisMismatch {
                left: preview(&self.basis),
                right: preview(&other.basis),
            })
        }
    }

    /// Largest per-component modulus of the difference; basis-checked.
    pub fn max_amp_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

fn preview(labels: &[String]) -> String {
    const SHOW: usize = 4;
    if labels.len() <= SHOW {
        labels.join(", ")
    } else {
        format!("{}, ... ({} labels)", labels[..SHOW].join(", "), labels.len())
    }
}

/// Anything that can act on a complex vector as a (possibly non-Hermitian)
/// Hamiltonian.  Dense matrices implement it directly; the discretized-bath
/// generator implements it without ever materializing the matrix.
pub trait Hamiltonian {
    fn dim(&self) -> usize;

    /// `out = H * x`.  Both slices have length `dim()`.
    fn apply(&self, x: &[C64], out: &mut [C64]);

    /// `<x|H|x>` without intermediate allocation.
    fn expectation(&self, x: &[C64]) -> C64 {
        let mut hx = vec![C64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut hx);
        x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(PhaseError::EmptyState);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(PhaseError::DimensionMismatch {
                    op_dim: dim,
                    state_dim: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { dim, entries })
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                let dev = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(dev);
            }
        }
        worst
    }

    pub fn require_hermitian(&self) -> Result<()> {
        let dev = self.hermiticity_defect();
        if dev > HERMITICITY_TOL {
            Err(PhaseError::NotHermitian {
                max_dev: dev,
                tol: HERMITICITY_TOL,
            })
        } else {
            Ok(())
        }
    }

    /// `A^dag * A`, the jump-number operator for a lowering operator `A`.
    pub fn dagger_times_self(&self) -> OperatorMatrix {
        let n = self.dim;
        let mut out = OperatorMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Frobenius norm; used only to set scale-aware tolerances.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for OperatorMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for OperatorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Hamiltonian for OperatorMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], out: &mut [C64]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.dim)) {
            *o = row.iter().zip(x).map(|(h, a)| h * a).sum();
        }
    }
}

/// Build the no-jump generator `H_s - i(gamma/2) o^dag o`.
///
/// `h_s` must be Hermitian; the anti-Hermitian part of the result encodes the
/// population leak through the channel `o` and nothing else.
pub fn conditional_hamiltonian(
    h_s: &OperatorMatrix,
    o: &OperatorMatrix,
    gamma: f64,
) -> Result<OperatorMatrix> {
    h_s.require_hermitian()?;
    if o.dim() != h_s.dim() {
        return Err(PhaseError::DimensionMismatch {
            op_dim: h_s.dim(),
            state_dim: o.dim(),
        });
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(PhaseError::NegativeRate { rate: gamma });
    }
    let number = o.dagger_times_self();
    let mut h = h_s.clone();
    let half = C64::new(0.0, -0.5 * gamma);
    for i in 0..h.dim() {
        for j in 0..h.dim() {
            h[(i, j)] += half * number[(i, j)];
        }
    }
    Ok(h)
}

/// A stored no-jump (or joint) evolution on a uniform time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(PhaseError::DimensionMismatch {
                op_dim: times.len(),
                state_dim: states.len(),
            });
        }
        if states.is_empty() {
            return Err(PhaseError::TrajectoryTooShort { len: 0, need: 1 });
        }
        // times strictly increasing from zero
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PhaseError::InvalidParams {
                what: "trajectory times must start at 0 and increase strictly".into(),
            });
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Survival probability: squared norm of the last stored state.
    pub fn survival_prob(&self) -> f64 {
        self.final_state().norm_sqr()
    }
}

/// One classical 4th-order step of `psi' = -i H psi`, writing into `next`.
///
/// `k1..k4,tmp` are scratch buffers of the state dimension owned by the caller
/// so that long runs do not allocate per step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn rk4_step(
    h: &dyn Hamiltonian,
    psi: &[C64],
    dt: f64,
    next: &mut Vec<C64>,
    k1: &mut [C64],
    k2: &mut [C64],
    k3: &mut [C64],
    k4: &mut [C64],
    tmp: &mut [C64],
) {
    let mi = C64::new(0.0, -1.0);
    h.apply(psi, k1);
    for k in k1.iter_mut() {
        *k *= mi;
    }
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k1.iter())) {
        *t = p + 0.5 * dt * k;
    }
    h.apply(tmp, k2);
    for k in k2.iter_mut() {
        *k *= mi;
    }
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k2.iter())) {
        *t = p + 0.5 * dt * k;
    }
    h.apply(tmp, k3);
    for k in k3.iter_mut() {
        *k *= mi;
    }
    for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k3.iter())) {
        *t = p + dt * k;
    }
    h.apply(tmp, k4);
    for k in k4.iter_mut() {
        *k *= mi;
    }
    next.clear();
    next.extend(
        psi.iter()
            .enumerate()
            .map(|(i, p)| p + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])),
    );
}

/// Default step: fine enough that phase errors sit far below every tolerance
/// in this crate, coarse enough that a full cycle is a few thousand steps.
pub fn default_step(t_final: f64) -> f64 {
    (1e-3_f64).min(t_final / 1e4).max(f64::MIN_POSITIVE)
}

/// Propagate `psi0` under `-iH` with a fixed-step classical 4th-order scheme,
/// storing every step.  The requested `dt` is rounded down so the grid lands
/// exactly on `t_final`.  No renormalization is ever applied; for a decaying
/// generator the stored norms fall monotonically and the caller reads the
/// survival probability straight off the trajectory.
pub fn propagate(
    h: &dyn Hamiltonian,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    if h.dim() != psi0.dim() {
        return Err(PhaseError::DimensionMismatch {
            op_dim: h.dim(),
            state_dim: psi0.dim(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PhaseError::InvalidStep { dt });
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(PhaseError::InvalidParams {
            what: format!("t_final must be non-negative and finite, got {t_final}"),
        });
    }
    let n2 = psi0.norm_sqr();
    if (n2 - 1.0).abs() > NORMALIZATION_TOL {
        return Err(PhaseError::NotNormalized { norm_sqr: n2 });
    }

    let n_steps = if t_final == 0.0 {
        0
    } else {
        (t_final / dt).ceil() as usize
    };
    let dt_eff = if n_steps == 0 { 0.0 } else { t_final / n_steps as f64 };

    let d = psi0.dim();
    let mut k1 = vec![C64::new(0.0, 0.0); d];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut next: Vec<C64> = Vec::with_capacity(d);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(psi0.clone());

    let basis = psi0.basis().clone();
    let mut cur = psi0.amplitudes().to_vec();
    for step in 0..n_steps {
        rk4_step(
            h, &cur, dt_eff, &mut next, &mut k1, &mut k2, &mut k3, &mut k4, &mut tmp,
        );
        std::mem::swap(&mut cur, &mut next);
        let t = if step + 1 == n_steps {
            t_final
        } else {
            (step + 1) as f64 * dt_eff
        };
        if !cur.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(PhaseError::NonFinite {
                context: format!("during propagation at t = {t:.6} (step too large?)"),
            });
        }
        times.push(t);
        states.push(StateVector::new(basis.clone(), cur.clone())?);
    }
    Trajectory::new(times, states)
}

/// Exact `exp(-iHt) psi0` for a 2x2 generator via the half-trace reduction
///
///   exp(-iHt) = e^{-i mu t} [cos(Dt) I - i t sinc(Dt) (H - mu I)]
///
/// with `mu = tr(H)/2` and `D^2 = ((h00-h11)/2)^2 + h01 h10`.  The even
/// functions of `D` make the result independent of the square-root branch,
/// and the series guard below keeps it finite through `D -> 0`, which is
/// exactly the exceptional point of the conditional JC generator.
pub fn exact_propagate_2level(h: &OperatorMatrix, psi0: &StateVector, t: f64) -> Result<StateVector> {
    if h.dim() != 2 {
        return Err(PhaseError::DimensionMismatch {
            op_dim: h.dim(),
            state_dim: 2,
        });
    }
    if psi0.dim() != 2 {
        return Err(PhaseError::DimensionMismatch {
            op_dim: 2,
            state_dim: psi0.dim(),
        });
    }
    let mu = 0.5 * (h[(0, 0)] + h[(1, 1)]);
    let a = 0.5 * (h[(0, 0)] - h[(1, 1)]);
    let d2 = a * a + h[(0, 1)] * h[(1, 0)];
    let d = d2.sqrt();
    let z = d * t;
    let (cos_z, sinc_z) = cos_and_sinc(z);

    let phase = (C64::new(0.0, -1.0) * mu * t).exp();
    let m = [
        [a, h[(0, 1)]],
        [h[(1, 0)], -a],
    ];
    let p = psi0.amplitudes();
    let mp = [
        m[0][0] * p[0] + m[0][1] * p[1],
        m[1][0] * p[0] + m[1][1] * p[1],
    ];
    let it = C64::new(0.0, t);
    let amps = vec![
        phase * (cos_z * p[0] - it * sinc_z * mp[0]),
        phase * (cos_z * p[1] - it * sinc_z * mp[1]),
    ];
    StateVector::new(psi0.basis().clone(), amps)
}

/// (cos z, sin(z)/z) with a series fallback for small |z|.
///
/// The direct quotient loses digits below |z| ~ 1e-4 and divides by zero at
/// the exceptional point; both series truncate at relative error ~ |z|^6.
pub(crate) fn cos_and_sinc(z: C64) -> (C64, C64) {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        let cos = 1.0 - z2 / 2.0 + z2 * z2 / 24.0;
        let sinc = 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
        (cos, sinc)
    } else {
        (z.cos(), z.sin() / z)
    }
}
