//! Geometric phases of decaying two-level systems, computed by parallel
//! transport of the joint system-reservoir state.
//!
//! The crate integrates non-Hermitian no-jump dynamics for two workhorse
//! models (a dispersively read-out qubit and a damped atom-cavity dimer),
//! splits the accumulated phase into dynamical and geometric parts under two
//! conventions, and checks everything against a brute-force discretized
//! reservoir evolved unitarily.  A Ramsey-style interferometry layer maps the
//! phases onto measurable fringe contrasts.
//!
//! Layout:
//! - [`state`]: states, operators, fixed-step RK4 and exact 2x2 propagation
//! - [`phase`]: phase accumulation, dynamical references, transport residuals
//! - [`models`]: closed forms and perturbative expansions for both models
//! - [`bath`]: discretized flat-band reservoirs and the joint unitary oracle
//! - [`ramsey`]: interferometer outcome formulas and their simulations
//! - [`suite`]: the named validation checks behind `validate`
//!
//! Phases follow the physics sign convention `i d|psi>/dt = H |psi>`; all
//! reported principal values live in `(-pi, pi]`.

pub mod bath;
pub mod error;
pub mod models;
pub mod phase;
pub mod ramsey;
pub mod state;
pub mod suite;

pub use error::{PhaseError, Result};
pub use models::{DispersiveQubitParams, JCParams};
pub use phase::{Method, PhaseReport};
pub use state::{C64, Hamiltonian, OperatorMatrix, StateVector, Trajectory};
