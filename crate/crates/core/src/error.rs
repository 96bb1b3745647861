use thiserror::Error;

/// Everything that can go wrong while building states, propagating
/// trajectories, or extracting phases from them.
#[derive(Debug, Clone, Error)]
pub enum PhaseError {
    #[error("dimension mismatch: operator is {op_dim}x{op_dim} but the state has {state_dim} amplitudes")]
    DimensionMismatch { op_dim: usize, state_dim: usize },

    #[error("basis mismatch: left state is over [{left}], right state over [{right}]")]
    BasisMismatch { left: String, right: String },

    #[error("operator is not Hermitian: max |A - A^dag| entry is {max_dev:.3e} (tolerance {tol:.1e})")]
    NotHermitian { max_dev: f64, tol: f64 },

    #[error("decay rate must be non-negative and finite, got {rate}")]
    NegativeRate { rate: f64 },

    #[error("states are orthogonal to working precision (|overlap| = {overlap:.3e} <= floor {floor:.1e}); the relative phase is undefined")]
    OrthogonalStates { overlap: f64, floor: f64 },

    #[error("non-finite amplitude encountered {context}")]
    NonFinite { context: String },

    #[error("state must have at least one amplitude")]
    EmptyState,

    #[error("initial state is not normalized: norm^2 = {norm_sqr:.12}")]
    NotNormalized { norm_sqr: f64 },

    #[error("trajectory stores {len} states but the operation needs at least {need}")]
    TrajectoryTooShort { len: usize, need: usize },

    #[error("trajectory norm vanished at step {index} (t = {t:.6}); the normalized quadrature is undefined there")]
    VanishingNorm { index: usize, t: f64 },

    #[error("evolution time {t_final} exceeds the discrete-bath recurrence horizon {t_max:.3}; past it the bath feeds the excitation back")]
    RecurrenceHorizon { t_final: f64, t_max: f64 },

    #[error("joint-space dimension {dim} exceeds the supported maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("bath needs at least {min} modes to stand in for a continuum, got {n}")]
    TooFewModes { n: usize, min: usize },

    #[error("bath mode count must be odd so zero detuning lies on the grid, got {n}")]
    EvenModeCount { n: usize },

    #[error("bath bandwidth {w} is too narrow for decay rate {gamma} (need at least {required})")]
    BandwidthTooNarrow { w: f64, gamma: f64, required: f64 },

    #[error("operation requires a cyclic evolution with B*T = 2*pi, got B*T = {bt}")]
    NotCyclic { bt: f64 },

    #[error("step size must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },

    #[error("invalid parameter: {what}")]
    InvalidParams { what: String },

    #[error("fringe visibility u = {u:.3e} is too small to invert the detection probability")]
    VisibilityCollapse { u: f64 },

    #[error("branch decay rate gamma_g = {gamma_g} exceeds the total rate gamma = {gamma}")]
    ChannelRate { gamma_g: f64, gamma: f64 },
}

pub type Result<T> = std::result::Result<T, PhaseError>;
