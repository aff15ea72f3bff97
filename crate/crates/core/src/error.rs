use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("grid is not symmetric about zero")]
    GridAsymmetric,

    #[error("kernels are defined on different grids or channel counts")]
    GridMismatch,

    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input is not Hermitian at omega = {omega} (deviation {deviation:e}, tolerance {tolerance:e})")]
    NonHermitianInput { omega: f64, deviation: f64, tolerance: f64 },

    #[error("time step {dt} aliases the grid bandwidth (need dt <= {limit})")]
    AliasingRisk { dt: f64, limit: f64 },

    #[error("mixing matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    MixingNotPositive { min_eigenvalue: f64 },

    #[error("line broadening {eta} is below twice the grid spacing {spacing}")]
    BroadeningTooNarrow { eta: f64, spacing: f64 },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("damping kernel vanishes at omega = {omega}; the FDR kernel is undefined there")]
    DampingVanishes { omega: f64 },

    #[error("damping kernel is not positive definite at omega = {omega} (min eigenvalue {min_eigenvalue:e})")]
    NotDamping { omega: f64, min_eigenvalue: f64 },

    #[error("no populated transition line within the broadening of omega = {omega}")]
    NoTransitionNearOmega { omega: f64 },

    #[error("omega = {omega} lies outside the grid (omega_max = {omega_max})")]
    OffGrid { omega: f64, omega_max: f64 },

    #[error("kernels at omega = {omega} carry imaginary cross-correlations; a real phase-space covariance needs real kernels")]
    NonRealKernel { omega: f64 },

    #[error("requested time {t} exceeds the kernel window {t_max}")]
    KernelWindowTooShort { t: f64, t_max: f64 },

    #[error("operation needs a single system mode, got {0}")]
    NotSingleMode(usize),

    #[error("noise spectrum is not positive semidefinite at omega = {omega} (min eigenvalue {min_eigenvalue:e})")]
    SpectrumNotPositive { omega: f64, min_eigenvalue: f64 },

    #[error("local damping needs a damping kernel that is flat around omega0 (relative variation {variation:e})")]
    LocalApproximationInvalid { variation: f64 },

    #[error("integration became unstable at t = {time} (energy {energy:e})")]
    Unstable { time: f64, energy: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
