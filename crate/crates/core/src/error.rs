use thiserror::Error;

/// Errors surfaced by the estimation and inference pipeline.
///
/// An empty restricted identified set is *not* an error: operations that can
/// encounter one return `Option` or set an `empty` flag instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("singular design: control matrix is rank deficient")]
    SingularDesign,

    #[error("irrelevant instrument: |s23| = {s23_abs:.3e} is below tolerance {tol:.3e}")]
    IrrelevantInstrument { s23_abs: f64, tol: f64 },

    #[error("degenerate residual covariance: residual cross-product matrix is not positive definite")]
    DegenerateResidualCovariance,

    #[error("restriction inconsistent with R²: lambda = {lambda} and R² = {r2} imply kappa = {kappa} outside (0, 1]")]
    RestrictionInconsistentWithR2 { lambda: f64, r2: f64, kappa: f64 },

    #[error("inconsistent auxiliary estimates: OLS slope {b_ols} and IV slope {b_iv} do not yield a kappa in (0, 1]")]
    InconsistentAuxiliaryEstimates { b_ols: f64, b_iv: f64 },

    #[error("invalid correlation triple ({r12}, {r13}, {r23}): correlation matrix is not positive definite")]
    InvalidCorrelationTriple { r12: f64, r13: f64, r23: f64 },

    #[error("outside identified set: kappa_tilde = {kappa_tilde} does not exceed the bound {bound}")]
    OutsideIdentifiedSet { kappa_tilde: f64, bound: f64 },

    #[error("endogeneity correlation at boundary: |rho_uxistar| = 1")]
    EndogeneityAtBoundary,

    #[error("surface measure undefined at boundary: kappa_tilde = {kappa_tilde}, rho_uxistar = {rho}")]
    SurfaceMeasureBoundary { kappa_tilde: f64, rho: f64 },

    #[error("invalid restrictions: {0}")]
    InvalidRestrictions(String),

    #[error("mis-classification worse than coin flip: alpha0 + alpha1 = {sum} >= 1")]
    MisclassificationWorseThanCoinFlip { sum: f64 },

    #[error("infeasible prevalence: alpha0 = {alpha0}, alpha1 = {alpha1}, p = {p}")]
    InfeasiblePrevalence { alpha0: f64, alpha1: f64, p: f64 },

    #[error("measurement-error variance exceeds binary variance: s22(1 - kappa_tilde) = {sw_sq} >= p(1-p) = {var_t}")]
    MeasurementErrorExceedsBinaryVariance { sw_sq: f64, var_t: f64 },

    #[error("equality restriction infeasible at this kappa_tilde: {0}")]
    EqualityRestrictionInfeasible(String),

    #[error("invalid binary configuration: {0}")]
    InvalidBinaryConfiguration(String),

    #[error("degenerate structural configuration: {0}")]
    DegenerateStructuralConfiguration(String),

    #[error("target not in identified set: kappa_tilde = {kappa_tilde}, rho_uxistar = {rho}, kappa lower bound = {bound}")]
    TargetNotInIdentifiedSet { kappa_tilde: f64, rho: f64, bound: f64 },

    #[error("posterior concentrated on degenerate region: redraw budget of {budget} exceeded")]
    PosteriorDegenerate { budget: usize },

    #[error("acceptance failure: manifold sampler exhausted {attempts} proposals")]
    AcceptanceFailure { attempts: usize },

    #[error("insufficient posterior sample: {got} nonempty draws, need at least {need}")]
    InsufficientPosteriorSample { got: usize, need: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
