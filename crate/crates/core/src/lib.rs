//! Partial identification and Bayesian inference for the effect of an
//! endogenous, mis-measured treatment instrumented by a possibly-invalid
//! instrument.
//!
//! The pipeline is: project out controls and estimate the reduced-form
//! covariance of `(y, T, z)` ([`reduced_form`]); characterize the conditional
//! identified set, a two-dimensional manifold in `(κ̃, ρ_uξ*, ρ_uζ)`, and its
//! sharp interval bounds under user restrictions ([`identified_set`],
//! [`binary`]); simulate the covariance posterior ([`posterior`]); place a
//! surface-area-uniform reference prior on the manifold ([`sampler`]); and
//! aggregate into set-level and parameter-level posterior summaries
//! ([`inference`]). [`oracle`] holds the independent ground-truth generators
//! (forward model, exact binary enumeration, sharpness construction, grid
//! extremizers) the closed forms are validated against.

pub mod binary;
pub mod error;
pub mod identified_set;
pub mod inference;
pub mod oracle;
pub mod posterior;
pub mod reduced_form;
pub mod sampler;

pub use binary::{
    alpha_bounds, beta_bounds_binary, psi_bounds, psi_tau_from_alphas, psi_under_equality,
    sigma_w_sq_binary, BinaryMoments,
};
pub use error::{Error, Result};
pub use identified_set::{
    beta_tilde, beta_tilde_bounds, conditional_set_bounds, f_rho_uzeta, g_beta,
    kappa_lower_bound, rho_uv, rho_uzeta, rho_uzeta_bounds, rho_uzeta_unrestricted_bounds,
    sigma_u, BinaryEquality, Correlations, Restrictions, SetBounds, KAPPA_GUARD,
};
pub use inference::{infer_parameter, infer_set, ParamInferenceSummary, SetInferenceSummary};
pub use oracle::{
    forward_binary, forward_sigma, grid_extrema, random_config, rescale_psi,
    sharpness_construction, BinaryEnumeration, ForwardModel, GridTarget, SharpnessCertificate,
    StructuralConfig,
};
pub use posterior::{draw_sigma, posterior_mean, sample_inverse_wishart, CovDraw, SigmaDraws};
pub use reduced_form::{
    fit_reduced_form, kappa_from_estimates, kappa_from_lambda, Dataset, ReducedFormFit,
    TreatmentKind, RELEVANCE_TOL,
};
pub use sampler::{draw_structural, surface_measure, ParamDraw};
