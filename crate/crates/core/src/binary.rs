//! Binary-treatment layer: mis-classification identities, the `ψ`–`κ̃`
//! cross-restriction, and `β` bounds under non-classical error.
//!
//! With a binary latent treatment the measurement error cannot be classical:
//! its regression slope on `T*` is `ψ = -(α₀ + α₁) ≤ 0`, and fixing `κ̃`
//! (equivalently `σ_w² = s22 (1 - κ̃)`) traces out a curve of feasible
//! `(α₀, α₁)` pairs that bounds `ψ`.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identified_set::{
    g_beta, kappa_lower_bound, BinaryEquality, Correlations, Restrictions,
};

/// Grid resolution for the one-dimensional `κ̃` scan in the binary `β`
/// bounds.
const BETA_BINARY_GRID: usize = 10_001;

/// Mis-classification moments for a binary latent treatment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BinaryMoments {
    /// Prevalence `P(T = 1)`.
    pub p: f64,
    /// Upward mis-classification rate `P(T = 1 | T* = 0)`.
    pub alpha0: f64,
    /// Downward mis-classification rate `P(T = 0 | T* = 1)`.
    pub alpha1: f64,
    /// Latent prevalence `P(T* = 1)`.
    pub p_star: f64,
    /// Non-classical slope `ψ = -(α₀ + α₁)`.
    pub psi: f64,
    /// Intercept `τ = α₀`.
    pub tau: f64,
    /// Classicalized error variance `σ_w²`.
    pub sigma_w_sq: f64,
}

impl BinaryMoments {
    pub fn new(alpha0: f64, alpha1: f64, p: f64) -> Result<Self> {
        let (psi, tau) = psi_tau_from_alphas(alpha0, alpha1)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidBinaryConfiguration(format!(
                "prevalence p = {p} outside (0, 1)"
            )));
        }
        let sigma_w_sq = sigma_w_sq_binary(alpha0, alpha1, p)?;
        let p_star = (p - alpha0) / (1.0 - alpha0 - alpha1);
        if !(p_star > 0.0 && p_star < 1.0) {
            return Err(Error::InfeasiblePrevalence { alpha0, alpha1, p });
        }
        Ok(BinaryMoments {
            p,
            alpha0,
            alpha1,
            p_star,
            psi,
            tau,
            sigma_w_sq,
        })
    }
}

/// `ψ = -(α₀ + α₁)` and `τ = α₀`.
pub fn psi_tau_from_alphas(alpha0: f64, alpha1: f64) -> Result<(f64, f64)> {
    if alpha0 < 0.0 || alpha1 < 0.0 {
        return Err(Error::InvalidBinaryConfiguration(format!(
            "negative mis-classification rate: alpha0 = {alpha0}, alpha1 = {alpha1}"
        )));
    }
    let sum = alpha0 + alpha1;
    if sum >= 1.0 {
        return Err(Error::MisclassificationWorseThanCoinFlip { sum });
    }
    Ok((-sum, alpha0))
}

/// `σ_w² = α₁ (1 - α₀) + (1 - p)(α₀ - α₁)`.
pub fn sigma_w_sq_binary(alpha0: f64, alpha1: f64, p: f64) -> Result<f64> {
    let _ = psi_tau_from_alphas(alpha0, alpha1)?;
    if !(alpha0 < p && alpha1 < 1.0 - p) {
        return Err(Error::InfeasiblePrevalence { alpha0, alpha1, p });
    }
    Ok(alpha1 * (1.0 - alpha0) + (1.0 - p) * (alpha0 - alpha1))
}

fn m_of_p(p: f64) -> f64 {
    ((1.0 - p) * (2.0 * p - 1.0)).max(p * (1.0 - 2.0 * p))
}

/// Bounds `[ψ_low(κ̃), ψ_high(κ̃)]` implied by `σ_w² = s22 (1 - κ̃)` and the
/// feasible `(α₀, α₁)` region.
pub fn psi_bounds(s22: f64, kappa_tilde: f64, p: f64) -> Result<(f64, f64)> {
    let sw_sq = s22 * (1.0 - kappa_tilde);
    let var_t = p * (1.0 - p);
    if sw_sq >= var_t {
        return Err(Error::MeasurementErrorExceedsBinaryVariance { sw_sq, var_t });
    }
    let psi_high = -sw_sq / p.max(1.0 - p);
    let psi_low = if sw_sq <= m_of_p(p) {
        -sw_sq / p.min(1.0 - p)
    } else {
        2.0 * (var_t - sw_sq).sqrt() - 1.0
    };
    Ok((psi_low, psi_high))
}

/// Maximal mis-classification rates at the data-determined `κ̃` lower bound:
/// the axis intercepts of the outer feasibility envelope plus the most
/// negative `ψ`.
pub fn alpha_bounds(s22: f64, big_l: f64, p: f64) -> Result<(f64, f64, f64)> {
    let sw_sq = s22 * (1.0 - big_l);
    let (psi_min, _) = psi_bounds(s22, big_l, p)?;
    Ok((sw_sq / (1.0 - p), sw_sq / p, psi_min))
}

/// `ψ` under a linear equality restriction on `(α₀, α₁)`, at a given `κ̃`.
pub fn psi_under_equality(
    kappa_tilde: f64,
    s22: f64,
    p: f64,
    constraint: BinaryEquality,
) -> Result<f64> {
    let sw_sq = s22 * (1.0 - kappa_tilde);
    let (alpha0, alpha1) = match constraint {
        BinaryEquality::None => {
            return Err(Error::InvalidArgument(
                "psi_under_equality requires an equality constraint".into(),
            ))
        }
        BinaryEquality::OneSidedAlpha0Zero => (0.0, sw_sq / p),
        BinaryEquality::OneSidedAlpha1Zero => (sw_sq / (1.0 - p), 0.0),
        BinaryEquality::Symmetric | BinaryEquality::PrevalencePreserving => {
            // α₁ = c α₀ turns the σ_w² identity into
            // c α₀² - (c p + 1 - p) α₀ + σ_w² = 0; the larger root
            // violates α₀ < p.
            let c = match constraint {
                BinaryEquality::Symmetric => 1.0,
                _ => (1.0 - p) / p,
            };
            let b = c * p + 1.0 - p;
            let disc = b * b - 4.0 * c * sw_sq;
            if disc < 0.0 {
                return Err(Error::EqualityRestrictionInfeasible(format!(
                    "no real alpha0 root at kappa_tilde = {kappa_tilde}"
                )));
            }
            let alpha0 = (b - disc.sqrt()) / (2.0 * c);
            (alpha0, c * alpha0)
        }
    };
    if sw_sq == 0.0 {
        return Ok(0.0);
    }
    // Verify the implied moments are a valid binary configuration.
    let m = BinaryMoments::new(alpha0, alpha1, p).map_err(|e| {
        Error::EqualityRestrictionInfeasible(format!(
            "implied (alpha0, alpha1) = ({alpha0}, {alpha1}) infeasible: {e}"
        ))
    })?;
    debug_assert!((m.sigma_w_sq - sw_sq).abs() <= 1e-10 * sw_sq.max(1.0));
    Ok(m.psi)
}

/// Bounds for `β = (1 + ψ) β̃` with binary treatment: a one-dimensional
/// scan over `κ̃` of the candidate products
/// `(1 + ψ)(s13/s23 - g)`, `ψ` at its per-`κ̃` extremes and `g` at the `ρ`
/// edges. Returns `None` when the restricted set is empty.
pub fn beta_bounds_binary(
    sigma: &Matrix3<f64>,
    restr: &Restrictions,
    p: f64,
) -> Result<Option<(f64, f64)>> {
    let c = Correlations::from_sigma(sigma);
    let big_l = kappa_lower_bound(&c)?;
    let Some((klo, khi)) = restr.kappa_window(big_l) else {
        return Ok(None);
    };
    if restr.rho_lo <= -1.0 && restr.rho_hi >= 1.0 {
        return Ok(Some((f64::NEG_INFINITY, f64::INFINITY)));
    }
    let s22 = sigma[(1, 1)];
    let anchor = sigma[(0, 2)] / sigma[(1, 2)];

    let mut kappas: Vec<f64> = (0..BETA_BINARY_GRID)
        .map(|i| klo + (khi - klo) * i as f64 / (BETA_BINARY_GRID - 1) as f64)
        .collect();
    // Analytic candidates: interior stationary points of g at the ρ edges,
    // and the ψ_low branch switch where s22(1 - κ̃) = m(p).
    for rho in [restr.rho_lo, restr.rho_hi] {
        if rho != 0.0 {
            let root = (1.0 - rho * rho).max(0.0).sqrt();
            let base = 2.0 * c.r12 * c.r12 / (rho * rho);
            for kappa in [base * (1.0 - root), base * (1.0 + root)] {
                if kappa >= klo && kappa <= khi {
                    kappas.push(kappa);
                }
            }
        }
    }
    if s22 > 0.0 {
        let branch = 1.0 - m_of_p(p) / s22;
        if branch >= klo && branch <= khi {
            kappas.push(branch);
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut any_feasible = false;
    // Binary feasibility edge s22(1 - κ̃) = p(1-p): approaching it from
    // above, ψ_low -> -1 and β -> 0. When the edge is interior to the window
    // the limit value 0 belongs to the closure of the β range.
    let edge = 1.0 - p * (1.0 - p) / s22;
    if edge >= klo && edge < khi {
        lo = 0.0;
        hi = 0.0;
    }
    for &kappa in &kappas {
        let Ok((psi_lo, psi_hi)) = psi_bounds(s22, kappa, p) else {
            // s22(1 - κ̃) exceeds p(1-p): this κ̃ is infeasible for a binary T.
            continue;
        };
        any_feasible = true;
        let g_c = g_beta(sigma, &c, kappa, restr.rho_lo);
        let g_d = g_beta(sigma, &c, kappa, restr.rho_hi);
        for psi in [psi_lo, psi_hi] {
            for g in [g_c, g_d] {
                let b = (1.0 + psi) * (anchor - g);
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
    }
    if !any_feasible {
        return Err(Error::MeasurementErrorExceedsBinaryVariance {
            sw_sq: s22 * (1.0 - khi),
            var_t: p * (1.0 - p),
        });
    }
    Ok(Some((lo, hi)))
}
