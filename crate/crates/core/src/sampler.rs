//! Surface-area-uniform sampling on the conditional identified set.
//!
//! The set is the graph of the manifold function over the rectangle
//! intersection, so uniform-on-surface draws are obtained by proposing
//! uniformly on the rectangle and accepting with probability proportional to
//! the local surface measure `M = sqrt(1 + f_ρ² + f_κ²)`. For a binary
//! treatment each accepted point is extended with `ψ` drawn uniformly on its
//! per-`κ̃` feasible interval, and `β = (1 + ψ) β̃`.

use rand::Rng;
use serde::Serialize;

use crate::binary::{psi_bounds, psi_under_equality};
use crate::error::{Error, Result};
use crate::identified_set::{
    f_rho_uzeta, kappa_lower_bound, rho_uv, sigma_u, BinaryEquality, Correlations, Restrictions,
    KAPPA_GUARD,
};
use crate::posterior::CovDraw;
use crate::reduced_form::TreatmentKind;

/// Proposal budget for one structural draw.
const MAX_ATTEMPTS: usize = 100_000;
/// Envelope safety factor over the pre-scan maximum.
const ENVELOPE_INFLATION: f64 = 1.1;
/// Pre-scan grid resolution per axis.
const PRESCAN: usize = 64;
/// Proposals this close to `|ρ| = 1` lie outside the open set and are
/// rejected.
const RHO_EDGE: f64 = 1e-12;

/// One structural point on the conditional identified set.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamDraw {
    pub kappa_tilde: f64,
    pub rho_uxistar: f64,
    pub rho_uzeta: f64,
    pub rho_uv: f64,
    pub sigma_u: f64,
    /// 0 exactly for continuous treatment.
    pub psi: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    /// Index of the covariance draw this point conditions on.
    pub source_draw: usize,
}

/// Local surface measure of the manifold at `(κ̃, ρ_uξ*)`.
pub fn surface_measure(c: &Correlations, kappa: f64, rho: f64) -> Result<f64> {
    let big_l = kappa_lower_bound(c)?;
    if kappa <= big_l || kappa > 1.0 || rho.abs() >= 1.0 {
        return Err(Error::SurfaceMeasureBoundary {
            kappa_tilde: kappa,
            rho,
        });
    }
    Ok(surface_measure_unchecked(c, kappa, rho))
}

pub(crate) fn surface_measure_unchecked(c: &Correlations, kappa: f64, rho: f64) -> f64 {
    let r12sq = c.r12 * c.r12;
    let gap = kappa - r12sq;
    let one_m_rho2 = 1.0 - rho * rho;
    let a = c.r12 * c.r23 - kappa * c.r13;
    let d_rho = c.r23 / kappa.sqrt() + rho * a / (kappa * gap * one_m_rho2).sqrt();
    let d_kappa = -rho * c.r23 / (2.0 * kappa.powf(1.5))
        + (one_m_rho2 / (kappa * gap)).sqrt()
            * (c.r13 + 0.5 * a * (1.0 / kappa + 1.0 / gap));
    (1.0 + d_rho * d_rho + d_kappa * d_kappa).sqrt()
}

/// Draws one structural point for a covariance draw, or `None` when the
/// restricted set is empty. The output is a deterministic function of the
/// draw, the restrictions, and the RNG stream.
pub fn draw_structural(
    draw: &CovDraw,
    restr: &Restrictions,
    kind: TreatmentKind,
    rng: &mut impl Rng,
) -> Result<Option<ParamDraw>> {
    let Some((klo, khi)) = restr.kappa_window(draw.big_l) else {
        return Ok(None);
    };
    let c = draw.correlations();
    let (rlo, rhi) = (restr.rho_lo, restr.rho_hi);
    if rlo >= 1.0 - RHO_EDGE || rhi <= -1.0 + RHO_EDGE {
        return Err(Error::InvalidArgument(
            "rho_uxistar rectangle lies on the |rho| = 1 boundary".into(),
        ));
    }

    // Envelope estimate from a cell-centred pre-scan of M.
    let mut m_sup: f64 = 1.0;
    for i in 0..PRESCAN {
        let kappa = klo + (khi - klo) * (i as f64 + 0.5) / PRESCAN as f64;
        for j in 0..PRESCAN {
            let rho = (rlo + (rhi - rlo) * (j as f64 + 0.5) / PRESCAN as f64)
                .clamp(-1.0 + RHO_EDGE, 1.0 - RHO_EDGE);
            let m = surface_measure_unchecked(&c, kappa.max(klo + KAPPA_GUARD), rho);
            if m.is_finite() {
                m_sup = m_sup.max(m);
            }
        }
    }
    m_sup *= ENVELOPE_INFLATION;

    for _ in 0..MAX_ATTEMPTS {
        let kappa = klo + (khi - klo) * rng.random::<f64>();
        let rho = rlo + (rhi - rlo) * rng.random::<f64>();
        if rho.abs() >= 1.0 - RHO_EDGE || kappa <= draw.big_l + KAPPA_GUARD {
            continue;
        }
        let m = surface_measure_unchecked(&c, kappa, rho);
        if !m.is_finite() {
            continue;
        }
        if m > m_sup {
            // Raise the envelope and re-decide this proposal under it.
            m_sup = ENVELOPE_INFLATION * m;
        }
        if rng.random::<f64>() >= m / m_sup {
            continue;
        }

        let sigma = &draw.sigma;
        let (s11, s22, s33) = (sigma[(0, 0)], sigma[(1, 1)], sigma[(2, 2)]);
        let (s13, s23) = (sigma[(0, 2)], sigma[(1, 2)]);
        let rho_uzeta = f_rho_uzeta(&c, kappa, rho);
        let sig_u = sigma_u(s11, c.r12, kappa, rho)?;
        let sigma_uzeta = sig_u * rho_uzeta * s33.sqrt();
        let beta_tilde = (s13 - sigma_uzeta) / s23;
        let ruv = rho_uv(kappa, rho, rho_uzeta, c.r23)?;
        let psi = match kind {
            TreatmentKind::Continuous => 0.0,
            TreatmentKind::Binary => {
                let p = draw.p_hat.ok_or_else(|| {
                    Error::InvalidArgument("binary treatment requires a prevalence p".into())
                })?;
                match restr.binary_equality {
                    BinaryEquality::None => {
                        let Ok((lo, hi)) = psi_bounds(s22, kappa, p) else {
                            // This κ̃ is infeasible for a binary latent
                            // treatment.
                            continue;
                        };
                        lo + (hi - lo) * rng.random::<f64>()
                    }
                    // An equality restriction pins ψ at each κ̃; κ̃ values
                    // where the restriction is infeasible are rejected.
                    eq => match psi_under_equality(kappa, s22, p, eq) {
                        Ok(psi) => psi,
                        Err(_) => continue,
                    },
                }
            }
        };
        return Ok(Some(ParamDraw {
            kappa_tilde: kappa,
            rho_uxistar: rho,
            rho_uzeta,
            rho_uv: ruv,
            sigma_u: sig_u,
            psi,
            beta: (1.0 + psi) * beta_tilde,
            beta_tilde,
            source_draw: draw.index,
        }));
    }
    Err(Error::AcceptanceFailure {
        attempts: MAX_ATTEMPTS,
    })
}
