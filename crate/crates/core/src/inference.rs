//! Posterior aggregation: inference for the identified set (emptiness and
//! validity probabilities, symmetrically expanded credible sets) and for the
//! partially identified parameter under the uniform reference prior on the
//! manifold (medians and HPD intervals).

use nalgebra::Matrix3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identified_set::{conditional_set_bounds, Restrictions, SetBounds};
use crate::posterior::CovDraw;
use crate::reduced_form::TreatmentKind;
use crate::sampler::ParamDraw;

/// Bisection tolerance for the credible-set expansion, relative to the draw
/// scale.
const EXPAND_TOL: f64 = 1e-8;

/// Set-level inference output.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SetInferenceSummary {
    /// Fraction of draws whose restricted identified set is empty.
    pub p_empty: f64,
    /// Fraction of all draws whose set contains the valid-instrument point
    /// `ρ_uζ = 0`.
    pub p_valid: f64,
    /// The same probability among nonempty draws only.
    pub p_valid_nonempty: f64,
    pub ci_rho_uzeta: (f64, f64),
    pub ci_beta: (f64, f64),
    /// Bounds evaluated at the posterior-mean covariance.
    pub anchor_bounds: SetBounds,
    /// True when the anchor set was empty and expansion instead started from
    /// the componentwise median of the nonempty per-draw endpoints.
    pub anchor_fallback: bool,
    pub coverage: f64,
    pub draw_count: usize,
}

/// Parameter-level inference output, computed from nonempty draws only.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamInferenceSummary {
    pub median_rho_uzeta: f64,
    pub median_beta: f64,
    pub hpd_rho_uzeta: (f64, f64),
    pub hpd_beta: (f64, f64),
    pub kept_draws: usize,
}

fn check_coverage(coverage: f64) -> Result<()> {
    if !(coverage > 0.5 && coverage < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage = {coverage} outside (0.5, 1)"
        )));
    }
    Ok(())
}

fn median_of(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Smallest symmetric expansion of `anchor` that makes at least `target` of
/// the intervals subsets, together with which sides must be infinite.
fn expand_interval(anchor: (f64, f64), intervals: &[(f64, f64)], target: usize) -> (f64, f64) {
    // Per-interval expansion demand under each finiteness scenario; a
    // scenario is feasible when enough demands are finite.
    let demand = |lo_inf: bool, hi_inf: bool| -> Vec<f64> {
        intervals
            .iter()
            .map(|&(lo, hi)| {
                let need_lo = if lo_inf { 0.0 } else { anchor.0 - lo };
                let need_hi = if hi_inf { 0.0 } else { hi - anchor.1 };
                need_lo.max(need_hi).max(0.0)
            })
            .collect()
    };
    let scenarios = [(false, false), (true, false), (false, true), (true, true)];
    for (lo_inf, hi_inf) in scenarios {
        let demands = demand(lo_inf, hi_inf);
        let finite: Vec<f64> = demands.iter().copied().filter(|d| d.is_finite()).collect();
        if finite.len() < target {
            continue;
        }
        let scale = intervals
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .filter(|v| v.is_finite())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let count = |delta: f64| demands.iter().filter(|&&d| d <= delta).count();
        let mut hi_d = finite.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut lo_d = 0.0f64;
        if count(lo_d) < target {
            while hi_d - lo_d > EXPAND_TOL * scale {
                let mid = 0.5 * (lo_d + hi_d);
                if count(mid) >= target {
                    hi_d = mid;
                } else {
                    lo_d = mid;
                }
            }
        } else {
            hi_d = 0.0;
        }
        let delta = hi_d;
        let lo = if lo_inf {
            f64::NEG_INFINITY
        } else {
            anchor.0 - delta
        };
        let hi = if hi_inf {
            f64::INFINITY
        } else {
            anchor.1 + delta
        };
        return (lo, hi);
    }
    (f64::NEG_INFINITY, f64::INFINITY)
}

fn draw_bounds(
    draw: &CovDraw,
    restr: &Restrictions,
    kind: TreatmentKind,
) -> Result<SetBounds> {
    match conditional_set_bounds(&draw.sigma, draw.p_hat, restr, kind) {
        Ok(b) => Ok(b),
        // No feasible binary model at any admissible kappa_tilde: the set is
        // empty for this draw, not an error.
        Err(Error::MeasurementErrorExceedsBinaryVariance { .. }) => Ok(SetBounds::empty_set()),
        Err(e) => Err(e),
    }
}

/// Inference for the identified set itself: emptiness and validity
/// probabilities plus credible sets that start from the bounds at the
/// posterior-mean covariance and expand both endpoints outward symmetrically
/// until `coverage` of the nonempty per-draw intervals are subsets.
pub fn infer_set(
    draws: &[CovDraw],
    anchor_sigma: &Matrix3<f64>,
    restr: &Restrictions,
    kind: TreatmentKind,
    coverage: f64,
) -> Result<SetInferenceSummary> {
    check_coverage(coverage)?;
    if draws.len() < 100 {
        return Err(Error::InsufficientPosteriorSample {
            got: draws.len(),
            need: 100,
        });
    }
    let bounds: Vec<SetBounds> = draws
        .iter()
        .map(|d| draw_bounds(d, restr, kind))
        .collect::<Result<_>>()?;
    let n = bounds.len();
    let empties = bounds.iter().filter(|b| b.empty).count();
    let valid = bounds.iter().filter(|b| b.contains_valid).count();
    let nonempty: Vec<&SetBounds> = bounds.iter().filter(|b| !b.empty).collect();
    let p_empty = empties as f64 / n as f64;
    let p_valid = valid as f64 / n as f64;
    let p_valid_nonempty = if nonempty.is_empty() {
        0.0
    } else {
        valid as f64 / nonempty.len() as f64
    };

    let p_hat = draws[0].p_hat;
    let anchor_raw = match conditional_set_bounds(anchor_sigma, p_hat, restr, kind) {
        Ok(b) => b,
        Err(Error::MeasurementErrorExceedsBinaryVariance { .. }) => SetBounds::empty_set(),
        Err(e) => return Err(e),
    };
    if nonempty.is_empty() {
        return Ok(SetInferenceSummary {
            p_empty,
            p_valid,
            p_valid_nonempty,
            ci_rho_uzeta: (f64::NAN, f64::NAN),
            ci_beta: (f64::NAN, f64::NAN),
            anchor_bounds: anchor_raw,
            anchor_fallback: false,
            coverage,
            draw_count: n,
        });
    }
    let rho_ints: Vec<(f64, f64)> = nonempty
        .iter()
        .map(|b| (b.rho_uzeta_lo, b.rho_uzeta_hi))
        .collect();
    let beta_ints: Vec<(f64, f64)> =
        nonempty.iter().map(|b| (b.beta_lo, b.beta_hi)).collect();
    let (anchor_rho, anchor_beta, anchor_fallback) = if anchor_raw.empty {
        // Anchor fallback: componentwise median of nonempty endpoints.
        let med = |pick: &dyn Fn(&SetBounds) -> f64| {
            let mut v: Vec<f64> = nonempty
                .iter()
                .map(|b| pick(b))
                .filter(|x| x.is_finite())
                .collect();
            if v.is_empty() {
                return f64::NAN;
            }
            v.sort_by(f64::total_cmp);
            median_of(&v)
        };
        (
            (med(&|b| b.rho_uzeta_lo), med(&|b| b.rho_uzeta_hi)),
            (med(&|b| b.beta_lo), med(&|b| b.beta_hi)),
            true,
        )
    } else {
        (
            (anchor_raw.rho_uzeta_lo, anchor_raw.rho_uzeta_hi),
            (anchor_raw.beta_lo, anchor_raw.beta_hi),
            false,
        )
    };
    let target = (coverage * nonempty.len() as f64).ceil() as usize;
    let target = target.clamp(1, nonempty.len());
    let ci_rho_uzeta = expand_interval(anchor_rho, &rho_ints, target);
    let ci_beta = expand_interval(anchor_beta, &beta_ints, target);
    Ok(SetInferenceSummary {
        p_empty,
        p_valid,
        p_valid_nonempty,
        ci_rho_uzeta,
        ci_beta,
        anchor_bounds: anchor_raw,
        anchor_fallback,
        coverage,
        draw_count: n,
    })
}

fn hpd(sorted: &[f64], coverage: f64) -> (f64, f64) {
    let m = sorted.len();
    let w = ((coverage * m as f64).ceil() as usize).clamp(1, m);
    let mut best = (sorted[0], sorted[w - 1]);
    let mut best_len = best.1 - best.0;
    for i in 1..=(m - w) {
        let len = sorted[i + w - 1] - sorted[i];
        if len < best_len {
            best_len = len;
            best = (sorted[i], sorted[i + w - 1]);
        }
    }
    best
}

/// Posterior summaries for the partially identified parameters from the
/// structural draws (nonempty conditional sets only).
pub fn infer_parameter(
    param_draws: &[ParamDraw],
    coverage: f64,
) -> Result<ParamInferenceSummary> {
    check_coverage(coverage)?;
    if param_draws.len() < 100 {
        return Err(Error::InsufficientPosteriorSample {
            got: param_draws.len(),
            need: 100,
        });
    }
    let mut rho: Vec<f64> = param_draws.iter().map(|d| d.rho_uzeta).collect();
    let mut beta: Vec<f64> = param_draws.iter().map(|d| d.beta).collect();
    rho.sort_by(f64::total_cmp);
    beta.sort_by(f64::total_cmp);
    Ok(ParamInferenceSummary {
        median_rho_uzeta: median_of(&rho),
        median_beta: median_of(&beta),
        hpd_rho_uzeta: hpd(&rho, coverage),
        hpd_beta: hpd(&beta, coverage),
        kept_draws: param_draws.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identified_set::Correlations;
    use crate::posterior::CovDraw;

    fn cov_draw(sigma: Matrix3<f64>, index: usize) -> CovDraw {
        let c = Correlations::from_sigma(&sigma);
        CovDraw {
            sigma,
            r12: c.r12,
            r13: c.r13,
            r23: c.r23,
            big_l: crate::identified_set::kappa_lower_bound(&c).unwrap(),
            index,
            p_hat: None,
        }
    }

    fn param_draw(rho_uzeta: f64, beta: f64) -> ParamDraw {
        ParamDraw {
            kappa_tilde: 0.9,
            rho_uxistar: 0.0,
            rho_uzeta,
            rho_uv: 0.0,
            sigma_u: 1.0,
            psi: 0.0,
            beta,
            beta_tilde: beta,
            source_draw: 0,
        }
    }

    #[test]
    fn identical_draws_need_no_expansion() {
        let sigma = Matrix3::new(3.0, 2.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0);
        let draws: Vec<CovDraw> = (0..150).map(|i| cov_draw(sigma, i)).collect();
        let restr = Restrictions::new(0.7, 1.0, -0.5, 0.5).unwrap();
        let s = infer_set(&draws, &sigma, &restr, TreatmentKind::Continuous, 0.9).unwrap();
        assert_eq!(s.p_empty, 0.0);
        let a = s.anchor_bounds;
        assert!((s.ci_rho_uzeta.0 - a.rho_uzeta_lo).abs() < 1e-12);
        assert!((s.ci_rho_uzeta.1 - a.rho_uzeta_hi).abs() < 1e-12);
        assert!((s.ci_beta.0 - a.beta_lo).abs() < 1e-12);
        assert!((s.ci_beta.1 - a.beta_hi).abs() < 1e-12);
    }

    #[test]
    fn ci_contains_anchor_and_widens_with_coverage() {
        let mut draws = Vec::new();
        for i in 0..200 {
            let bump = 0.002 * (i as f64 - 100.0) / 100.0;
            let sigma = Matrix3::new(
                3.0,
                2.0 + bump,
                1.0,
                2.0 + bump,
                2.0,
                1.0 - bump,
                1.0,
                1.0 - bump,
                1.0,
            );
            draws.push(cov_draw(sigma, i));
        }
        let anchor = Matrix3::new(3.0, 2.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0);
        let restr = Restrictions::new(0.7, 1.0, -0.5, 0.5).unwrap();
        let s80 = infer_set(&draws, &anchor, &restr, TreatmentKind::Continuous, 0.8).unwrap();
        let s95 = infer_set(&draws, &anchor, &restr, TreatmentKind::Continuous, 0.95).unwrap();
        let a = s80.anchor_bounds;
        assert!(s80.ci_rho_uzeta.0 <= a.rho_uzeta_lo && s80.ci_rho_uzeta.1 >= a.rho_uzeta_hi);
        assert!(s95.ci_rho_uzeta.0 <= s80.ci_rho_uzeta.0 + 1e-12);
        assert!(s95.ci_rho_uzeta.1 >= s80.ci_rho_uzeta.1 - 1e-12);
        assert!(s95.ci_beta.0 <= s80.ci_beta.0 + 1e-12);
        assert!(s95.ci_beta.1 >= s80.ci_beta.1 - 1e-12);
    }

    #[test]
    fn unrestricted_continuous_always_valid() {
        let sigma = Matrix3::new(3.0, 2.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0);
        let draws: Vec<CovDraw> = (0..120).map(|i| cov_draw(sigma, i)).collect();
        let s = infer_set(
            &draws,
            &sigma,
            &Restrictions::unrestricted(),
            TreatmentKind::Continuous,
            0.9,
        )
        .unwrap();
        assert_eq!(s.p_valid, 1.0);
        assert_eq!(s.p_empty, 0.0);
        // Full rho interval: beta credible set is the whole line.
        assert!(s.ci_beta.0 == f64::NEG_INFINITY && s.ci_beta.1 == f64::INFINITY);
    }

    #[test]
    fn constant_param_draws() {
        let draws: Vec<ParamDraw> = (0..150).map(|_| param_draw(0.1, 2.0)).collect();
        let s = infer_parameter(&draws, 0.9).unwrap();
        assert_eq!(s.median_rho_uzeta, 0.1);
        assert_eq!(s.median_beta, 2.0);
        assert_eq!(s.hpd_beta, (2.0, 2.0));
    }

    #[test]
    fn hpd_no_longer_than_equal_tailed() {
        // Skewed deterministic cloud.
        let draws: Vec<ParamDraw> = (0..500)
            .map(|i| {
                let u = (i as f64 + 0.5) / 500.0;
                param_draw(u * u, u * u * u)
            })
            .collect();
        let coverage = 0.9;
        let s = infer_parameter(&draws, coverage).unwrap();
        let mut beta: Vec<f64> = draws.iter().map(|d| d.beta).collect();
        beta.sort_by(f64::total_cmp);
        let m = beta.len();
        let tail = ((1.0 - coverage) / 2.0 * m as f64).floor() as usize;
        let equal_tailed = beta[m - 1 - tail] - beta[tail];
        assert!(s.hpd_beta.1 - s.hpd_beta.0 <= equal_tailed + 1e-12);
        assert!(s.median_beta >= s.hpd_beta.0 && s.median_beta <= s.hpd_beta.1);
    }

    #[test]
    fn too_few_draws_rejected() {
        let draws: Vec<ParamDraw> = (0..50).map(|_| param_draw(0.0, 0.0)).collect();
        assert!(matches!(
            infer_parameter(&draws, 0.9),
            Err(Error::InsufficientPosteriorSample { got: 50, need: 100 })
        ));
    }
}
