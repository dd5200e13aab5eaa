//! Independent ground-truth generators used to validate the closed-form
//! bounds: the structural forward model `Σ = ΓΩΓ'`, exact four-cell binary
//! enumeration, the sharpness construction by closed-form covariance
//! propagation, and dense-grid extremizers.

use nalgebra::{Matrix2, Matrix3, Matrix3x4, Matrix4, Vector2, Vector4};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::identified_set::{
    f_rho_uzeta, g_beta, kappa_lower_bound, Correlations, Restrictions, KAPPA_GUARD,
};

/// Structural primitives of the linear model with a mis-measured endogenous
/// treatment and a possibly-invalid instrument.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StructuralConfig {
    pub beta: f64,
    /// First-stage slope; must be nonzero for instrument relevance.
    pub pi: f64,
    /// Non-classical measurement-error slope, `> -1`.
    pub psi: f64,
    pub tau: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_zeta: f64,
    pub sigma_w: f64,
    pub sigma_uv: f64,
    pub sigma_uzeta: f64,
}

impl StructuralConfig {
    pub fn new(
        beta: f64,
        pi: f64,
        psi: f64,
        tau: f64,
        sigma_u: f64,
        sigma_v: f64,
        sigma_zeta: f64,
        sigma_w: f64,
        sigma_uv: f64,
        sigma_uzeta: f64,
    ) -> Result<Self> {
        let config = StructuralConfig {
            beta,
            pi,
            psi,
            tau,
            sigma_u,
            sigma_v,
            sigma_zeta,
            sigma_w,
            sigma_uv,
            sigma_uzeta,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.pi == 0.0 {
            return Err(Error::DegenerateStructuralConfiguration(
                "pi must be nonzero".into(),
            ));
        }
        if self.psi <= -1.0 {
            return Err(Error::DegenerateStructuralConfiguration(format!(
                "psi = {} must exceed -1",
                self.psi
            )));
        }
        if !(self.sigma_u > 0.0 && self.sigma_v > 0.0 && self.sigma_zeta > 0.0) {
            return Err(Error::DegenerateStructuralConfiguration(
                "sigma_u, sigma_v, sigma_zeta must be positive".into(),
            ));
        }
        if self.sigma_w < 0.0 {
            return Err(Error::DegenerateStructuralConfiguration(
                "sigma_w must be nonnegative".into(),
            ));
        }
        // Ω₁₁ pd iff ρ_uv² + ρ_uζ² < 1 (v and ζ are uncorrelated).
        let rho_uv = self.sigma_uv / (self.sigma_u * self.sigma_v);
        let rho_uzeta = self.sigma_uzeta / (self.sigma_u * self.sigma_zeta);
        if rho_uv * rho_uv + rho_uzeta * rho_uzeta >= 1.0 {
            return Err(Error::DegenerateStructuralConfiguration(format!(
                "rho_uv^2 + rho_uzeta^2 = {} >= 1",
                rho_uv * rho_uv + rho_uzeta * rho_uzeta
            )));
        }
        Ok(())
    }

    /// Structural covariance matrix of `(u, v, ζ)`.
    pub fn omega11(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.sigma_u * self.sigma_u,
            self.sigma_uv,
            self.sigma_uzeta,
            self.sigma_uv,
            self.sigma_v * self.sigma_v,
            0.0,
            self.sigma_uzeta,
            0.0,
            self.sigma_zeta * self.sigma_zeta,
        )
    }
}

/// Output of the forward model: the population reduced-form covariance plus
/// the structural summaries the identified-set formulas should recover.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForwardModel {
    pub sigma: Matrix3<f64>,
    pub kappa_tilde: f64,
    pub rho_uxistar: f64,
    pub rho_uzeta: f64,
    pub beta_tilde: f64,
}

/// Population `Σ = ΓΩΓ'` and the derived `(κ̃, ρ_uξ*, ρ_uζ, β̃)`.
pub fn forward_sigma(config: &StructuralConfig) -> Result<ForwardModel> {
    config.validate()?;
    let b = config.beta;
    let one_psi = 1.0 + config.psi;
    let pi = config.pi;
    // Rows map (u, v, ζ, w) to the reduced-form errors of (y, T, z).
    let gamma = Matrix3x4::new(
        1.0,
        b,
        b * pi,
        0.0,
        0.0,
        one_psi,
        one_psi * pi,
        1.0,
        0.0,
        0.0,
        1.0,
        0.0,
    );
    let mut omega = Matrix4::zeros();
    omega
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&config.omega11());
    omega[(3, 3)] = config.sigma_w * config.sigma_w;
    let sigma = gamma * omega * gamma.transpose();
    if sigma.cholesky().is_none() {
        return Err(Error::DegenerateStructuralConfiguration(
            "implied reduced-form covariance is not positive definite".into(),
        ));
    }
    let s22 = sigma[(1, 1)];
    let sv2 = config.sigma_v * config.sigma_v;
    let sz2 = config.sigma_zeta * config.sigma_zeta;
    let kappa_tilde = one_psi * one_psi * (pi * pi * sz2 + sv2) / s22;
    let sigma_uxistar = config.sigma_uv + pi * config.sigma_uzeta;
    let rho_uxistar = one_psi * sigma_uxistar / (config.sigma_u * (kappa_tilde * s22).sqrt());
    let rho_uzeta = config.sigma_uzeta / (config.sigma_u * config.sigma_zeta);
    Ok(ForwardModel {
        sigma,
        kappa_tilde,
        rho_uxistar,
        rho_uzeta,
        beta_tilde: b / one_psi,
    })
}

/// Observationally-equivalent rescaling to a different `ψ`. Leaves `Σ`
/// unchanged: the reduced form carries no information about `ψ` alone.
pub fn rescale_psi(config: &StructuralConfig, psi_new: f64) -> Result<StructuralConfig> {
    if psi_new <= -1.0 {
        return Err(Error::DegenerateStructuralConfiguration(format!(
            "psi = {psi_new} must exceed -1"
        )));
    }
    let scale = (1.0 + config.psi) / (1.0 + psi_new);
    StructuralConfig::new(
        config.beta / scale,
        config.pi * scale,
        psi_new,
        config.tau,
        config.sigma_u,
        config.sigma_v * scale,
        config.sigma_zeta,
        config.sigma_w,
        config.sigma_uv * scale,
        config.sigma_uzeta,
    )
}

/// A random admissible structural configuration. `(ρ_uv, ρ_uζ)` is uniform on
/// the unit disk scaled by 0.99 to exercise near-boundary endogeneity.
pub fn random_config(rng: &mut impl Rng) -> StructuralConfig {
    let (rho_uv, rho_uzeta) = loop {
        let a: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let b: f64 = 2.0 * rng.random::<f64>() - 1.0;
        if a * a + b * b < 1.0 {
            break (0.99 * a, 0.99 * b);
        }
    };
    let sigma_u = 0.5 + 1.5 * rng.random::<f64>();
    let sigma_v = 0.5 + 1.5 * rng.random::<f64>();
    let sigma_zeta = 0.5 + 1.5 * rng.random::<f64>();
    let sigma_w = rng.random::<f64>();
    let beta = 4.0 * rng.random::<f64>() - 2.0;
    let pi_mag = 0.3 + 1.7 * rng.random::<f64>();
    let pi = if rng.random::<f64>() < 0.5 {
        pi_mag
    } else {
        -pi_mag
    };
    let psi = -0.5 + 1.5 * rng.random::<f64>();
    StructuralConfig {
        beta,
        pi,
        psi,
        tau: rng.random::<f64>(),
        sigma_u,
        sigma_v,
        sigma_zeta,
        sigma_w,
        sigma_uv: sigma_u * sigma_v * rho_uv,
        sigma_uzeta: sigma_u * sigma_zeta * rho_uzeta,
    }
}

/// Exact binary moments from four-cell enumeration, cross-checked against the
/// closed-form mis-classification identities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BinaryEnumeration {
    pub p: f64,
    pub p_star: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    /// Regression slope of `T - T*` on `T*`.
    pub psi: f64,
    /// Regression intercept of `T - T*` on `T*`.
    pub tau: f64,
    /// Variance of the classicalized error `w = (T - α₀) - (1+ψ)T*`.
    pub sigma_w_sq: f64,
    pub var_t: f64,
    pub var_t_star: f64,
    /// Largest deviation observed across the closed-form identities.
    pub max_identity_error: f64,
}

/// Enumerates the joint distribution of `(T, T*)` exactly and verifies the
/// regression identities `ψ = -(α₀+α₁)`, `τ = α₀`, the `σ_w²` formula,
/// `Cov(w, T*) = 0`, `E[w] = 0`, and `Var(T) = (1+ψ)² Var(T*) + σ_w²`.
pub fn forward_binary(p_star: f64, alpha0: f64, alpha1: f64) -> Result<BinaryEnumeration> {
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::InvalidBinaryConfiguration(format!(
            "p_star = {p_star} outside (0, 1)"
        )));
    }
    if !(0.0..1.0).contains(&alpha0) || !(0.0..1.0).contains(&alpha1) {
        return Err(Error::InvalidBinaryConfiguration(format!(
            "mis-classification rates ({alpha0}, {alpha1}) outside [0, 1)"
        )));
    }
    // Cells indexed (t, t_star) with probability mass from the two
    // conditional Bernoulli laws.
    let cells = [
        (0.0, 0.0, (1.0 - p_star) * (1.0 - alpha0)),
        (1.0, 0.0, (1.0 - p_star) * alpha0),
        (0.0, 1.0, p_star * alpha1),
        (1.0, 1.0, p_star * (1.0 - alpha1)),
    ];
    let mean = |f: &dyn Fn(f64, f64) -> f64| {
        cells
            .iter()
            .map(|&(t, ts, pr)| pr * f(t, ts))
            .sum::<f64>()
    };
    let p = mean(&|t, _| t);
    let e_ts = mean(&|_, ts| ts);
    let var_t = mean(&|t, _| t * t) - p * p;
    let var_ts = mean(&|_, ts| ts * ts) - e_ts * e_ts;
    let e_err = mean(&|t, ts| t - ts);
    let cov_ts_err = mean(&|t, ts| ts * (t - ts)) - e_ts * e_err;
    let psi = cov_ts_err / var_ts;
    let tau = e_err - psi * e_ts;
    let one_psi = 1.0 + psi;
    let sigma_w_sq = mean(&|t, ts| {
        let w = (t - alpha0) - one_psi * ts;
        w * w
    });
    let e_w = mean(&|t, ts| (t - alpha0) - one_psi * ts);
    let cov_w_ts = mean(&|t, ts| ((t - alpha0) - one_psi * ts) * ts) - e_w * e_ts;

    let mut err: f64 = 0.0;
    err = err.max((psi + alpha0 + alpha1).abs());
    err = err.max((tau - alpha0).abs());
    err = err
        .max((sigma_w_sq - (alpha1 * (1.0 - alpha0) + (1.0 - p) * (alpha0 - alpha1))).abs());
    err = err.max(e_w.abs());
    err = err.max(cov_w_ts.abs());
    err = err.max((var_t - (one_psi * one_psi * var_ts + sigma_w_sq)).abs());
    if err > 1e-12 {
        return Err(Error::InvalidBinaryConfiguration(format!(
            "enumeration identities violated by {err:e}"
        )));
    }
    Ok(BinaryEnumeration {
        p,
        p_star,
        alpha0,
        alpha1,
        psi,
        tau,
        sigma_w_sq,
        var_t,
        var_t_star: var_ts,
        max_identity_error: err,
    })
}

/// Closed-form certificate that an interior target point of the identified
/// set is attained by an admissible structural model.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SharpnessCertificate {
    pub config: StructuralConfig,
    pub kappa_tilde: f64,
    pub rho_uxistar: f64,
    pub rho_uzeta: f64,
    /// Largest deviation across the construction identities:
    /// `Cov(w,ε) = Cov(w,ζ) = 0`, `Var(w) = s22(1-κ̃) = Cov(w,ξ)`, and the
    /// three target coordinates.
    pub max_identity_error: f64,
}

/// Builds the structural model attaining `(κ̃, ρ_uξ*)` for a given `Σ` by
/// closed-form covariance propagation in the basis `(ε, ξ, ζ, 𝒲)` with `𝒲`
/// an independent unit-variance auxiliary. No simulation is involved.
pub fn sharpness_construction(
    sigma: &Matrix3<f64>,
    kappa_tilde: f64,
    rho: f64,
    psi_target: f64,
    tau_target: f64,
) -> Result<SharpnessCertificate> {
    let c = Correlations::from_sigma(sigma);
    let big_l = kappa_lower_bound(&c)?;
    if kappa_tilde <= big_l || kappa_tilde > 1.0 || rho.abs() >= 1.0 || psi_target <= -1.0 {
        return Err(Error::TargetNotInIdentifiedSet {
            kappa_tilde,
            rho,
            bound: big_l,
        });
    }
    let (s11, s22, s33) = (sigma[(0, 0)], sigma[(1, 1)], sigma[(2, 2)]);
    let (s13, s23) = (sigma[(0, 2)], sigma[(1, 2)]);
    let gram = {
        let mut g = Matrix4::zeros();
        g.fixed_view_mut::<3, 3>(0, 0).copy_from(sigma);
        g[(3, 3)] = 1.0;
        g
    };
    let cov = |a: &Vector4<f64>, b: &Vector4<f64>| (a.transpose() * gram * b)[(0, 0)];
    let eps = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let xi = Vector4::new(0.0, 1.0, 0.0, 0.0);
    let zeta = Vector4::new(0.0, 0.0, 1.0, 0.0);
    let aux = Vector4::new(0.0, 0.0, 0.0, 1.0);

    // χ: residual of ξ on (ζ, ε); Var(χ) = s22(1 - L).
    let design = Matrix2::new(s33, sigma[(0, 2)], sigma[(0, 2)], s11);
    let rhs = Vector2::new(s23, sigma[(0, 1)]);
    let coef = design
        .try_inverse()
        .ok_or(Error::InvalidCorrelationTriple {
            r12: c.r12,
            r13: c.r13,
            r23: c.r23,
        })?
        * rhs;
    let chi = xi - coef[0] * zeta - coef[1] * eps;

    let w = ((1.0 - kappa_tilde) / (1.0 - big_l)) * chi
        + (s22 * (1.0 - kappa_tilde) * (kappa_tilde - big_l) / (1.0 - big_l))
            .sqrt()
            * aux;
    let one_psi = 1.0 + psi_target;
    let xi_star = (xi - w) / one_psi;
    let pi = s23 / (one_psi * s33);
    let v = xi_star - pi * zeta;
    let rho_uzeta_target = f_rho_uzeta(&c, kappa_tilde, rho);
    let sig_u_target = crate::identified_set::sigma_u(s11, c.r12, kappa_tilde, rho)?;
    let sigma_uzeta = sig_u_target * rho_uzeta_target * s33.sqrt();
    let beta_tilde = (s13 - sigma_uzeta) / s23;
    let beta = one_psi * beta_tilde;
    let u = eps - beta_tilde * (xi - w);

    let sigma_u = cov(&u, &u).sqrt();
    let sigma_v = cov(&v, &v).sqrt();
    let sigma_zeta = s33.sqrt();
    let var_w = cov(&w, &w);
    let config = StructuralConfig::new(
        beta,
        pi,
        psi_target,
        tau_target,
        sigma_u,
        sigma_v,
        sigma_zeta,
        var_w.max(0.0).sqrt(),
        cov(&u, &v),
        cov(&u, &zeta),
    )?;

    // Certification identities of the construction.
    let mut err: f64 = 0.0;
    err = err.max(cov(&w, &eps).abs());
    err = err.max(cov(&w, &zeta).abs());
    err = err.max((var_w - s22 * (1.0 - kappa_tilde)).abs());
    err = err.max((cov(&w, &xi) - var_w).abs());
    let fm = forward_sigma(&config)?;
    err = err.max((fm.kappa_tilde - kappa_tilde).abs());
    err = err.max((fm.rho_uxistar - rho).abs());
    err = err.max((fm.rho_uzeta - rho_uzeta_target).abs());
    Ok(SharpnessCertificate {
        config,
        kappa_tilde,
        rho_uxistar: rho,
        rho_uzeta: rho_uzeta_target,
        max_identity_error: err,
    })
}

/// Which function a brute-force grid scan should extremize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridTarget {
    FRhoUzeta,
    GBeta,
}

/// Brute-force `(min, max)` of the target over a `resolution x resolution`
/// grid on the rectangle intersection. `ρ` endpoints at `±1` are clamped
/// inward by `1e-9` so `g` stays finite. `None` when the intersection is
/// empty.
pub fn grid_extrema(
    sigma: &Matrix3<f64>,
    restr: &Restrictions,
    target: GridTarget,
    resolution: usize,
) -> Result<Option<(f64, f64)>> {
    if resolution < 100 {
        return Err(Error::InvalidArgument(format!(
            "resolution = {resolution} must be >= 100"
        )));
    }
    let c = Correlations::from_sigma(sigma);
    let big_l = kappa_lower_bound(&c)?;
    let Some((klo, khi)) = restr.kappa_window(big_l) else {
        return Ok(None);
    };
    let mut rlo = restr.rho_lo;
    let mut rhi = restr.rho_hi;
    if target == GridTarget::GBeta {
        if rlo <= -1.0 {
            rlo = -1.0 + 1e-9;
        }
        if rhi >= 1.0 {
            rhi = 1.0 - 1e-9;
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let steps = (resolution - 1) as f64;
    for i in 0..resolution {
        let kappa = (klo + (khi - klo) * i as f64 / steps).max(klo + KAPPA_GUARD);
        for j in 0..resolution {
            let rho = rlo + (rhi - rlo) * j as f64 / steps;
            let v = match target {
                GridTarget::FRhoUzeta => f_rho_uzeta(&c, kappa, rho),
                GridTarget::GBeta => g_beta(sigma, &c, kappa, rho),
            };
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok(Some((lo, hi)))
}
