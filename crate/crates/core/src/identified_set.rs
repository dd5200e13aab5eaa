//! Closed-form geometry of the identified set.
//!
//! The conditional identified set, given a reduced-form covariance `Σ`, is a
//! two-dimensional manifold in `(κ̃, ρ_uξ*, ρ_uζ)` space: `κ̃` ranges over
//! `(L, 1]`, `ρ_uξ*` over `(-1, 1)`, and `ρ_uζ` is pinned down by the other
//! two. This module implements the manifold function, the `κ̃` lower bound
//! `L`, recovery of `σ_u`, `β̃` and `ρ_uv`, and sharp interval bounds for
//! `ρ_uζ` and `β̃` under rectangle restrictions, using finite candidate sets
//! rather than grid search.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::binary::beta_bounds_binary;
use crate::error::{Error, Result};
use crate::reduced_form::TreatmentKind;

/// Open-interval guard at `κ̃ = L`: the identified set is open at `L`, so all
/// evaluations clamp `κ̃` to at least `L + KAPPA_GUARD`.
pub const KAPPA_GUARD: f64 = 1e-12;

/// Residual correlations `(r12, r13, r23)` of `(ε, ξ, ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlations {
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
}

impl Correlations {
    pub fn from_sigma(sigma: &Matrix3<f64>) -> Self {
        let r = |i: usize, j: usize| sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt();
        Correlations {
            r12: r(0, 1),
            r13: r(0, 2),
            r23: r(1, 2),
        }
    }

    /// Determinant of the 3x3 correlation matrix.
    pub fn det(&self) -> f64 {
        1.0 - self.r12 * self.r12
            - self.r13 * self.r13
            - self.r23 * self.r23
            + 2.0 * self.r12 * self.r13 * self.r23
    }

    pub fn is_pd(&self) -> bool {
        self.r12.abs() < 1.0 && self.r13.abs() < 1.0 && self.r23.abs() < 1.0 && self.det() > 0.0
    }
}

/// Lower bound `L` for `κ̃`: the extent of measurement error the data allow.
///
/// `L = (r12² + r23² - 2 r12 r23 r13) / (1 - r13²)`, with
/// `max{r12², r23²} < L < 1` whenever the correlation matrix is positive
/// definite.
pub fn kappa_lower_bound(c: &Correlations) -> Result<f64> {
    if !c.is_pd() {
        return Err(Error::InvalidCorrelationTriple {
            r12: c.r12,
            r13: c.r13,
            r23: c.r23,
        });
    }
    Ok(big_l_unchecked(c))
}

pub(crate) fn big_l_unchecked(c: &Correlations) -> f64 {
    (c.r12 * c.r12 + c.r23 * c.r23 - 2.0 * c.r12 * c.r23 * c.r13) / (1.0 - c.r13 * c.r13)
}

/// The manifold function `f(κ̃, ρ_uξ*)` giving `ρ_uζ`.
///
/// Callers must ensure `κ̃ > r12²`; `|ρ| = 1` is allowed (the radical term
/// vanishes there).
pub fn f_rho_uzeta(c: &Correlations, kappa_tilde: f64, rho: f64) -> f64 {
    let first = c.r23 * rho / kappa_tilde.sqrt();
    let radical = ((1.0 - rho * rho).max(0.0)
        / (kappa_tilde * (kappa_tilde - c.r12 * c.r12)))
        .sqrt();
    first - (c.r12 * c.r23 - c.r13 * kappa_tilde) * radical
}

/// `ρ_uζ` as an explicit function of `(κ̃, ρ_uξ*)`, with the `κ̃ > L` domain
/// check applied.
pub fn rho_uzeta(c: &Correlations, kappa_tilde: f64, rho: f64) -> Result<f64> {
    let big_l = kappa_lower_bound(c)?;
    if kappa_tilde <= big_l + KAPPA_GUARD {
        return Err(Error::OutsideIdentifiedSet {
            kappa_tilde,
            bound: big_l,
        });
    }
    Ok(f_rho_uzeta(c, kappa_tilde, rho))
}

/// Structural error standard deviation implied by `(κ̃, ρ_uξ*)`:
/// `σ_u = sqrt(s11 (κ̃ - r12²) / (κ̃ (1 - ρ²)))`.
pub fn sigma_u(s11: f64, r12: f64, kappa_tilde: f64, rho: f64) -> Result<f64> {
    if rho.abs() >= 1.0 {
        return Err(Error::EndogeneityAtBoundary);
    }
    if kappa_tilde <= r12 * r12 {
        return Err(Error::OutsideIdentifiedSet {
            kappa_tilde,
            bound: r12 * r12,
        });
    }
    if s11 <= 0.0 {
        return Err(Error::InvalidArgument(format!("s11 = {s11} must be > 0")));
    }
    Ok((s11 * (kappa_tilde - r12 * r12) / (kappa_tilde * (1.0 - rho * rho))).sqrt())
}

/// `β̃ = (s13 - σ_uζ)/s23`.
pub fn beta_tilde(sigma: &Matrix3<f64>, sigma_uzeta: f64) -> f64 {
    (sigma[(0, 2)] - sigma_uzeta) / sigma[(1, 2)]
}

/// Recovers `ρ_uv` from the manifold point:
/// `ρ_uv = (ρ √κ̃ - ρ_uζ r23) / sqrt(κ̃ - r23²)`.
pub fn rho_uv(kappa_tilde: f64, rho: f64, rho_uzeta: f64, r23: f64) -> Result<f64> {
    if kappa_tilde <= r23 * r23 {
        return Err(Error::OutsideIdentifiedSet {
            kappa_tilde,
            bound: r23 * r23,
        });
    }
    Ok((rho * kappa_tilde.sqrt() - rho_uzeta * r23) / (kappa_tilde - r23 * r23).sqrt())
}

/// Elicited rectangle `R = [ã, b̃] x [c*, d*]` over `(κ̃, ρ_uξ*)`, plus the
/// optional binary equality restriction on the mis-classification rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Restrictions {
    pub kappa_tilde_lo: f64,
    pub kappa_tilde_hi: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub binary_equality: BinaryEquality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinaryEquality {
    #[default]
    None,
    Symmetric,
    OneSidedAlpha0Zero,
    OneSidedAlpha1Zero,
    PrevalencePreserving,
}

impl Restrictions {
    pub fn new(
        kappa_tilde_lo: f64,
        kappa_tilde_hi: f64,
        rho_lo: f64,
        rho_hi: f64,
    ) -> Result<Self> {
        if !(kappa_tilde_lo > 0.0 && kappa_tilde_hi <= 1.0 && kappa_tilde_lo <= kappa_tilde_hi) {
            return Err(Error::InvalidRestrictions(format!(
                "kappa_tilde interval [{kappa_tilde_lo}, {kappa_tilde_hi}] must satisfy 0 < lo <= hi <= 1"
            )));
        }
        if !(rho_lo >= -1.0 && rho_hi <= 1.0 && rho_lo <= rho_hi) {
            return Err(Error::InvalidRestrictions(format!(
                "rho_uxistar interval [{rho_lo}, {rho_hi}] must satisfy -1 <= lo <= hi <= 1"
            )));
        }
        Ok(Restrictions {
            kappa_tilde_lo,
            kappa_tilde_hi,
            rho_lo,
            rho_hi,
            binary_equality: BinaryEquality::None,
        })
    }

    /// The vacuous rectangle `(L, 1] x [-1, 1]`.
    pub fn unrestricted() -> Self {
        Restrictions {
            kappa_tilde_lo: KAPPA_GUARD,
            kappa_tilde_hi: 1.0,
            rho_lo: -1.0,
            rho_hi: 1.0,
            binary_equality: BinaryEquality::None,
        }
    }

    pub fn with_binary_equality(mut self, eq: BinaryEquality) -> Self {
        self.binary_equality = eq;
        self
    }

    /// Effective `κ̃` window `[max(ã, L + εκ), b̃]`, or `None` when the
    /// restricted identified set is empty.
    pub fn kappa_window(&self, big_l: f64) -> Option<(f64, f64)> {
        let lo = self.kappa_tilde_lo.max(big_l + KAPPA_GUARD);
        if self.kappa_tilde_hi < lo {
            None
        } else {
            Some((lo, self.kappa_tilde_hi))
        }
    }
}

/// Per-draw interval bounds for `ρ_uζ` and `β`, with emptiness and
/// instrument-validity flags. Interval endpoints are open; `β` endpoints may
/// be infinite.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SetBounds {
    pub rho_uzeta_lo: f64,
    pub rho_uzeta_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub empty: bool,
    pub contains_valid: bool,
}

impl SetBounds {
    pub fn empty_set() -> Self {
        SetBounds {
            rho_uzeta_lo: f64::NAN,
            rho_uzeta_hi: f64::NAN,
            beta_lo: f64::NAN,
            beta_hi: f64::NAN,
            empty: true,
            contains_valid: false,
        }
    }
}

/// Unrestricted one-sided bound for `ρ_uζ`: either `(-|r23|/√L, 1)` or
/// `(-1, |r23|/√L)` depending on the sign of `r12 r23 - L r13`. Ties go to
/// the second branch.
pub fn rho_uzeta_unrestricted_bounds(c: &Correlations) -> Result<(f64, f64)> {
    let big_l = kappa_lower_bound(c)?;
    let edge = c.r23.abs() / big_l.sqrt();
    if c.r12 * c.r23 < big_l * c.r13 {
        Ok((-edge, 1.0))
    } else {
        Ok((-1.0, edge))
    }
}

/// Interior first-order-condition value `h(κ̃)` for `ρ_uξ*` in the `ρ_uζ`
/// extremization.
fn h_interior(c: &Correlations, kappa: f64) -> f64 {
    let num = -c.r23 * (kappa - c.r12 * c.r12).sqrt();
    let a = c.r12 * c.r23 - c.r13 * kappa;
    let den = (a * a + c.r23 * c.r23 * (kappa - c.r12 * c.r12)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Real roots of a polynomial (coefficients low-to-high) via the companion
/// matrix, keeping roots with relative imaginary part below `1e-9`.
pub(crate) fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return vec![];
    }
    while let Some(&last) = c.last() {
        if last.abs() <= 1e-14 * scale && c.len() > 1 {
            c.pop();
        } else {
            break;
        }
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let lead = c[deg];
    let mut comp = DMatrix::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let eig = comp.complex_eigenvalues();
    eig.iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.re.abs().max(1.0))
        .map(|z| z.re)
        .collect()
}

/// Roots in `κ̃` of the interior first-order condition of `f` at fixed
/// `ρ_uξ*`: `(1-ρ²) N(κ)² - ρ² r23² (κ - r12²)³ = 0` with
/// `N(κ) = (2 r12 r23 - r13 r12²) κ - r23 r12³`.
fn s2_roots(c: &Correlations, rho: f64) -> Vec<f64> {
    let r12 = c.r12;
    let r23 = c.r23;
    let a = 2.0 * r12 * r23 - c.r13 * r12 * r12;
    let b = -r23 * r12 * r12 * r12;
    let q = 1.0 - rho * rho;
    let p2 = rho * rho * r23 * r23;
    let r2 = r12 * r12;
    // (1-ρ²)(Aκ + B)² - ρ² r23² (κ³ - 3 r12² κ² + 3 r12⁴ κ - r12⁶)
    let coeffs = [
        q * b * b + p2 * r2 * r2 * r2,
        q * 2.0 * a * b - 3.0 * p2 * r2 * r2,
        q * a * a + 3.0 * p2 * r2,
        -p2,
    ];
    real_roots(&coeffs)
}

/// Sharp bounds for `ρ_uζ` on the rectangle, by evaluating the manifold
/// function on the finite candidate set (corners, interior-`ρ` stationary
/// points at the `κ̃` edges, interior-`κ̃` stationary points at the `ρ`
/// edges). Returns `None` when the restricted set is empty.
pub fn rho_uzeta_bounds(c: &Correlations, restr: &Restrictions) -> Result<Option<(f64, f64)>> {
    let big_l = kappa_lower_bound(c)?;
    let Some((klo, khi)) = restr.kappa_window(big_l) else {
        return Ok(None);
    };
    let (rlo, rhi) = (restr.rho_lo, restr.rho_hi);
    let mut candidates: Vec<(f64, f64)> = vec![(klo, rlo), (klo, rhi), (khi, rlo), (khi, rhi)];
    for kappa in [klo, khi] {
        // The stationary ρ is ±h depending on the sign of r12 r23 - r13 κ̃;
        // adding both is harmless since extra points cannot widen the range.
        let h = h_interior(c, kappa);
        for cand in [h, -h] {
            if cand >= rlo && cand <= rhi {
                candidates.push((kappa, cand));
            }
        }
    }
    for rho in [rlo, rhi] {
        for root in s2_roots(c, rho) {
            if root >= klo && root <= khi {
                candidates.push((root, rho));
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (kappa, rho) in candidates {
        let v = f_rho_uzeta(c, kappa, rho);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(Some((lo, hi)))
}

/// The `β̃` objective `g(κ̃, ρ_uξ*)`; `β̃ = s13/s23 - g`. Unbounded as
/// `ρ -> ±1` (unless `r23 = 0`), which is how the unrestricted-case
/// `(-∞, ∞)` bound arises.
pub fn g_beta(sigma: &Matrix3<f64>, c: &Correlations, kappa: f64, rho: f64) -> f64 {
    let s11 = sigma[(0, 0)];
    let s33 = sigma[(2, 2)];
    let s23 = sigma[(1, 2)];
    let lead = (s11 * s33).sqrt() / (kappa * s23);
    if rho.abs() >= 1.0 {
        if c.r23 == 0.0 {
            return -lead * (c.r12 * c.r23 - kappa * c.r13);
        }
        return f64::INFINITY * rho.signum() * c.r23.signum() * s23.signum();
    }
    let slope = c.r23 * (kappa - c.r12 * c.r12).sqrt() * rho / (1.0 - rho * rho).sqrt();
    lead * (slope - (c.r12 * c.r23 - kappa * c.r13))
}

/// Interior-`κ̃` stationary points of `g` at fixed `ρ`:
/// `Ψ(ρ) = { 2 r12² (1 ∓ sqrt(1-ρ²)) / ρ² }`; empty at `ρ = 0`.
fn psi_candidates(r12: f64, rho: f64) -> Vec<f64> {
    if rho == 0.0 {
        return vec![];
    }
    let root = (1.0 - rho * rho).max(0.0).sqrt();
    let base = 2.0 * r12 * r12 / (rho * rho);
    vec![base * (1.0 - root), base * (1.0 + root)]
}

/// Sharp bounds for `β̃` on the rectangle; `(-∞, ∞)` when
/// `[c*, d*] = [-1, 1]`. Returns `None` when the restricted set is empty.
pub fn beta_tilde_bounds(
    sigma: &Matrix3<f64>,
    restr: &Restrictions,
) -> Result<Option<(f64, f64)>> {
    let c = Correlations::from_sigma(sigma);
    let big_l = kappa_lower_bound(&c)?;
    let Some((klo, khi)) = restr.kappa_window(big_l) else {
        return Ok(None);
    };
    if restr.rho_lo <= -1.0 && restr.rho_hi >= 1.0 {
        return Ok(Some((f64::NEG_INFINITY, f64::INFINITY)));
    }
    let (rlo, rhi) = (restr.rho_lo, restr.rho_hi);
    let mut candidates: Vec<(f64, f64)> = vec![(klo, rlo), (klo, rhi), (khi, rlo), (khi, rhi)];
    for rho in [rlo, rhi] {
        for kappa in psi_candidates(c.r12, rho) {
            if kappa >= klo && kappa <= khi {
                candidates.push((kappa, rho));
            }
        }
    }
    let mut g_min = f64::INFINITY;
    let mut g_max = f64::NEG_INFINITY;
    for (kappa, rho) in candidates {
        let v = g_beta(sigma, &c, kappa, rho);
        g_min = g_min.min(v);
        g_max = g_max.max(v);
    }
    let anchor = sigma[(0, 2)] / sigma[(1, 2)];
    Ok(Some((anchor - g_max, anchor - g_min)))
}

/// Composes the per-draw bound objects for one reduced-form covariance:
/// emptiness, `ρ_uζ` bounds, `β` bounds (`β̃` for continuous treatment,
/// the binary construction otherwise), and the validity flag.
pub fn conditional_set_bounds(
    sigma: &Matrix3<f64>,
    p: Option<f64>,
    restr: &Restrictions,
    kind: TreatmentKind,
) -> Result<SetBounds> {
    let c = Correlations::from_sigma(sigma);
    let Some((rho_lo, rho_hi)) = rho_uzeta_bounds(&c, restr)? else {
        return Ok(SetBounds::empty_set());
    };
    let beta = match kind {
        TreatmentKind::Continuous => beta_tilde_bounds(sigma, restr)?,
        TreatmentKind::Binary => {
            let p = p.ok_or_else(|| {
                Error::InvalidArgument("binary treatment requires a prevalence p".into())
            })?;
            beta_bounds_binary(sigma, restr, p)?
        }
    };
    let (beta_lo, beta_hi) = beta.expect("kappa window nonempty implies beta bounds exist");
    Ok(SetBounds {
        rho_uzeta_lo: rho_lo,
        rho_uzeta_hi: rho_hi,
        beta_lo,
        beta_hi,
        empty: false,
        contains_valid: rho_lo < 0.0 && rho_hi > 0.0,
    })
}
