//! Reduced-form projections of `(y, T, z)` on the exogenous controls.
//!
//! Everything downstream consumes only the residual cross-product matrix `S`
//! (equivalently `Σ̂ = S/(n-k)`), the derived residual correlations, and, in
//! the binary-treatment case, the sample prevalence `p̂`. The projection
//! coefficients are reported for completeness but carry no identifying
//! content beyond `Σ`.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identified_set::Correlations;

/// Relative tolerance for the reduced-form instrument-relevance check:
/// `|s23|` must exceed `RELEVANCE_TOL * sqrt(s22 * s33)`.
pub const RELEVANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentKind {
    Continuous,
    Binary,
}

/// Observations for one analysis: outcome, observed treatment, instrument,
/// and controls (with an intercept column always prepended).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub t: DVector<f64>,
    pub z: DVector<f64>,
    /// n x k control matrix; column 0 is the intercept.
    pub x: DMatrix<f64>,
    pub n: usize,
    pub treatment_kind: TreatmentKind,
    /// Rows discarded because some field was missing (NaN).
    pub dropped_rows: usize,
}

impl Dataset {
    /// Builds a dataset from raw columns. `controls` excludes the intercept,
    /// which is prepended here. Rows containing any NaN are dropped and
    /// counted.
    pub fn new(
        y: Vec<f64>,
        t: Vec<f64>,
        z: Vec<f64>,
        controls: Vec<Vec<f64>>,
        treatment_kind: TreatmentKind,
    ) -> Result<Self> {
        let n_raw = y.len();
        if t.len() != n_raw || z.len() != n_raw || controls.iter().any(|c| c.len() != n_raw) {
            return Err(Error::InvalidDataset(
                "columns have unequal lengths".into(),
            ));
        }
        let keep: Vec<usize> = (0..n_raw)
            .filter(|&i| {
                y[i].is_finite()
                    && t[i].is_finite()
                    && z[i].is_finite()
                    && controls.iter().all(|c| c[i].is_finite())
            })
            .collect();
        let dropped = n_raw - keep.len();
        let n = keep.len();
        let k = controls.len() + 1;
        if n < k + 4 {
            return Err(Error::InvalidDataset(format!(
                "need at least k + 4 = {} complete rows, have {n}",
                k + 4
            )));
        }
        for (j, c) in controls.iter().enumerate() {
            let first = c[keep[0]];
            if keep.iter().all(|&i| c[i] == first) {
                return Err(Error::InvalidDataset(format!(
                    "control column {j} is constant and duplicates the intercept"
                )));
            }
        }
        let mut x = DMatrix::zeros(n, k);
        for (row, &i) in keep.iter().enumerate() {
            x[(row, 0)] = 1.0;
            for (j, c) in controls.iter().enumerate() {
                x[(row, j + 1)] = c[i];
            }
        }
        let gather = |v: &[f64]| DVector::from_iterator(n, keep.iter().map(|&i| v[i]));
        let t_col = gather(&t);
        if treatment_kind == TreatmentKind::Binary {
            if t_col.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidDataset(
                    "binary treatment column contains values other than 0 and 1".into(),
                ));
            }
            let ones = t_col.iter().filter(|&&v| v == 1.0).count();
            if ones == 0 || ones == n {
                return Err(Error::InvalidDataset(
                    "binary treatment column must contain both 0 and 1".into(),
                ));
            }
        }
        Ok(Dataset {
            y: gather(&y),
            t: t_col,
            z: gather(&z),
            x,
            n,
            treatment_kind,
            dropped_rows: dropped,
        })
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }
}

/// Point-identified summary of the reduced form.
#[derive(Debug, Clone, Serialize)]
pub struct ReducedFormFit {
    /// `S / (n - k)`, positive definite.
    pub sigma_hat: Matrix3<f64>,
    /// Residual cross-product matrix `S = (Y - X B̂)'(Y - X B̂)`.
    pub s: Matrix3<f64>,
    pub n: usize,
    pub k: usize,
    pub r12: f64,
    pub r13: f64,
    pub r23: f64,
    /// R² of the T-on-x regression.
    pub r2_t_on_x: f64,
    /// Sample prevalence of `T = 1` (binary treatment only).
    pub p_hat: Option<f64>,
    /// Projection coefficients `(φ_y, φ_T, φ_z)`, reported only.
    pub coefficients: [Vec<f64>; 3],
    pub treatment_kind: TreatmentKind,
    pub dropped_rows: usize,
}

impl ReducedFormFit {
    pub fn correlations(&self) -> Correlations {
        Correlations {
            r12: self.r12,
            r13: self.r13,
            r23: self.r23,
        }
    }
}

/// Runs the three reduced-form regressions and assembles the moment summary.
pub fn fit_reduced_form(data: &Dataset) -> Result<ReducedFormFit> {
    let n = data.n;
    let k = data.k();
    let mut ymat = DMatrix::zeros(n, 3);
    ymat.set_column(0, &data.y);
    ymat.set_column(1, &data.t);
    ymat.set_column(2, &data.z);

    let svd = data.x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (n.max(k) as f64) * f64::EPSILON;
    if svd.rank(eps) < k {
        return Err(Error::SingularDesign);
    }
    let b_hat = svd
        .solve(&ymat, eps)
        .map_err(|_| Error::SingularDesign)?;
    let resid = &ymat - &data.x * &b_hat;
    let s_big = resid.transpose() * &resid;
    let s = Matrix3::from_fn(|i, j| s_big[(i, j)]);
    let sigma_hat = s / (n - k) as f64;

    if sigma_hat.cholesky().is_none() {
        return Err(Error::DegenerateResidualCovariance);
    }
    let corr = |i: usize, j: usize| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt();
    let (r12, r13, r23) = (corr(0, 1), corr(0, 2), corr(1, 2));
    if [r12, r13, r23].iter().any(|r| r.abs() >= 1.0) {
        return Err(Error::DegenerateResidualCovariance);
    }
    let tol = RELEVANCE_TOL * (s[(1, 1)] * s[(2, 2)]).sqrt();
    if s[(1, 2)].abs() < tol {
        return Err(Error::IrrelevantInstrument {
            s23_abs: s[(1, 2)].abs(),
            tol,
        });
    }

    let t_mean = data.t.mean();
    let tss: f64 = data.t.iter().map(|v| (v - t_mean).powi(2)).sum();
    let r2_t_on_x = if tss > 0.0 {
        (1.0 - s[(1, 1)] / tss).clamp(0.0, 1.0 - f64::EPSILON)
    } else {
        0.0
    };
    let p_hat = match data.treatment_kind {
        TreatmentKind::Binary => Some(t_mean),
        TreatmentKind::Continuous => None,
    };
    let coef = |j: usize| b_hat.column(j).iter().copied().collect::<Vec<f64>>();

    Ok(ReducedFormFit {
        sigma_hat,
        s,
        n,
        k,
        r12,
        r13,
        r23,
        r2_t_on_x,
        p_hat,
        coefficients: [coef(0), coef(1), coef(2)],
        treatment_kind: data.treatment_kind,
        dropped_rows: data.dropped_rows,
    })
}

/// Converts an elicited variance ratio `λ = Var(T*)/Var(T)` into `κ` using
/// the R² of the T-on-x regression: `κ = (λ - R²)/(1 - R²)`.
pub fn kappa_from_lambda(lambda: f64, r2: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r2) {
        return Err(Error::InvalidArgument(format!("R² = {r2} outside [0, 1)")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} outside (0, 1]"
        )));
    }
    let kappa = (lambda - r2) / (1.0 - r2);
    if kappa <= 0.0 {
        return Err(Error::RestrictionInconsistentWithR2 {
            lambda,
            r2,
            kappa,
        });
    }
    Ok(kappa)
}

/// Recovers `κ` from auxiliary OLS and alternate-measure IV slopes: the
/// ratio of the two estimates identifies the attenuation factor.
pub fn kappa_from_estimates(b_ols: f64, b_iv_alt: f64) -> Result<f64> {
    if b_iv_alt == 0.0 || b_ols * b_iv_alt < 0.0 {
        return Err(Error::InconsistentAuxiliaryEstimates {
            b_ols,
            b_iv: b_iv_alt,
        });
    }
    let kappa = b_ols / b_iv_alt;
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InconsistentAuxiliaryEstimates {
            b_ols,
            b_iv: b_iv_alt,
        });
    }
    Ok(kappa)
}
