//! JSON analysis configuration: data location, column roles, restrictions,
//! and inference settings. Flags override config fields, which override
//! defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ivbound_core::identified_set::{BinaryEquality, Restrictions};
use ivbound_core::reduced_form::{kappa_from_lambda, ReducedFormFit, TreatmentKind};

use crate::app::{classify, AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Input CSV with a header row.
    pub data: PathBuf,
    pub columns: Columns,
    pub treatment_kind: TreatmentKind,
    pub restrictions: RestrictionsConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    /// Output directory; created if absent.
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Columns {
    pub y: String,
    pub t: String,
    pub z: String,
    /// Control columns; an intercept is always added.
    #[serde(default)]
    pub x: Vec<String>,
}

/// Exactly one of `kappa_tilde` and `lambda` must be supplied; a `lambda`
/// interval is converted through the fitted R² of the T-on-x regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_tilde: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<(f64, f64)>,
    #[serde(default = "full_rho")]
    pub rho_uxistar: (f64, f64),
    #[serde(default)]
    pub binary_equality: BinaryEquality,
}

fn full_rho() -> (f64, f64) {
    (-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceConfig {
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Mandatory (via config or `--seed`) so runs are reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    /// Per-axis resolution of the surface export.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_draws() -> usize {
    5000
}
fn default_coverage() -> f64 {
    0.90
}
fn default_grid() -> usize {
    101
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            draws: default_draws(),
            seed: None,
            coverage: default_coverage(),
            grid: default_grid(),
        }
    }
}

/// Command-line overrides; precedence is flags > config > defaults.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub draws: Option<usize>,
    pub seed: Option<u64>,
    pub coverage: Option<f64>,
    pub out: Option<PathBuf>,
}

impl AnalysisConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: AnalysisConfig = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        if let Some(d) = overrides.draws {
            config.inference.draws = d;
        }
        if let Some(s) = overrides.seed {
            config.inference.seed = Some(s);
        }
        if let Some(c) = overrides.coverage {
            config.inference.coverage = c;
        }
        if let Some(o) = &overrides.out {
            config.out = o.clone();
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> AppResult<()> {
        let r = &self.restrictions;
        match (r.kappa_tilde, r.lambda) {
            (Some(_), Some(_)) => {
                return Err(AppError::Config(
                    "supply exactly one of restrictions.kappa_tilde and restrictions.lambda, not both".into(),
                ))
            }
            (None, None) => {
                return Err(AppError::Config(
                    "supply exactly one of restrictions.kappa_tilde and restrictions.lambda".into(),
                ))
            }
            _ => {}
        }
        for (name, iv) in [("kappa_tilde", r.kappa_tilde), ("lambda", r.lambda)] {
            if let Some((lo, hi)) = iv {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(AppError::Config(format!(
                        "restrictions.{name} interval [{lo}, {hi}] is not an ordered finite pair"
                    )));
                }
            }
        }
        let (rlo, rhi) = r.rho_uxistar;
        if !(rlo >= -1.0 && rhi <= 1.0 && rlo <= rhi) {
            return Err(AppError::Config(format!(
                "restrictions.rho_uxistar interval [{rlo}, {rhi}] must satisfy -1 <= lo <= hi <= 1"
            )));
        }
        if r.binary_equality != BinaryEquality::None
            && self.treatment_kind != TreatmentKind::Binary
        {
            return Err(AppError::Config(
                "restrictions.binary_equality requires treatment_kind = \"binary\"".into(),
            ));
        }
        let inf = &self.inference;
        if inf.seed.is_none() {
            return Err(AppError::Config(
                "a seed is required (inference.seed or --seed)".into(),
            ));
        }
        if inf.draws < 100 {
            return Err(AppError::Config(format!(
                "inference.draws = {} must be at least 100",
                inf.draws
            )));
        }
        if !(inf.coverage > 0.5 && inf.coverage < 1.0) {
            return Err(AppError::Config(format!(
                "inference.coverage = {} outside (0.5, 1)",
                inf.coverage
            )));
        }
        if inf.grid < 2 {
            return Err(AppError::Config(format!(
                "inference.grid = {} must be at least 2",
                inf.grid
            )));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.inference.seed.expect("validated")
    }

    /// Resolves the configured intervals into library restrictions, converting
    /// a `lambda` interval through the fitted R².
    pub fn resolve_restrictions(&self, fit: &ReducedFormFit) -> AppResult<Restrictions> {
        let r = &self.restrictions;
        let (klo, khi) = match (r.kappa_tilde, r.lambda) {
            (Some(k), None) => k,
            (None, Some((llo, lhi))) => (
                kappa_from_lambda(llo, fit.r2_t_on_x).map_err(classify)?,
                kappa_from_lambda(lhi, fit.r2_t_on_x).map_err(classify)?,
            ),
            _ => unreachable!("validated"),
        };
        let restr = Restrictions::new(klo, khi, r.rho_uxistar.0, r.rho_uxistar.1)
            .map_err(classify)?
            .with_binary_equality(r.binary_equality);
        Ok(restr)
    }
}
