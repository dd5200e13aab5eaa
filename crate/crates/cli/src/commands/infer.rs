//! `infer`: posterior simulation, set-level and parameter-level summaries,
//! and the raw structural-draw table.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use ivbound_core::inference::{infer_parameter, infer_set};
use ivbound_core::posterior::{draw_sigma, posterior_mean};
use ivbound_core::reduced_form::fit_reduced_form;
use ivbound_core::sampler::{draw_structural, ParamDraw};

use crate::app::{classify, AppResult};
use crate::config::AnalysisConfig;
use crate::data::load_dataset;
use crate::output::{fmt_human, fmt_machine, render_json, render_table, write_file, J};

/// Structural draws use the same seed as the covariance draws but a disjoint
/// set of RNG streams.
const STRUCTURAL_STREAM_BASE: u64 = 1 << 63;

pub fn run(config: &AnalysisConfig) -> AppResult<()> {
    let data = load_dataset(config)?;
    let fit = fit_reduced_form(&data).map_err(classify)?;
    let restr = config.resolve_restrictions(&fit)?;
    let seed = config.seed();
    let coverage = config.inference.coverage;
    let kind = fit.treatment_kind;

    let sigma_draws = draw_sigma(&fit, seed, config.inference.draws).map_err(classify)?;
    let anchor = posterior_mean(&fit);
    let set = infer_set(&sigma_draws.draws, &anchor, &restr, kind, coverage).map_err(classify)?;

    let structural: Vec<Option<ParamDraw>> = sigma_draws
        .draws
        .par_iter()
        .map(|d| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(STRUCTURAL_STREAM_BASE | d.index as u64);
            draw_structural(d, &restr, kind, &mut rng)
        })
        .collect::<ivbound_core::error::Result<_>>()
        .map_err(classify)?;
    let kept: Vec<ParamDraw> = structural.iter().filter_map(|d| *d).collect();
    let empty_draws = structural.len() - kept.len();
    let parameter = infer_parameter(&kept, coverage).map_err(classify)?;

    let mut csv = String::from(
        "source_draw,kappa_tilde,rho_uxistar,rho_uzeta,rho_uv,sigma_u,psi,beta_tilde,beta\n",
    );
    for d in &kept {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            d.source_draw,
            fmt_machine(d.kappa_tilde),
            fmt_machine(d.rho_uxistar),
            fmt_machine(d.rho_uzeta),
            fmt_machine(d.rho_uv),
            fmt_machine(d.sigma_u),
            fmt_machine(d.psi),
            fmt_machine(d.beta_tilde),
            fmt_machine(d.beta),
        ));
    }
    write_file(&config.out, "param_draws.csv", &csv)?;

    let ab = &set.anchor_bounds;
    let json = J::Obj(vec![
        (
            "set",
            J::Obj(vec![
                ("p_empty", J::Num(set.p_empty)),
                ("p_valid", J::Num(set.p_valid)),
                ("p_valid_nonempty", J::Num(set.p_valid_nonempty)),
                ("ci_rho_uzeta", J::num_pair(set.ci_rho_uzeta)),
                ("ci_beta", J::num_pair(set.ci_beta)),
                (
                    "anchor_bounds",
                    J::Obj(vec![
                        ("rho_uzeta", J::num_pair((ab.rho_uzeta_lo, ab.rho_uzeta_hi))),
                        ("beta", J::num_pair((ab.beta_lo, ab.beta_hi))),
                        ("empty", J::Bool(ab.empty)),
                        ("contains_valid", J::Bool(ab.contains_valid)),
                    ]),
                ),
                ("anchor_fallback", J::Bool(set.anchor_fallback)),
                ("coverage", J::Num(set.coverage)),
                ("draw_count", J::Int(set.draw_count as i64)),
            ]),
        ),
        (
            "parameter",
            J::Obj(vec![
                ("median_rho_uzeta", J::Num(parameter.median_rho_uzeta)),
                ("median_beta", J::Num(parameter.median_beta)),
                ("hpd_rho_uzeta", J::num_pair(parameter.hpd_rho_uzeta)),
                ("hpd_beta", J::num_pair(parameter.hpd_beta)),
                ("kept_draws", J::Int(parameter.kept_draws as i64)),
            ]),
        ),
        (
            "diagnostics",
            J::Obj(vec![
                ("seed", J::Int(seed as i64)),
                ("covariance_draws", J::Int(sigma_draws.draws.len() as i64)),
                (
                    "rejected_covariance_candidates",
                    J::Int(sigma_draws.rejected as i64),
                ),
                ("empty_structural_draws", J::Int(empty_draws as i64)),
            ]),
        ),
    ]);
    write_file(&config.out, "infer.json", &render_json(&json))?;

    let pair = |p: (f64, f64)| format!("[{}, {}]", fmt_human(p.0), fmt_human(p.1));
    let mut rows = vec![
        ("P(empty set)".to_string(), fmt_human(set.p_empty)),
        ("P(valid instrument)".to_string(), fmt_human(set.p_valid)),
        (
            "P(valid | nonempty)".to_string(),
            fmt_human(set.p_valid_nonempty),
        ),
        ("rho_uzeta credible set".to_string(), pair(set.ci_rho_uzeta)),
        ("beta credible set".to_string(), pair(set.ci_beta)),
        (
            "rho_uzeta bounds at posterior mean".to_string(),
            pair((ab.rho_uzeta_lo, ab.rho_uzeta_hi)),
        ),
        (
            "beta bounds at posterior mean".to_string(),
            pair((ab.beta_lo, ab.beta_hi)),
        ),
        (
            "anchor fallback used".to_string(),
            set.anchor_fallback.to_string(),
        ),
        (
            "median rho_uzeta".to_string(),
            fmt_human(parameter.median_rho_uzeta),
        ),
        ("median beta".to_string(), fmt_human(parameter.median_beta)),
        (
            "rho_uzeta HPD".to_string(),
            pair(parameter.hpd_rho_uzeta),
        ),
        ("beta HPD".to_string(), pair(parameter.hpd_beta)),
        (
            "structural draws kept".to_string(),
            parameter.kept_draws.to_string(),
        ),
        ("coverage".to_string(), fmt_human(coverage)),
    ];
    if set.anchor_fallback {
        rows.push((
            "warning".to_string(),
            "empty set at posterior mean; expansion anchored at medians".to_string(),
        ));
    }
    write_file(
        &config.out,
        "infer.txt",
        &render_table("Posterior inference", &rows),
    )
}
