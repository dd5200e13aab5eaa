//! `estimate`: reduced-form point estimates and data-determined bounds.

use ivbound_core::binary::alpha_bounds;
use ivbound_core::identified_set::kappa_lower_bound;
use ivbound_core::reduced_form::{fit_reduced_form, TreatmentKind};

use crate::app::{classify, AppResult};
use crate::config::AnalysisConfig;
use crate::data::load_dataset;
use crate::output::{fmt_human, render_json, render_table, write_file, J};

pub fn run(config: &AnalysisConfig) -> AppResult<()> {
    let data = load_dataset(config)?;
    let fit = fit_reduced_form(&data).map_err(classify)?;
    let l_hat = kappa_lower_bound(&fit.correlations()).map_err(classify)?;
    let ols_slope = fit.s[(0, 1)] / fit.s[(1, 1)];
    let iv_slope = fit.s[(0, 2)] / fit.s[(1, 2)];

    let binary = match fit.treatment_kind {
        TreatmentKind::Continuous => J::Null,
        TreatmentKind::Binary => {
            let p = fit.p_hat.expect("binary fit carries p_hat");
            let (alpha0_max, alpha1_max, psi_min) =
                alpha_bounds(fit.sigma_hat[(1, 1)], l_hat, p).map_err(classify)?;
            J::Obj(vec![
                ("p_hat", J::Num(p)),
                ("alpha0_max", J::Num(alpha0_max)),
                ("alpha1_max", J::Num(alpha1_max)),
                ("psi_min", J::Num(psi_min)),
            ])
        }
    };

    let sigma_rows: Vec<J> = (0..3)
        .map(|i| J::Arr((0..3).map(|j| J::Num(fit.sigma_hat[(i, j)])).collect()))
        .collect();
    let json = J::Obj(vec![
        ("n", J::Int(fit.n as i64)),
        ("k", J::Int(fit.k as i64)),
        ("dropped_rows", J::Int(fit.dropped_rows as i64)),
        (
            "treatment_kind",
            J::Str(
                match fit.treatment_kind {
                    TreatmentKind::Continuous => "continuous",
                    TreatmentKind::Binary => "binary",
                }
                .into(),
            ),
        ),
        ("sigma_hat", J::Arr(sigma_rows)),
        (
            "correlations",
            J::Obj(vec![
                ("r12", J::Num(fit.r12)),
                ("r13", J::Num(fit.r13)),
                ("r23", J::Num(fit.r23)),
            ]),
        ),
        ("ols_slope", J::Num(ols_slope)),
        ("iv_slope", J::Num(iv_slope)),
        ("l_hat", J::Num(l_hat)),
        ("r2_t_on_x", J::Num(fit.r2_t_on_x)),
        ("binary", binary),
    ]);
    write_file(&config.out, "estimate.json", &render_json(&json))?;

    let mut rows = vec![
        ("observations".to_string(), fit.n.to_string()),
        ("dropped rows".to_string(), fit.dropped_rows.to_string()),
        ("controls (incl. intercept)".to_string(), fit.k.to_string()),
        ("OLS slope".to_string(), fmt_human(ols_slope)),
        ("IV slope".to_string(), fmt_human(iv_slope)),
        ("kappa lower bound L".to_string(), fmt_human(l_hat)),
        ("R^2 of T on x".to_string(), fmt_human(fit.r2_t_on_x)),
        ("r12".to_string(), fmt_human(fit.r12)),
        ("r13".to_string(), fmt_human(fit.r13)),
        ("r23".to_string(), fmt_human(fit.r23)),
    ];
    if fit.treatment_kind == TreatmentKind::Binary {
        let p = fit.p_hat.expect("binary fit carries p_hat");
        let (a0, a1, psi_min) = alpha_bounds(fit.sigma_hat[(1, 1)], l_hat, p).map_err(classify)?;
        rows.push(("prevalence p".to_string(), fmt_human(p)));
        rows.push(("max alpha0".to_string(), fmt_human(a0)));
        rows.push(("max alpha1".to_string(), fmt_human(a1)));
        rows.push(("min psi".to_string(), fmt_human(psi_min)));
    }
    write_file(
        &config.out,
        "estimate.txt",
        &render_table("Reduced-form estimates", &rows),
    )
}
