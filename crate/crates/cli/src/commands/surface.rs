//! `surface`: grid export of the identified-set manifold at the
//! posterior-mean covariance, for 3-D plotting.

use ivbound_core::identified_set::{
    f_rho_uzeta, g_beta, kappa_lower_bound, Correlations, KAPPA_GUARD,
};
use ivbound_core::posterior::posterior_mean;
use ivbound_core::reduced_form::fit_reduced_form;

use crate::app::{classify, AppResult};
use crate::config::AnalysisConfig;
use crate::data::load_dataset;
use crate::output::{fmt_machine, write_file};

const HEADER: &str = "kappa_tilde,rho_uxistar,rho_uzeta,beta\n";

pub fn run(config: &AnalysisConfig) -> AppResult<()> {
    let data = load_dataset(config)?;
    let fit = fit_reduced_form(&data).map_err(classify)?;
    let restr = config.resolve_restrictions(&fit)?;
    let sigma = posterior_mean(&fit);
    let c = Correlations::from_sigma(&sigma);
    let big_l = kappa_lower_bound(&c).map_err(classify)?;

    let Some((klo, khi)) = restr.kappa_window(big_l) else {
        eprintln!(
            "warning: restricted identified set is empty at the posterior mean \
             (kappa window [{}, {}] lies below L = {big_l:.4})",
            restr.kappa_tilde_lo, restr.kappa_tilde_hi
        );
        return write_file(&config.out, "surface.csv", HEADER);
    };
    let anchor = sigma[(0, 2)] / sigma[(1, 2)];
    let grid = config.inference.grid;
    let steps = (grid - 1) as f64;
    let mut out = String::from(HEADER);
    for i in 0..grid {
        let kappa = if grid == 1 {
            khi
        } else {
            (klo + (khi - klo) * i as f64 / steps).max(klo + KAPPA_GUARD)
        };
        for j in 0..grid {
            let rho = restr.rho_lo + (restr.rho_hi - restr.rho_lo) * j as f64 / steps;
            // The set is open in rho; grid rows at |rho| = 1 fall outside it.
            if rho.abs() >= 1.0 {
                continue;
            }
            let rho_uzeta = f_rho_uzeta(&c, kappa, rho);
            let beta = anchor - g_beta(&sigma, &c, kappa, rho);
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_machine(kappa),
                fmt_machine(rho),
                fmt_machine(rho_uzeta),
                fmt_machine(beta),
            ));
        }
    }
    write_file(&config.out, "surface.csv", &out)
}
