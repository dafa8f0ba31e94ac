//! Fits two- and three-factor loadings to the correlations of a synthetic
//! history of forward CPI curves and prints the PCA of the daily changes.
//!
//! ```text
//! cargo run --release --example correlation_fit [-- history.csv]
//! ```
//!
//! With a path argument the generated history is also written as CSV.

use chrono::NaiveDate;
use infl_core::corr_calib::{
    fit_factor_params, market_correlations, objective, pca, synthetic_history, CorrelationMatrix, FitConfig,
    SyntheticHistory,
};
use infl_core::factors::FactorParams;
use infl_core::market_data::io::write_history;

fn main() -> infl_core::Result<()> {
    let truth = FactorParams::usd_three();
    let spec = SyntheticHistory {
        params: truth,
        tenors: vec![1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0],
        start: NaiveDate::from_ymd_opt(2020, 1, 2).unwrap(),
        days: 750,
        daily_vol: 0.002,
        noise: 0.05,
        seed: 11,
    };
    let h = synthetic_history(&spec)?;
    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, write_history(&h)).map_err(|e| infl_core::Error::Invalid(e.to_string()))?;
        println!("wrote {path}");
    }

    let p = pca(&h)?;
    println!("cumulative explained variance:");
    for (k, x) in p.explained.iter().take(4).enumerate() {
        println!("  {} components: {:6.2}%", k + 1, 100.0 * x);
    }

    let target = market_correlations(&h)?;
    println!("\nJ at the generating parameters: {:.3e}", objective(&truth, &target));
    for m in [2, 3] {
        let fit = fit_factor_params(&target, m, &FitConfig::default())?;
        println!(
            "M={m}: J* = {:.3e}, h = {:.3?}, kappa = {:.4?}, {} iterations",
            fit.objective,
            fit.params.h(),
            fit.params.kappa(),
            fit.iterations
        );
        if m == 3 {
            let model = CorrelationMatrix::from_model(&fit.params, target.tenors());
            println!("\n  Tj   Tk   market   model");
            for k in 1..target.len() {
                println!("{:4} {:4}  {:7.4}  {:7.4}", target.tenors()[0], target.tenors()[k], target.get(0, k), model.get(0, k));
            }
        }
    }
    Ok(())
}
