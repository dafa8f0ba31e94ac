//! Prices 1y to 2y year-on-year caps by simulation with the leveraged and the
//! simplified model and compares them with closed-form prices whose `σ_i` are
//! calibrated at several underlier moneynesses.

use std::path::Path;

use infl_core::cli::{SIGMA_KBARS, YOY_STRIKES};
use infl_core::config::{ModelKind, RunConfig};
use infl_core::workflows::{model_coefficient, pricing_config, yoy_compare, CoefficientSettings, YoyCompareSetup};

fn main() -> infl_core::Result<()> {
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config.toml"))?;
    let inp = cfg.load_inputs()?;
    let resets: Vec<f64> = inp.surface.tenors().iter().map(|t| t.reset).collect();
    let mc = pricing_config(cfg.mc.paths, cfg.mc.seed, cfg.mc.slice_dt, &resets)?;
    let setup = YoyCompareSetup {
        rates: &inp.rates,
        factors: &inp.factors,
        rate_corr: &inp.rate_corr,
        surface: &inp.surface,
        curve: &inp.curve,
        reset_i: 1.0,
        reset_j: 2.0,
        notional: 1000.0,
    };
    for kind in [ModelKind::Leveraged, ModelKind::Simplified] {
        let settings = CoefficientSettings {
            kind,
            sigma_kbar: cfg.model.sigma_kbar,
            eta: cfg.model.eta,
            leverage_file: None,
            leverage: cfg.leverage_config(),
        };
        let (coeff, _) = model_coefficient(&inp, &settings)?;
        let rows = yoy_compare(&setup, &mc, coeff.as_dyn(), &YOY_STRIKES, &SIGMA_KBARS)?;
        println!("\n{kind} model, notional 1000");
        print!("  K_Y      mc  +-2SE  |");
        for kb in SIGMA_KBARS {
            print!(" {:>7}", format!("{kb:+.2}"));
        }
        println!();
        for r in &rows {
            print!("{:5.2} {:7.3} {:6.3}  |", r.strike_kbar, r.mc.value, 2.0 * r.mc.stderr);
            for (_, a) in &r.analytic {
                print!(" {a:7.3}");
            }
            println!("{}", if r.within(0.0, 2.0) { "" } else { "   *" });
        }
        let near = rows.iter().filter(|r| r.within(0.0, 2.0)).count();
        println!("at-the-money sigma within 2 SE for {near} of {} strikes", rows.len());
    }
    Ok(())
}
