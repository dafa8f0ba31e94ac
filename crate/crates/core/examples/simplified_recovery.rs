//! Reprices out-of-the-money zero-coupon caps and floors with the simplified
//! model, which needs no calibration beyond the smile itself.
//!
//! ```text
//! cargo run --release --example simplified_recovery
//! ```

use std::path::Path;

use infl_core::config::{ModelKind, RunConfig};
use infl_core::mc::{ModelSpec, Underlier};
use infl_core::workflows::{hit_rate, model_coefficient, pricing_config, recover_vols, CoefficientSettings};

fn main() -> infl_core::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cfg = RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config.toml"))?;
    let inp = cfg.load_inputs()?;
    let settings = CoefficientSettings {
        kind: ModelKind::Simplified,
        sigma_kbar: cfg.model.sigma_kbar,
        eta: cfg.model.eta,
        leverage_file: None,
        leverage: cfg.leverage_config(),
    };
    let (coeff, _) = model_coefficient(&inp, &settings)?;

    let resets: Vec<f64> = inp.surface.tenors().iter().map(|t| t.reset).collect();
    let mc = pricing_config(cfg.mc.paths, cfg.mc.seed, cfg.mc.slice_dt, &resets)?;
    let u = Underlier::from_surface(&inp.surface);
    let spec = ModelSpec { rates: &inp.rates, factors: &inp.factors, rate_corr: &inp.rate_corr, underliers: &u };
    let kbars = inp.surface.tenors()[0].kbars.clone();
    let rows = recover_vols(spec, &mc, coeff.as_dyn(), &inp.surface, &inp.curve, &kbars)?;

    println!("   T    Kbar   market      mc   [   lo,     hi]");
    for r in &rows {
        let mark = if r.within_band() { ' ' } else { '*' };
        println!(
            "{:4} {:7.3} {:8.5} {:8.5} [{:7.5}, {:7.5}] {mark}",
            r.tenor, r.kbar, r.market_vol, r.mc_vol, r.mc_vol_lo, r.mc_vol_hi
        );
    }
    println!("{:.1}% of market vols inside two standard errors", 100.0 * hit_rate(&rows));
    Ok(())
}
