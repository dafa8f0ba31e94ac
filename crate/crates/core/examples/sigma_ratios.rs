//! Per-tenor volatility scales for one, two and three factors at the money
//! and the ratios `σ^(M) / σ^(1)`.

use std::path::Path;

use infl_core::factors::{calibrate_sigmas, integrated_zeta, FactorParams};
use infl_core::market_data::io::read_cpi_vols;

fn main() -> infl_core::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let surface = read_cpi_vols(&data.join("cpi_vols.csv"))?;
    let two = FactorParams::usd_two();
    let three = FactorParams::usd_three();
    let s1 = calibrate_sigmas(&FactorParams::One, &surface, 0.0)?;
    let s2 = calibrate_sigmas(&two, &surface, 0.0)?;
    let s3 = calibrate_sigmas(&three, &surface, 0.0)?;

    println!("  T    sigma(1)  sigma(2)  sigma(3)  ratio(2)  ratio(3)");
    for (i, t) in surface.tenors().iter().enumerate() {
        let (a, b, c) = (s1.0[i], s2.0[i], s3.0[i]);
        println!("{:3} {:9.5} {:9.5} {:9.5} {:9.4} {:9.4}", t.reset, a, b, c, b / a, c / a);
    }

    // The ratio only depends on the loadings: sqrt(T / ∫ζ).
    let t = 20.0;
    let r = (t / integrated_zeta(&two, t, t, 0.0, t)).sqrt();
    println!("\nM=2 ratio at T=20 from the loadings alone: {r:.4}");
    Ok(())
}
