//! Closed-form zero-coupon and year-on-year prices on the bundled market,
//! with the cap-floor parity check and an implied-vol round trip.

use std::path::Path;

use infl_core::analytic::{
    implied_vol, yoy_cap_floor, yoy_forward_ratio, yoy_swap, zc_cap_floor, zc_swap, OptionKind, YoyInstrument,
    YoyModel, ZcInstrument,
};
use infl_core::factors::{calibrate_sigmas, FactorParams, RateCorrelations};
use infl_core::g1pp::G1ppParams;
use infl_core::market_data::io::{read_cpi_vols, read_discounts};

fn main() -> infl_core::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let curve = read_discounts(&data.join("discounts.csv"))?;
    let surface = read_cpi_vols(&data.join("cpi_vols.csv"))?;
    let rates = G1ppParams::read_csv(&data.join("g1pp.csv"), 0.02)?;

    println!("zero-coupon options, notional 1:");
    println!("  T     Kbar     cap        floor      swap       cap-floor-swap  implied vol");
    for ten in surface.tenors() {
        for &kb in &[-0.01, 0.0, 0.02] {
            let k = ten.strike(kb);
            let w = ten.vol(k).powi(2) * ten.reset;
            let inst = |kind| ZcInstrument::new(kind, 1.0, k, ten.reset, ten.pay);
            let cap = zc_cap_floor(&inst(OptionKind::Cap)?, &curve, ten.forward, w)?.value;
            let floor = zc_cap_floor(&inst(OptionKind::Floor)?, &curve, ten.forward, w)?.value;
            let swap = zc_swap(&inst(OptionKind::Swap)?, &curve, ten.forward)?.value;
            let iv = implied_vol(cap, &inst(OptionKind::Cap)?, &curve, ten.forward)?;
            println!("{:4} {:7.2} {:10.5} {:10.5} {:10.5} {:14.1e} {:11.5}", ten.reset, kb, cap, floor, swap, cap - floor - swap, iv);
        }
    }

    let factors = FactorParams::usd_three();
    let rc = RateCorrelations::uniform(3, -0.5)?;
    let sigmas = calibrate_sigmas(&factors, &surface, 0.0)?;
    let m = YoyModel { factors: &factors, sigmas: &sigmas, rate_corr: &rc, rates: &rates, surface: &surface };
    println!("\n1y -> 2y year-on-year options, notional 1000, sigma calibrated at the money:");
    let x = yoy_forward_ratio(&YoyInstrument::new(OptionKind::Swap, 1.0, 0.0, 1.0, 2.0, 2.0)?, &m)?;
    println!("  forward ratio X = {x:.6} (F2/F1 = {:.6})", surface.tenors()[1].forward / surface.tenors()[0].forward);
    for kb in [-0.01, 0.0, 0.01, 0.02, 0.03] {
        let inst = |kind| YoyInstrument::new(kind, 1000.0, kb, 1.0, 2.0, 2.0);
        let cap = yoy_cap_floor(&inst(OptionKind::Cap)?, &m, &curve)?.value;
        let floor = yoy_cap_floor(&inst(OptionKind::Floor)?, &m, &curve)?.value;
        let swap = yoy_swap(&inst(OptionKind::Swap)?, &m, &curve)?.value;
        println!("  Kbar {kb:5.2}: cap {cap:9.4}  floor {floor:9.4}  swap {swap:9.4}  parity {:.1e}", cap - floor - swap);
    }
    Ok(())
}
