//! Calibrates the G1++ shift to the bundled discount curve and reprices every
//! pillar bond from the model.

use std::path::Path;

use infl_core::g1pp::{G1ppModel, G1ppParams};
use infl_core::market_data::io::read_discounts;

fn main() -> infl_core::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let curve = read_discounts(&data.join("discounts.csv"))?;
    let params = G1ppParams::read_csv(&data.join("g1pp.csv"), 0.02)?;
    let model = G1ppModel::calibrate(params, &curve)?;

    println!("   T   market P(0,T)   model P(0,T)    rel. error   f(0,T)");
    for (t, df) in curve.pillars() {
        let p = model.zcb_price(0.0, 0.0, t)?;
        let f = if t < curve.last_time() { format!("{:.6}", model.forward_rate(t)) } else { "-".into() };
        println!("{t:4} {df:15.6} {p:15.12} {:12.2e}   {f}", (p - df).abs() / df);
    }
    println!("\nbond prices at t=5 for x = -0.01, 0, 0.01 (T = 10):");
    for x in [-0.01, 0.0, 0.01] {
        println!("  x={x:+.2}: P(5,10) = {:.6}", model.zcb_price(5.0, x, 10.0)?);
    }
    Ok(())
}
