//! Monte Carlo prices with standard errors.

use super::engine::{DiffusionCoefficient, McConfig, ModelSpec, Observation, Simulation};
use crate::analytic::{PriceQuote, YoyInstrument, ZcInstrument};
use crate::error::{Error, Result};

/// Mean and standard error of per-path `values` over valid paths.
///
/// Paths are grouped in units of `unit` (2 for antithetic pairs); a unit is
/// averaged first and dropped if any of its paths is invalid.
pub fn mean_and_stderr(values: &[f64], valid: &[bool], unit: usize) -> PriceQuote {
    let means: Vec<f64> = values
        .chunks(unit)
        .zip(valid.chunks(unit))
        .filter(|(_, ok)| ok.iter().all(|b| *b))
        .map(|(v, _)| v.iter().sum::<f64>() / unit as f64)
        .collect();
    let n = means.len();
    if n == 0 {
        return PriceQuote { value: f64::NAN, stderr: f64::NAN };
    }
    let mean = means.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    PriceQuote { value: mean, stderr: (var / n as f64).sqrt() }
}

fn require_on_grid(cfg: &McConfig, t: f64) -> Result<()> {
    if cfg.on_grid(t) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("time T={t} is not on the simulation grid")))
    }
}

/// Prices zero-coupon swaps, caps and floors on one shared set of paths.
pub fn price_zc_options_mc(
    spec: ModelSpec<'_>,
    cfg: &McConfig,
    coeff: &dyn DiffusionCoefficient,
    insts: &[ZcInstrument],
) -> Result<Vec<PriceQuote>> {
    let idx = insts
        .iter()
        .map(|inst| {
            require_on_grid(cfg, inst.reset)?;
            spec.underlier_index(inst.reset)
        })
        .collect::<Result<Vec<_>>>()?;
    let obs = insts.iter().map(|i| Observation { time: i.reset, pay: i.pay }).collect();
    let horizon = insts.iter().map(|i| i.reset).fold(0.0, f64::max);
    let mut sim = Simulation::new(spec, cfg.clone(), obs)?;
    sim.run_to(horizon, coeff)?;
    sim.check_valid()?;
    let n = sim.n_paths();
    Ok(insts
        .iter()
        .zip(idx)
        .enumerate()
        .map(|(k, (inst, i))| {
            let vals: Vec<f64> = (0..n)
                .map(|p| {
                    if !sim.is_valid(p) {
                        return 0.0;
                    }
                    inst.notional * sim.recorded(p, k) * inst.kind.payoff(sim.forward(p, i), inst.strike)
                })
                .collect();
            mean_and_stderr(&vals, sim.valid_flags(), cfg.unit_size())
        })
        .collect())
}

/// Prices year-on-year swaplets, caplets and floorlets.
pub fn price_yoy_options_mc(
    spec: ModelSpec<'_>,
    cfg: &McConfig,
    coeff: &dyn DiffusionCoefficient,
    insts: &[YoyInstrument],
) -> Result<Vec<PriceQuote>> {
    let idx = insts
        .iter()
        .map(|inst| {
            require_on_grid(cfg, inst.reset_i)?;
            require_on_grid(cfg, inst.reset_j)?;
            Ok((spec.underlier_index(inst.reset_i)?, spec.underlier_index(inst.reset_j)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let obs = insts.iter().map(|i| Observation { time: i.reset_j, pay: i.pay }).collect();
    let horizon = insts.iter().map(|i| i.reset_j).fold(0.0, f64::max);
    let mut sim = Simulation::new(spec, cfg.clone(), obs)?;
    sim.run_to(horizon, coeff)?;
    sim.check_valid()?;
    let n = sim.n_paths();
    Ok(insts
        .iter()
        .zip(idx)
        .enumerate()
        .map(|(k, (inst, (i, j)))| {
            let vals: Vec<f64> = (0..n)
                .map(|p| {
                    if !sim.is_valid(p) {
                        return 0.0;
                    }
                    let ratio = sim.forward(p, j) / sim.forward(p, i);
                    inst.notional * sim.recorded(p, k) * inst.kind.payoff(ratio, inst.strike)
                })
                .collect();
            mean_and_stderr(&vals, sim.valid_flags(), cfg.unit_size())
        })
        .collect())
}
