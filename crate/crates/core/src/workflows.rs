//! End-to-end runs built from the pricing pieces: implied-vol recovery from
//! simulated cap and floor prices, and the year-on-year cap comparison between
//! simulation and the closed form.

use std::path::Path;

use crate::analytic::{
    black_implied_vol, yoy_cap_floor, OptionKind, PriceQuote, YoyInstrument, YoyModel, ZcInstrument, VOL_BRACKET,
};
use crate::error::Result;
use crate::config::{Inputs, ModelKind};
use crate::factors::{calibrate_sigmas, FactorParams, RateCorrelations};
use crate::g1pp::G1ppModel;
use crate::leverage::{calibrate_all, otm_kind, LeverageCalibration, LeverageConfig, LeverageInputs, LeverageSurface};
use crate::market_data::{CpiVolSurface, DiscountCurve};
use crate::mc::{
    price_yoy_options_mc, price_zc_options_mc, ConstantSigma, DiffusionCoefficient, McConfig, ModelSpec, Underlier,
};
use crate::simplified::{SimplifiedCoefficient, SimplifiedParams};

pub const RECOVERY_HEADER: [&str; 6] = ["tenor", "Kbar", "market_vol", "mc_vol", "mc_vol_lo", "mc_vol_hi"];

/// One point of an implied-vol recovery run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredVol {
    pub tenor: f64,
    pub kbar: f64,
    pub market_vol: f64,
    pub mc_vol: f64,
    /// Vols of the mean price shifted down and up by two standard errors.
    pub mc_vol_lo: f64,
    pub mc_vol_hi: f64,
    pub price: PriceQuote,
}

impl RecoveredVol {
    pub fn within_band(&self) -> bool {
        self.market_vol >= self.mc_vol_lo && self.market_vol <= self.mc_vol_hi
    }
}

/// Fraction of points whose market vol lies in the two-standard-error band.
pub fn hit_rate(rows: &[RecoveredVol]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.within_band()).count() as f64 / rows.len() as f64
}

fn vol_or_edge(kind: OptionKind, f: f64, k: f64, t: f64, target: f64) -> f64 {
    match black_implied_vol(kind, f, k, t, target) {
        Ok(v) => v,
        Err(_) if target <= 0.0 => VOL_BRACKET.0,
        Err(_) => VOL_BRACKET.1,
    }
}

/// The simulation grid for a set of reset dates: multiples of `slice_dt`
/// plus the resets.
pub fn pricing_config(n_paths: usize, seed: u64, slice_dt: f64, resets: &[f64]) -> Result<McConfig> {
    let horizon = resets.iter().copied().fold(0.0, f64::max);
    McConfig::new(n_paths, seed, crate::mc::slice_grid(horizon, slice_dt, resets))
}

/// A diffusion coefficient of any of the three model kinds.
#[derive(Debug, Clone)]
pub enum ModelCoefficient<'a> {
    Constant(ConstantSigma),
    Leveraged(LeverageSurface),
    Simplified(SimplifiedCoefficient<'a>),
}

impl ModelCoefficient<'_> {
    pub fn as_dyn(&self) -> &dyn DiffusionCoefficient {
        match self {
            ModelCoefficient::Constant(c) => c,
            ModelCoefficient::Leveraged(c) => c,
            ModelCoefficient::Simplified(c) => c,
        }
    }
}

/// How to obtain a coefficient for [`model_coefficient`].
#[derive(Debug, Clone)]
pub struct CoefficientSettings<'p> {
    pub kind: ModelKind,
    /// Moneyness for the constant model's `σ_i`.
    pub sigma_kbar: f64,
    pub eta: f64,
    /// Reuse a saved leverage surface instead of calibrating.
    pub leverage_file: Option<&'p Path>,
    pub leverage: LeverageConfig,
}

/// Builds the coefficient, calibrating the leverage surface when needed.
/// The calibration statistics are returned alongside when a calibration ran.
pub fn model_coefficient<'a>(
    inp: &'a Inputs,
    s: &CoefficientSettings<'_>,
) -> Result<(ModelCoefficient<'a>, Option<LeverageCalibration>)> {
    Ok(match s.kind {
        ModelKind::Constant => {
            (ModelCoefficient::Constant(ConstantSigma(calibrate_sigmas(&inp.factors, &inp.surface, s.sigma_kbar)?)), None)
        }
        ModelKind::Simplified => {
            let c = SimplifiedCoefficient::new(&inp.surface, inp.factors, SimplifiedParams::new(s.eta)?);
            (ModelCoefficient::Simplified(c), None)
        }
        ModelKind::Leveraged => match s.leverage_file {
            Some(p) => (ModelCoefficient::Leveraged(LeverageSurface::read_csv(p, &inp.surface)?), None),
            None => {
                let li = LeverageInputs {
                    rates: &inp.rates,
                    factors: &inp.factors,
                    rate_corr: &inp.rate_corr,
                    surface: &inp.surface,
                };
                let cal = calibrate_all(&li, &s.leverage)?;
                (ModelCoefficient::Leveraged(cal.surface.clone()), Some(cal))
            }
        },
    })
}

/// Prices out-of-the-money zero-coupon caps (`K > F_i(0)`) and floors on
/// every tenor and strike `K̄` in `kbars`, then inverts the mean and the
/// mean ± 2 SE to implied vols.
pub fn recover_vols(
    spec: ModelSpec<'_>,
    cfg: &McConfig,
    coeff: &dyn DiffusionCoefficient,
    surface: &CpiVolSurface,
    curve: &DiscountCurve,
    kbars: &[f64],
) -> Result<Vec<RecoveredVol>> {
    let mut insts = Vec::new();
    for ten in surface.tenors() {
        for &kb in kbars {
            let kind = otm_kind(ten.log_moneyness(kb));
            insts.push(ZcInstrument::from_kbar(kind, 1.0, kb, ten.forward, ten.reset, ten.pay)?);
        }
    }
    let quotes = price_zc_options_mc(spec, cfg, coeff, &insts)?;
    let mut out = Vec::with_capacity(insts.len());
    for (n, (inst, q)) in insts.iter().zip(&quotes).enumerate() {
        let ten = &surface.tenors()[n / kbars.len()];
        let kb = kbars[n % kbars.len()];
        let df = curve.discount(inst.pay)?;
        let iv = |v: f64| vol_or_edge(inst.kind, ten.forward, inst.strike, inst.reset, v / df);
        out.push(RecoveredVol {
            tenor: ten.reset,
            kbar: kb,
            market_vol: ten.vol(inst.strike),
            mc_vol: iv(q.value),
            mc_vol_lo: iv(q.value - 2.0 * q.stderr),
            mc_vol_hi: iv(q.value + 2.0 * q.stderr),
            price: *q,
        });
    }
    Ok(out)
}

/// Rows for a recovery CSV.
pub fn recovery_rows(rows: &[RecoveredVol]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| vec![r.tenor, r.kbar, r.market_vol, r.mc_vol, r.mc_vol_lo, r.mc_vol_hi]).collect()
}

/// Simulated and closed-form prices of one year-on-year cap.
#[derive(Debug, Clone, PartialEq)]
pub struct YoyComparison {
    pub strike_kbar: f64,
    pub mc: PriceQuote,
    /// `(K̄ used for σ_i, analytic price)`.
    pub analytic: Vec<(f64, f64)>,
}

impl YoyComparison {
    /// Analytic price for the σ-calibration moneyness closest to `kbar`.
    pub fn analytic_at(&self, kbar: f64) -> Option<f64> {
        self.analytic
            .iter()
            .min_by(|a, b| (a.0 - kbar).abs().total_cmp(&(b.0 - kbar).abs()))
            .map(|a| a.1)
    }

    pub fn within(&self, kbar: f64, n_se: f64) -> bool {
        self.analytic_at(kbar).is_some_and(|a| (a - self.mc.value).abs() <= n_se * self.mc.stderr)
    }
}

/// Inputs of [`yoy_compare`].
#[derive(Debug, Clone, Copy)]
pub struct YoyCompareSetup<'a> {
    pub rates: &'a G1ppModel,
    pub factors: &'a FactorParams,
    pub rate_corr: &'a RateCorrelations,
    pub surface: &'a CpiVolSurface,
    pub curve: &'a DiscountCurve,
    pub reset_i: f64,
    pub reset_j: f64,
    pub notional: f64,
}

/// Prices `reset_i → reset_j` YoY caps at each strike by simulation with
/// `coeff`, and analytically with `σ_i` calibrated at each `sigma_kbars`.
pub fn yoy_compare(
    setup: &YoyCompareSetup<'_>,
    cfg: &McConfig,
    coeff: &dyn DiffusionCoefficient,
    strikes: &[f64],
    sigma_kbars: &[f64],
) -> Result<Vec<YoyComparison>> {
    let s = setup;
    let j = s.surface.index_of(s.reset_j)?;
    let pay = s.surface.tenor(j)?.pay;
    let insts = strikes
        .iter()
        .map(|&k| YoyInstrument::new(OptionKind::Cap, s.notional, k, s.reset_i, s.reset_j, pay))
        .collect::<Result<Vec<_>>>()?;
    let underliers = Underlier::from_surface(s.surface);
    let spec = ModelSpec { rates: s.rates, factors: s.factors, rate_corr: s.rate_corr, underliers: &underliers };
    let mc = price_yoy_options_mc(spec, cfg, coeff, &insts)?;
    let mut analytic = vec![Vec::with_capacity(sigma_kbars.len()); insts.len()];
    for &kb in sigma_kbars {
        let sigmas = calibrate_sigmas(s.factors, s.surface, kb)?;
        let m = YoyModel { factors: s.factors, sigmas: &sigmas, rate_corr: s.rate_corr, rates: &s.rates.params, surface: s.surface };
        for (n, inst) in insts.iter().enumerate() {
            analytic[n].push((kb, yoy_cap_floor(inst, &m, s.curve)?.value));
        }
    }
    Ok(strikes
        .iter()
        .zip(mc)
        .zip(analytic)
        .map(|((&k, q), a)| YoyComparison { strike_kbar: k, mc: q, analytic: a })
        .collect())
}
