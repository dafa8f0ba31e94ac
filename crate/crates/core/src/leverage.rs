//! Leverage functions `L̄_i(y, t)` bootstrapped time slice by time slice.
//!
//! The first slice follows from the deterministic-rate Dupire formula in the
//! total-implied-variance parametrization. Every later slice advances the
//! Monte Carlo paths with the previous slices and adds the correction `θ`
//! estimated from those paths.

use std::path::Path;

use crate::analytic::{black, black_dw, OptionKind, PriceQuote};
use crate::error::{Error, Result};
use crate::factors::{nu, FactorParams, RateCorrelations};
use crate::g1pp::G1ppModel;
use crate::market_data::io::{read_rows, write_rows};
use crate::market_data::{CpiVolSurface, TivPoint, TotalVarianceSurface};
use crate::mc::{mean_and_stderr, slice_grid, DiffusionCoefficient, McConfig, ModelSpec, Simulation, Underlier};

pub const KBAR_MIN: f64 = -0.02;
pub const KBAR_MAX: f64 = 0.05;
pub const KBAR_STEP: f64 = 0.001;

/// Lower bound on the Dupire bracket.
pub const BRACKET_FLOOR: f64 = 1e-4;

/// Below this the option vega is treated as zero and `θ` dropped.
const MIN_VEGA: f64 = 1e-300;

const TIME_EPS: f64 = 1e-9;

pub const LEVERAGE_HEADER: [&str; 4] = ["tenor", "y", "t", "L"];

/// The annualized strikes `-0.02, -0.019, ..., 0.05`.
pub fn kbar_grid() -> Vec<f64> {
    let n = ((KBAR_MAX - KBAR_MIN) / KBAR_STEP).round() as usize;
    (0..=n).map(|k| KBAR_MIN + k as f64 * KBAR_STEP).collect()
}

/// `1 - (y/w) w_y + ½ w_yy + ¼ w_y² (-¼ - 1/w + y²/w²)`.
pub fn dupire_bracket(p: &TivPoint, y: f64) -> f64 {
    let (w, wy, wyy) = (p.w, p.dw_dy, p.d2w_dy2);
    1.0 - y / w * wy + 0.5 * wyy + 0.25 * wy * wy * (-0.25 - 1.0 / w + y * y / (w * w))
}

/// How values between calibrated slices are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lookup {
    /// Linear in `y` and `t`.
    #[default]
    Bilinear,
    /// Linear in `y`; in `t` the latest slice at or before `t`.
    Stepwise,
}

/// Calibrated slices of one tenor.
#[derive(Debug, Clone, PartialEq)]
pub struct TenorLeverage {
    pub reset: f64,
    pub forward: f64,
    ys: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TenorLeverage {
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    /// Slice `k` on the `y` grid.
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    fn in_y(&self, k: usize, y: f64) -> f64 {
        let (ys, v) = (&self.ys, &self.values[k]);
        if y <= ys[0] {
            return v[0];
        }
        let n = ys.len();
        if y >= ys[n - 1] {
            return v[n - 1];
        }
        let j = ys.partition_point(|&g| g <= y) - 1;
        let u = (y - ys[j]) / (ys[j + 1] - ys[j]);
        v[j] + u * (v[j + 1] - v[j])
    }

    fn value(&self, y: f64, t: f64, lookup: Lookup) -> f64 {
        let ts = &self.ts;
        if ts.is_empty() {
            return f64::NAN;
        }
        let k = ts.partition_point(|&g| g <= t + TIME_EPS);
        if k == 0 {
            return self.in_y(0, y);
        }
        if k == ts.len() || lookup == Lookup::Stepwise {
            return self.in_y(k - 1, y);
        }
        let u = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        let a = self.in_y(k - 1, y);
        let b = self.in_y(k, y);
        a + u * (b - a)
    }
}

/// `L̄_i(y, t)` for every tenor, with `y = ln(F / F_i(0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageSurface {
    tenors: Vec<TenorLeverage>,
    lookup: Lookup,
}

impl LeverageSurface {
    /// Empty slices on the standard strike grid of each tenor.
    pub fn new(surface: &CpiVolSurface) -> Self {
        let kb = kbar_grid();
        let tenors = surface
            .tenors()
            .iter()
            .map(|t| TenorLeverage {
                reset: t.reset,
                forward: t.forward,
                ys: kb.iter().map(|k| t.log_moneyness(*k)).collect(),
                ts: Vec::new(),
                values: Vec::new(),
            })
            .collect();
        LeverageSurface { tenors, lookup: Lookup::default() }
    }

    pub fn with_lookup(mut self, lookup: Lookup) -> Self {
        self.lookup = lookup;
        self
    }

    pub fn set_lookup(&mut self, lookup: Lookup) {
        self.lookup = lookup;
    }

    pub fn lookup(&self) -> Lookup {
        self.lookup
    }

    pub fn tenors(&self) -> &[TenorLeverage] {
        &self.tenors
    }

    pub fn tenor(&self, i: usize) -> Result<&TenorLeverage> {
        self.tenors.get(i).ok_or(Error::UnknownTenor(i))
    }

    /// Appends the slice at `t` for tenor `i`.
    pub fn push_slice(&mut self, i: usize, t: f64, values: Vec<f64>) -> Result<()> {
        let ten = self.tenors.get_mut(i).ok_or(Error::UnknownTenor(i))?;
        if values.len() != ten.ys.len() {
            return Err(Error::Invalid(format!("slice has {} values for {} strikes", values.len(), ten.ys.len())));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Numerical(format!("leverage value {v} at t={t}, tenor {}", ten.reset)));
        }
        if ten.ts.last().is_some_and(|&l| t <= l) || !(t > 0.0) || t > ten.reset + TIME_EPS {
            return Err(Error::Invalid(format!("slice time {t} out of order for tenor {}", ten.reset)));
        }
        ten.ts.push(t);
        ten.values.push(values);
        Ok(())
    }

    /// `L̄_i(y, t)`; flat outside the strike grid and outside the slice times.
    pub fn value(&self, i: usize, y: f64, t: f64) -> f64 {
        self.tenors[i].value(y, t, self.lookup)
    }

    /// Rows `tenor,y,t,L`.
    pub fn to_csv(&self) -> String {
        let mut rows = Vec::new();
        for ten in &self.tenors {
            for (t, v) in ten.ts.iter().zip(&ten.values) {
                for (y, l) in ten.ys.iter().zip(v) {
                    rows.push(vec![ten.reset, *y, *t, *l]);
                }
            }
        }
        write_rows(&LEVERAGE_HEADER, &rows)
    }

    /// Reads a `tenor,y,t,L` file; forwards come from `surface`.
    pub fn read_csv(path: &Path, surface: &CpiVolSurface) -> Result<Self> {
        let rows = read_rows(path, &LEVERAGE_HEADER)?;
        let mut out = LeverageSurface::new(surface);
        for ten in &mut out.tenors {
            ten.ys.clear();
        }
        let mut current: Option<(usize, f64)> = None;
        let mut buf: Vec<(f64, f64)> = Vec::new();
        let flush = |out: &mut LeverageSurface, cur: Option<(usize, f64)>, buf: &mut Vec<(f64, f64)>| -> Result<()> {
            if let Some((i, t)) = cur {
                let ys: Vec<f64> = buf.iter().map(|b| b.0).collect();
                let ten = &mut out.tenors[i];
                if ten.ys.is_empty() {
                    if ys.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::schema(path, 0, format!("y grid of tenor {} not increasing", ten.reset)));
                    }
                    ten.ys = ys;
                } else if ten.ys != ys {
                    return Err(Error::schema(path, 0, format!("y grid of tenor {} changes between slices", ten.reset)));
                }
                let vals = buf.iter().map(|b| b.1).collect();
                out.push_slice(i, t, vals).map_err(|e| Error::schema(path, 0, e.to_string()))?;
            }
            buf.clear();
            Ok(())
        };
        for (line, rec) in &rows.rows {
            let tenor = rows.num(*line, rec, 0, "tenor")?;
            let y = rows.num(*line, rec, 1, "y")?;
            let t = rows.num(*line, rec, 2, "t")?;
            let l = rows.num(*line, rec, 3, "L")?;
            let i = surface.index_of(tenor).map_err(|e| rows.err(*line, e.to_string()))?;
            if current.is_none_or(|(ci, ct)| ci != i || ct != t) {
                flush(&mut out, current, &mut buf)?;
                current = Some((i, t));
            }
            buf.push((y, l));
        }
        flush(&mut out, current, &mut buf)?;
        if let Some(t) = out.tenors.iter().find(|t| t.ts.is_empty()) {
            return Err(Error::schema(path, 0, format!("no leverage rows for tenor {}", t.reset)));
        }
        Ok(out)
    }
}

impl DiffusionCoefficient for LeverageSurface {
    fn coefficient(&self, i: usize, forward: f64, t: f64) -> f64 {
        let ten = &self.tenors[i];
        ten.value((forward / ten.forward).ln(), t, self.lookup)
    }
}

/// Flooring events while solving one slice.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SliceStats {
    pub t: f64,
    /// Dupire brackets raised to [`BRACKET_FLOOR`].
    pub bracket_floors: usize,
    /// Negative `L̄²` replaced by a tenth of the previous slice.
    pub negative_floors: usize,
    /// Strikes without in-the-money paths or with vanishing vega, solved with `θ = 0`.
    pub theta_fallbacks: usize,
}

impl SliceStats {
    pub fn total(&self) -> usize {
        self.bracket_floors + self.negative_floors + self.theta_fallbacks
    }
}

/// What the simulated option payoff is measured against inside `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaReference {
    /// `f(0,T)` times the analytic price from the market variance.
    Market,
    /// `f(0,T)` times the discounted payoff on the same paths.
    #[default]
    Simulated,
}

/// `θ` per strike with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Strikes where no valid path finished in the money.
    pub empty: Vec<bool>,
}

/// Option type used at log-moneyness `y`: caps above the forward, floors at or below.
pub fn otm_kind(y: f64) -> OptionKind {
    if y > 0.0 {
        OptionKind::Cap
    } else {
        OptionKind::Floor
    }
}

/// Everything a slice needs besides `θ`.
#[derive(Debug, Clone, Copy)]
pub struct SliceContext<'a> {
    pub tiv: TotalVarianceSurface<'a>,
    pub factors: &'a FactorParams,
    pub tenor: usize,
    pub t: f64,
    /// `P(0,T)` at the slice time.
    pub discount: f64,
    pub notional: f64,
}

impl SliceContext<'_> {
    /// `∂_w Price = N P(0,T) ½ K φ(d₂) / √w` at `y`.
    pub fn price_dw(&self, y: f64) -> Result<f64> {
        let tp = self.tiv.eval(self.tenor, y, self.t)?;
        let f0 = self.tiv.forward(self.tenor)?;
        Ok(self.notional * self.discount * black_dw(f0, f0 * y.exp(), tp.w))
    }

    /// Analytic cap (`y > 0`) or floor price with the market variance.
    pub fn market_price(&self, y: f64) -> Result<f64> {
        let tp = self.tiv.eval(self.tenor, y, self.t)?;
        let f0 = self.tiv.forward(self.tenor)?;
        Ok(self.notional * self.discount * black(otm_kind(y), f0, f0 * y.exp(), tp.w))
    }
}

/// `L̄²·ζ_ii·bracket = ∂_T w + θ / ∂_w Price` solved on every `y`.
///
/// `prev` is the previous slice, used to floor negative squares.
pub fn slice_calibrate(
    ctx: &SliceContext<'_>,
    ys: &[f64],
    theta: &[f64],
    prev: Option<&[f64]>,
    stats: &mut SliceStats,
) -> Result<Vec<f64>> {
    if theta.len() != ys.len() {
        return Err(Error::Invalid(format!("{} theta values for {} strikes", theta.len(), ys.len())));
    }
    let reset = ctx.tiv.reset(ctx.tenor)?;
    let zeta = ctx.factors.zeta_tau(reset - ctx.t);
    let mut out = Vec::with_capacity(ys.len());
    for (j, (&y, &th)) in ys.iter().zip(theta).enumerate() {
        let tp = ctx.tiv.eval(ctx.tenor, y, ctx.t)?;
        if !(tp.dw_dt > 0.0) {
            return Err(Error::Numerical(format!("non-positive dw/dT at y={y}, t={}", ctx.t)));
        }
        let mut br = dupire_bracket(&tp, y);
        if !(br >= BRACKET_FLOOR) {
            br = BRACKET_FLOOR;
            stats.bracket_floors += 1;
        }
        let mut num = tp.dw_dt;
        if th != 0.0 {
            let vega = ctx.price_dw(y)?;
            if vega > MIN_VEGA {
                num += th / vega;
            } else {
                stats.theta_fallbacks += 1;
            }
        }
        let l2 = num / (br * zeta);
        let l = if l2 > 0.0 && l2.is_finite() {
            l2.sqrt()
        } else {
            stats.negative_floors += 1;
            match prev {
                Some(p) => 0.1 * p[j],
                None => return Err(Error::Numerical(format!("negative leverage square at y={y}, t={}", ctx.t))),
            }
        };
        out.push(l);
    }
    Ok(out)
}

/// First slice: `θ = 0`.
pub fn first_slice(ctx: &SliceContext<'_>, ys: &[f64], stats: &mut SliceStats) -> Result<Vec<f64>> {
    slice_calibrate(ctx, ys, &vec![0.0; ys.len()], None, stats)
}

/// Rate and payoff data the `θ` estimator reads from the paths.
#[derive(Debug, Clone, Copy)]
pub struct ThetaInputs<'a> {
    pub ctx: SliceContext<'a>,
    pub rates: &'a G1ppModel,
    pub rate_corr: &'a RateCorrelations,
    /// Pay date `T̃_i` of the tenor.
    pub pay: f64,
    pub reference: ThetaReference,
}

/// Monte Carlo estimate of `θ^Cap` (`y > 0`) or `θ^Floor` on the strike grid
/// from paths positioned at the slice time.
///
/// `lev` supplies `L_i(F, T)` and is read at the previous slice.
pub fn theta_estimate(
    sim: &Simulation<'_>,
    inp: &ThetaInputs<'_>,
    ys: &[f64],
    lev: &dyn DiffusionCoefficient,
) -> Result<ThetaEstimate> {
    let ctx = &inp.ctx;
    let t = ctx.t;
    if (sim.time() - t).abs() > TIME_EPS {
        return Err(Error::Invalid(format!("paths are at {} but the slice is at {t}", sim.time())));
    }
    let i = ctx.tenor;
    let reset = ctx.tiv.reset(i)?;
    let f0 = ctx.tiv.forward(i)?;
    let fwd = inp.rates.forward_rate(t);
    let v = nu(ctx.factors, inp.rate_corr, &inp.rates.params, inp.pay, reset, t);
    let n = sim.n_paths();
    // per path: D, r, F, ν L F
    let paths: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|p| {
            if !sim.is_valid(p) {
                return (0.0, 0.0, 0.0, 0.0);
            }
            let f = sim.forward(p, i);
            let l = lev.coefficient(i, f, t);
            (sim.discount(p), sim.short_rate(p), f, v * l * f)
        })
        .collect();
    let valid = sim.valid_flags();
    let unit = sim.config().unit_size();
    let mut out = ThetaEstimate { values: Vec::new(), stderr: Vec::new(), empty: Vec::new() };
    let mut samples = vec![0.0; n];
    for &y in ys {
        let k = f0 * y.exp();
        let cap = otm_kind(y) == OptionKind::Cap;
        let mut itm = 0usize;
        for (s, (p, &(d, r, f, vlf))) in samples.iter_mut().zip(paths.iter().enumerate()) {
            *s = 0.0;
            if !valid[p] {
                continue;
            }
            let (inside, payoff, drift) = if cap { (f > k, f - k, -vlf) } else { (f < k, k - f, vlf) };
            if !inside {
                continue;
            }
            itm += 1;
            let rate = match inp.reference {
                ThetaReference::Market => r,
                ThetaReference::Simulated => r - fwd,
            };
            *s = ctx.notional * d * (payoff * rate + drift);
        }
        if itm == 0 {
            out.values.push(0.0);
            out.stderr.push(0.0);
            out.empty.push(true);
            continue;
        }
        let PriceQuote { value, stderr } = mean_and_stderr(&samples, valid, unit);
        let shift = match inp.reference {
            ThetaReference::Market => fwd * ctx.market_price(y)?,
            ThetaReference::Simulated => 0.0,
        };
        out.values.push(value - shift);
        out.stderr.push(stderr);
        out.empty.push(false);
    }
    Ok(out)
}

/// Market and model inputs for the bootstrap.
#[derive(Debug, Clone, Copy)]
pub struct LeverageInputs<'a> {
    pub rates: &'a G1ppModel,
    pub factors: &'a FactorParams,
    pub rate_corr: &'a RateCorrelations,
    pub surface: &'a CpiVolSurface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Spacing of the regular slices; the quoted resets are added.
    pub slice_dt: f64,
    pub substeps: usize,
    pub antithetic: bool,
    pub threads: Option<usize>,
    pub reference: ThetaReference,
    pub notional: f64,
}

impl Default for LeverageConfig {
    fn default() -> Self {
        LeverageConfig {
            n_paths: 2000,
            seed: 42,
            slice_dt: 0.25,
            substeps: 3,
            antithetic: false,
            threads: None,
            reference: ThetaReference::default(),
            notional: 1.0,
        }
    }
}

impl LeverageConfig {
    /// Slice times: multiples of `slice_dt` plus every reset.
    pub fn grid(&self, surface: &CpiVolSurface) -> Vec<f64> {
        let resets: Vec<f64> = surface.tenors().iter().map(|t| t.reset).collect();
        let horizon = resets.iter().copied().fold(0.0, f64::max);
        slice_grid(horizon, self.slice_dt, &resets)
    }

    pub fn mc(&self, surface: &CpiVolSurface) -> Result<McConfig> {
        if !(self.slice_dt > 0.0) {
            return Err(Error::Invalid(format!("slice spacing must be positive, got {}", self.slice_dt)));
        }
        if !(self.notional > 0.0) {
            return Err(Error::Invalid(format!("notional must be positive, got {}", self.notional)));
        }
        let cfg = McConfig {
            n_paths: self.n_paths,
            seed: self.seed,
            grid: self.grid(surface),
            substeps: self.substeps,
            antithetic: self.antithetic,
            threads: self.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of [`calibrate_all`].
#[derive(Debug, Clone)]
pub struct LeverageCalibration {
    /// Bilinear lookup.
    pub surface: LeverageSurface,
    /// Flooring counts per slice time, summed over tenors.
    pub slices: Vec<SliceStats>,
}

impl LeverageCalibration {
    pub fn floor_count(&self) -> usize {
        self.slices.iter().map(SliceStats::total).sum()
    }
}

/// Bootstraps the leverage surface over all slices.
pub fn calibrate_all(inp: &LeverageInputs<'_>, cfg: &LeverageConfig) -> Result<LeverageCalibration> {
    let mc = cfg.mc(inp.surface)?;
    let grid = mc.grid.clone();
    let tiv = inp.surface.total_variance();
    let mut lev = LeverageSurface::new(inp.surface).with_lookup(Lookup::Stepwise);
    let ys: Vec<Vec<f64>> = lev.tenors().iter().map(|t| t.ys.clone()).collect();
    let ctx = |i: usize, t: f64| -> Result<SliceContext<'_>> {
        Ok(SliceContext {
            tiv,
            factors: inp.factors,
            tenor: i,
            t,
            discount: inp.rates.zcb_price(0.0, 0.0, t)?,
            notional: cfg.notional,
        })
    };
    let mut slices = Vec::with_capacity(grid.len());

    let t1 = grid[0];
    let mut stats = SliceStats { t: t1, ..SliceStats::default() };
    for i in 0..inp.surface.len() {
        let v = first_slice(&ctx(i, t1)?, &ys[i], &mut stats)?;
        lev.push_slice(i, t1, v)?;
    }
    log::debug!("leverage slice t={t1}: {stats:?}");
    slices.push(stats);

    let underliers = Underlier::from_surface(inp.surface);
    let spec = ModelSpec { rates: inp.rates, factors: inp.factors, rate_corr: inp.rate_corr, underliers: &underliers };
    let mut sim = Simulation::new(spec, mc, Vec::new())?;
    for &t in &grid[1..] {
        sim.advance(t, &lev)?;
        sim.check_valid()?;
        let mut stats = SliceStats { t, ..SliceStats::default() };
        for (i, ten) in inp.surface.tenors().iter().enumerate() {
            if ten.reset < t - TIME_EPS {
                continue;
            }
            let c = ctx(i, t)?;
            let th = theta_estimate(
                &sim,
                &ThetaInputs { ctx: c, rates: inp.rates, rate_corr: inp.rate_corr, pay: ten.pay, reference: cfg.reference },
                &ys[i],
                &lev,
            )?;
            stats.theta_fallbacks += th.empty.iter().filter(|e| **e).count();
            let prev = lev.tenors[i].values.last().cloned();
            let v = slice_calibrate(&c, &ys[i], &th.values, prev.as_deref(), &mut stats)?;
            lev.push_slice(i, t, v)?;
        }
        log::debug!("leverage slice t={t}: {stats:?}");
        slices.push(stats);
    }
    lev.set_lookup(Lookup::Bilinear);
    let sum = |f: fn(&SliceStats) -> usize| slices.iter().map(f).sum::<usize>();
    let (b, n) = (sum(|s| s.bracket_floors), sum(|s| s.negative_floors));
    if b + n > 0 {
        log::warn!("leverage calibration floored {b} brackets and replaced {n} negative squares");
    }
    log::info!("theta set to zero at {} strikes without in-the-money paths", sum(|s| s.theta_fallbacks));
    Ok(LeverageCalibration { surface: lev, slices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g1pp::G1ppParams;
    use crate::market_data::{CpiTenor, DiscountCurve};
    use approx::assert_relative_eq;

    fn flat(vol: f64) -> CpiVolSurface {
        CpiVolSurface::flat(&[1.0, 2.0], &[124.43, 127.26], vol, &[-0.02, 0.0, 0.05]).unwrap()
    }

    fn market_smiles() -> CpiVolSurface {
        let t = CpiTenor::new(
            5.0,
            5.0,
            136.30,
            vec![-0.02, -0.01, 0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            vec![0.03620, 0.03218, 0.02851, 0.02556, 0.02243, 0.02415, 0.02915, 0.03471],
        )
        .unwrap();
        CpiVolSurface::new(vec![t]).unwrap()
    }

    fn ctx<'a>(s: &'a CpiVolSurface, p: &'a FactorParams, i: usize, t: f64) -> SliceContext<'a> {
        SliceContext { tiv: s.total_variance(), factors: p, tenor: i, t, discount: 0.95, notional: 1.0 }
    }

    #[test]
    fn grid_has_71_strikes() {
        let g = kbar_grid();
        assert_eq!(g.len(), 71);
        assert_eq!(g[0], -0.02);
        assert!((g[70] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn flat_smile_first_slice() {
        let s = flat(0.025);
        let lev = LeverageSurface::new(&s);
        let ys = lev.tenor(1).unwrap().ys().to_vec();
        let mut st = SliceStats::default();
        let one = first_slice(&ctx(&s, &FactorParams::One, 1, 0.25), &ys, &mut st).unwrap();
        assert!(one.iter().all(|v| (v - 0.025).abs() < 1e-15));
        let p3 = FactorParams::usd_three();
        let three = first_slice(&ctx(&s, &p3, 1, 0.25), &ys, &mut st).unwrap();
        let expect = 0.025 / p3.zeta_tau(1.75).sqrt();
        assert!(three.iter().all(|v| (v - expect).abs() < 1e-15));
        assert_eq!(st.total(), 0);
    }

    #[test]
    fn table_smile_atm_matches_formula() {
        let s = market_smiles();
        let p = FactorParams::usd_three();
        let mut st = SliceStats::default();
        let v = first_slice(&ctx(&s, &p, 0, 0.25), &[0.0], &mut st).unwrap()[0];
        // independent re-evaluation from the interpolated vol and its strike derivatives
        let ten = s.tenor(0).unwrap();
        let k = ten.forward;
        let (sg, sk, skk) = ten.vol_derivs(k);
        let t = 0.25;
        let sy = sk * k;
        let syy = skk * k * k + sk * k;
        let w = sg * sg * t;
        let wy = 2.0 * sg * sy * t;
        let wyy = 2.0 * (sy * sy + sg * syy) * t;
        let br = 1.0 + 0.5 * wyy + 0.25 * wy * wy * (-0.25 - 1.0 / w);
        let expect = (sg * sg / (br * p.zeta_tau(4.75))).sqrt();
        assert!(v.is_finite() && v > 0.0);
        assert_relative_eq!(v, expect, max_relative = 1e-12);
    }

    #[test]
    fn zero_theta_is_first_slice() {
        let s = market_smiles();
        let p = FactorParams::usd_two();
        let ys = LeverageSurface::new(&s).tenor(0).unwrap().ys().to_vec();
        let c = ctx(&s, &p, 0, 1.5);
        let mut st = SliceStats::default();
        let a = first_slice(&c, &ys, &mut st).unwrap();
        let b = slice_calibrate(&c, &ys, &vec![0.0; ys.len()], Some(&a), &mut st).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn price_dw_matches_finite_difference() {
        let s = market_smiles();
        let p = FactorParams::One;
        let c = ctx(&s, &p, 0, 5.0);
        let f0 = 136.30;
        let w = 0.02851f64.powi(2) * 5.0;
        let h = 1e-7;
        let fd = 0.95 * (black(OptionKind::Cap, f0, f0, w + h) - black(OptionKind::Cap, f0, f0, w - h)) / (2.0 * h);
        assert_relative_eq!(c.price_dw(0.0).unwrap(), fd, max_relative = 1e-8);
    }

    #[test]
    fn notional_cancels() {
        let s = market_smiles();
        let p = FactorParams::usd_two();
        let ys = LeverageSurface::new(&s).tenor(0).unwrap().ys().to_vec();
        let theta: Vec<f64> = ys.iter().map(|y| 1e-4 * (1.0 + y)).collect();
        let mut st = SliceStats::default();
        let c1 = ctx(&s, &p, 0, 2.0);
        let c2 = SliceContext { notional: 1000.0, ..c1 };
        let a = slice_calibrate(&c1, &ys, &theta, None, &mut st).unwrap();
        let th2: Vec<f64> = theta.iter().map(|t| t * 1000.0).collect();
        let b = slice_calibrate(&c2, &ys, &th2, None, &mut st).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn negative_square_uses_previous_slice() {
        let s = flat(0.02);
        let p = FactorParams::One;
        let c = ctx(&s, &p, 0, 0.5);
        let mut st = SliceStats::default();
        let prev = [0.3, 0.4];
        let v = slice_calibrate(&c, &[0.0, 0.01], &[-1.0, 0.0], Some(&prev), &mut st).unwrap();
        assert_relative_eq!(v[0], 0.03, max_relative = 1e-15);
        assert_relative_eq!(v[1], 0.02, max_relative = 1e-15);
        assert_eq!(st.negative_floors, 1);
    }

    #[test]
    fn lookups() {
        let s = flat(0.02);
        let mut lev = LeverageSurface::new(&s);
        let n = lev.tenor(0).unwrap().ys().len();
        lev.push_slice(0, 0.25, vec![1.0; n]).unwrap();
        let ramp: Vec<f64> = (0..n).map(|j| 2.0 + j as f64).collect();
        lev.push_slice(0, 0.5, ramp.clone()).unwrap();
        assert!(lev.push_slice(0, 0.5, vec![1.0; n]).is_err());
        assert!(lev.push_slice(0, 0.75, vec![-1.0; n]).is_err());
        let ys = lev.tenor(0).unwrap().ys().to_vec();
        assert_eq!(lev.value(0, ys[3], 0.5), 5.0);
        assert_eq!(lev.value(0, ys[3], 0.1), 1.0);
        assert_eq!(lev.value(0, ys[3], 0.9), 5.0);
        assert!((lev.value(0, ys[3], 0.375) - 3.0).abs() < 1e-14);
        let mid = 0.5 * (ys[3] + ys[4]);
        assert!((lev.value(0, mid, 0.5) - 5.5).abs() < 1e-12);
        assert_eq!(lev.value(0, -1.0, 0.5), 2.0);
        assert_eq!(lev.value(0, 1.0, 0.5), ramp[n - 1]);
        let step = lev.clone().with_lookup(Lookup::Stepwise);
        assert_eq!(step.value(0, ys[3], 0.49), 1.0);
    }

    #[test]
    fn bilinear_is_continuous() {
        let s = market_smiles();
        let mut lev = LeverageSurface::new(&s);
        let n = lev.tenor(0).unwrap().ys().len();
        for (k, t) in [0.25, 0.5, 1.0].into_iter().enumerate() {
            lev.push_slice(0, t, (0..n).map(|j| 0.01 + 1e-3 * ((j * (k + 3)) % 7) as f64).collect()).unwrap();
        }
        for a in 0..400 {
            let y = -0.15 + a as f64 * 1e-3;
            for b in 0..40 {
                let t = 0.2 + b as f64 * 0.025;
                let d = (lev.value(0, y, t) - lev.value(0, y + 1e-9, t + 1e-9)).abs();
                assert!(d < 1e-5, "jump {d} at y={y} t={t}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = flat(0.02);
        let mut lev = LeverageSurface::new(&s);
        let n = lev.tenor(0).unwrap().ys().len();
        for i in 0..2 {
            lev.push_slice(i, 0.25, vec![0.021; n]).unwrap();
            lev.push_slice(i, 1.0, (0..n).map(|j| 0.02 + j as f64 * 1e-5).collect()).unwrap();
        }
        let text = lev.to_csv();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("leverage.csv");
        std::fs::write(&path, &text).unwrap();
        let back = LeverageSurface::read_csv(&path, &s).unwrap();
        assert_eq!(back, lev);
        assert_eq!(back.to_csv(), text);
    }

    fn deterministic_inputs(curve: &DiscountCurve) -> G1ppModel {
        G1ppModel::calibrate(G1ppParams::deterministic(), curve).unwrap()
    }

    #[test]
    fn deterministic_rates_give_zero_theta() {
        let curve = DiscountCurve::new(vec![(0.0, 1.0), (1.0, 0.97), (2.0, 0.94)]).unwrap();
        let rates = deterministic_inputs(&curve);
        let s = flat(0.03);
        let p = FactorParams::One;
        let rc = RateCorrelations::uniform(1, -0.5).unwrap();
        let u = Underlier::from_surface(&s);
        let spec = ModelSpec { rates: &rates, factors: &p, rate_corr: &rc, underliers: &u };
        let cfg = McConfig::new(4000, 3, vec![0.5, 1.0]).unwrap();
        let mut sim = Simulation::new(spec, cfg, Vec::new()).unwrap();
        let sig = crate::mc::ConstantSigma(crate::factors::SigmaVector::new(vec![0.03, 0.03]).unwrap());
        sim.advance(0.5, &sig).unwrap();
        let c = SliceContext { discount: rates.zcb_price(0.0, 0.0, 0.5).unwrap(), ..ctx(&s, &p, 1, 0.5) };
        let ys = [-0.05, 0.0, 0.05];
        for reference in [ThetaReference::Market, ThetaReference::Simulated] {
            let inp = ThetaInputs { ctx: c, rates: &rates, rate_corr: &rc, pay: 2.0, reference };
            let th = theta_estimate(&sim, &inp, &ys, &sig).unwrap();
            for (v, e) in th.values.iter().zip(&th.stderr) {
                assert!(v.abs() < 3.0 * e.max(1e-15), "{reference:?}: {v} ± {e}");
            }
        }
    }

    #[test]
    fn flat_smile_deterministic_rates_calibration() {
        let curve = DiscountCurve::new(vec![(0.0, 1.0), (1.0, 0.97), (2.0, 0.94)]).unwrap();
        let rates = deterministic_inputs(&curve);
        let s = flat(0.025);
        let p = FactorParams::usd_two();
        let rc = RateCorrelations::zero(2);
        let inp = LeverageInputs { rates: &rates, factors: &p, rate_corr: &rc, surface: &s };
        let cfg = LeverageConfig { n_paths: 1000, ..LeverageConfig::default() };
        let cal = calibrate_all(&inp, &cfg).unwrap();
        for (i, ten) in cal.surface.tenors().iter().enumerate() {
            for (k, &t) in ten.times().iter().enumerate() {
                let scale = p.zeta_tau(ten.reset - t).sqrt();
                for v in ten.slice(k) {
                    assert!((v * scale / 0.025 - 1.0).abs() < 0.02, "tenor {i} t={t}: {v}");
                }
            }
        }
    }
}
