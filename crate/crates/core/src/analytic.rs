//! Closed-form zero-coupon and year-on-year swap, cap and floor prices, and
//! Black implied-volatility inversion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{integrated_zeta, nu_bar, FactorParams, RateCorrelations, SigmaVector};
use crate::g1pp::G1ppParams;
use crate::market_data::{CpiVolSurface, DiscountCurve};
use crate::normal;
use crate::quad::factor_rule;

/// Lower and upper bounds of the implied-volatility search.
pub const VOL_BRACKET: (f64, f64) = (1e-6, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Swap,
    Cap,
    Floor,
}

impl OptionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptionKind::Swap => "swap",
            OptionKind::Cap => "cap",
            OptionKind::Floor => "floor",
        }
    }

    /// Undiscounted payoff on an underlying value `s` against strike `k`.
    #[inline]
    pub fn payoff(&self, s: f64, k: f64) -> f64 {
        match self {
            OptionKind::Swap => s - k,
            OptionKind::Cap => (s - k).max(0.0),
            OptionKind::Floor => (k - s).max(0.0),
        }
    }
}

impl std::str::FromStr for OptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" => Ok(OptionKind::Swap),
            "cap" => Ok(OptionKind::Cap),
            "floor" => Ok(OptionKind::Floor),
            other => Err(Error::Invalid(format!("unknown instrument kind '{other}'"))),
        }
    }
}

/// A price with its Monte Carlo standard error (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub value: f64,
    pub stderr: f64,
}

impl PriceQuote {
    pub fn exact(value: f64) -> Self {
        PriceQuote { value, stderr: 0.0 }
    }
}

/// Single-payment zero-coupon swap, cap or floor on `I(T_i)` paid at `T̃_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZcInstrument {
    pub kind: OptionKind,
    pub notional: f64,
    pub strike: f64,
    pub reset: f64,
    pub pay: f64,
}

impl ZcInstrument {
    pub fn new(kind: OptionKind, notional: f64, strike: f64, reset: f64, pay: f64) -> Result<Self> {
        if !(notional > 0.0) {
            return Err(Error::Invalid(format!("notional must be positive, got {notional}")));
        }
        if !(strike > 0.0) {
            return Err(Error::Invalid(format!("strike must be positive, got {strike}")));
        }
        if !(reset > 0.0 && reset <= pay) {
            return Err(Error::Invalid(format!("need 0 < reset <= pay, got {reset} and {pay}")));
        }
        Ok(ZcInstrument { kind, notional, strike, reset, pay })
    }

    /// Strike from a compounded rate: `K = Ī (1 + K̄)^{T_i}`.
    pub fn from_kbar(kind: OptionKind, notional: f64, kbar: f64, reference: f64, reset: f64, pay: f64) -> Result<Self> {
        if !(kbar > -1.0) {
            return Err(Error::Invalid(format!("contract rate must exceed -1, got {kbar}")));
        }
        Self::new(kind, notional, reference * (1.0 + kbar).powf(reset), reset, pay)
    }
}

/// Year-on-year swaplet, caplet or floorlet on `I(T_j)/I(T_i)` paid at `T_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoyInstrument {
    pub kind: OptionKind,
    pub notional: f64,
    /// `K_Y = 1 + K̄_Y`.
    pub strike: f64,
    pub reset_i: f64,
    pub reset_j: f64,
    pub pay: f64,
}

impl YoyInstrument {
    pub fn new(kind: OptionKind, notional: f64, kbar: f64, reset_i: f64, reset_j: f64, pay: f64) -> Result<Self> {
        if !(notional > 0.0) {
            return Err(Error::Invalid(format!("notional must be positive, got {notional}")));
        }
        if !(1.0 + kbar > 0.0) {
            return Err(Error::Invalid(format!("year-on-year strike 1+K must be positive, got {}", 1.0 + kbar)));
        }
        if !(reset_i > 0.0 && reset_i < reset_j && reset_j <= pay) {
            return Err(Error::Invalid(format!(
                "need 0 < T_i < T_j <= T_p, got {reset_i}, {reset_j}, {pay}"
            )));
        }
        Ok(YoyInstrument { kind, notional, strike: 1.0 + kbar, reset_i, reset_j, pay })
    }
}

/// Undiscounted Black price of a call (`Cap`) or put (`Floor`) with total
/// variance `w`; `Swap` returns the forward minus strike.
pub fn black(kind: OptionKind, forward: f64, strike: f64, w: f64) -> f64 {
    if kind == OptionKind::Swap {
        return forward - strike;
    }
    if !(w > 0.0) {
        return kind.payoff(forward, strike);
    }
    let sw = w.sqrt();
    let d1 = (forward / strike).ln() / sw + 0.5 * sw;
    let d2 = d1 - sw;
    match kind {
        OptionKind::Cap => forward * normal::cdf(d1) - strike * normal::cdf(d2),
        _ => strike * normal::cdf(-d2) - forward * normal::cdf(-d1),
    }
}

/// `∂ Black / ∂w = ½ K φ(d₂) / √w`, the same for calls and puts.
pub fn black_dw(forward: f64, strike: f64, w: f64) -> f64 {
    let sw = w.sqrt();
    let d2 = (forward / strike).ln() / sw - 0.5 * sw;
    0.5 * strike * normal::pdf(d2) / sw
}

/// `N P(0,T̃_i) (F_i(0) - K)`.
pub fn zc_swap(inst: &ZcInstrument, curve: &DiscountCurve, forward: f64) -> Result<PriceQuote> {
    let p = curve.discount(inst.pay)?;
    Ok(PriceQuote::exact(inst.notional * p * (forward - inst.strike)))
}

/// Black price with total variance `w` to the reset; `w ≤ 0` gives the
/// discounted intrinsic value.
pub fn zc_cap_floor(inst: &ZcInstrument, curve: &DiscountCurve, forward: f64, w: f64) -> Result<PriceQuote> {
    let p = curve.discount(inst.pay)?;
    Ok(PriceQuote::exact(inst.notional * p * black(inst.kind, forward, inst.strike, w)))
}

/// Quoted implied volatility `Σ` with `w = Σ² T_i` reproducing `price`.
pub fn implied_vol(price: f64, inst: &ZcInstrument, curve: &DiscountCurve, forward: f64) -> Result<f64> {
    let scale = inst.notional * curve.discount(inst.pay)?;
    let undiscounted = price / scale;
    let (lo_band, hi_band) = match inst.kind {
        OptionKind::Cap => ((forward - inst.strike).max(0.0), forward),
        OptionKind::Floor => ((inst.strike - forward).max(0.0), inst.strike),
        OptionKind::Swap => return Err(Error::Invalid("swaps carry no implied volatility".into())),
    };
    if !(undiscounted >= lo_band * (1.0 - 1e-14) && undiscounted < hi_band) {
        return Err(Error::PriceOutOfBand { price, lo: lo_band * scale, hi: hi_band * scale });
    }
    black_implied_vol(inst.kind, forward, inst.strike, inst.reset, undiscounted)
}

/// Inverts the undiscounted Black price for `Σ`, bracketed in [`VOL_BRACKET`].
pub fn black_implied_vol(kind: OptionKind, forward: f64, strike: f64, t: f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = VOL_BRACKET;
    let f = |s: f64| black(kind, forward, strike, s * s * t) - target;
    let flo = f(lo);
    if flo >= 0.0 {
        return Ok(lo);
    }
    if f(hi) < 0.0 {
        return Err(Error::PriceOutOfBand { price: target, lo: target - flo, hi: target - f(hi) });
    }
    let mut s = {
        // Brenner–Subrahmanyam start, clipped into the bracket.
        let guess = target / (0.4 * forward.max(strike) * t.sqrt());
        guess.clamp(lo, hi)
    };
    for _ in 0..200 {
        let v = f(s);
        if v.abs() <= 1e-14 * target.max(1e-300) {
            return Ok(s);
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = black_dw(forward, strike, s * s * t) * 2.0 * s * t;
        let newton = s - v / vega;
        s = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (hi - lo) <= 1e-15 * hi {
            return Ok(s);
        }
    }
    Ok(s)
}

/// Model parameters needed for year-on-year closed forms.
#[derive(Debug, Clone, Copy)]
pub struct YoyModel<'a> {
    pub factors: &'a FactorParams,
    pub sigmas: &'a SigmaVector,
    pub rate_corr: &'a RateCorrelations,
    pub rates: &'a G1ppParams,
    pub surface: &'a CpiVolSurface,
}

/// Forward ratio `X_ij` and total variance `η_ij` of a year-on-year ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoyMoments {
    pub forward_ratio: f64,
    pub variance: f64,
}

/// `∫_{t0}^{t1} σ ν̄ ds` for the tenor resetting at `reset` and paying at `pay`.
pub fn drift_integral(
    p: &FactorParams,
    rc: &RateCorrelations,
    g: &G1ppParams,
    sigma: f64,
    reset: f64,
    pay: f64,
    t_p: f64,
    t0: f64,
    t1: f64,
) -> f64 {
    if g.is_deterministic() {
        return 0.0;
    }
    let mut breaks = g.breaks();
    breaks.extend([reset, pay, t_p]);
    breaks.sort_by(f64::total_cmp);
    sigma * factor_rule().integrate_pieces(t0, t1, &breaks, |s| nu_bar(p, rc, g, pay, reset, t_p, s))
}

pub fn yoy_moments(inst: &YoyInstrument, m: &YoyModel<'_>) -> Result<YoyMoments> {
    let i = m.surface.index_of(inst.reset_i)?;
    let j = m.surface.index_of(inst.reset_j)?;
    let (ti, tj) = (m.surface.tenor(i)?, m.surface.tenor(j)?);
    let (si, sj) = (m.sigmas.get(i)?, m.sigmas.get(j)?);
    let (p, rc, g) = (m.factors, m.rate_corr, m.rates);
    let drift_j = drift_integral(p, rc, g, sj, tj.reset, tj.pay, inst.pay, 0.0, tj.reset);
    let drift_i = drift_integral(p, rc, g, si, ti.reset, ti.pay, inst.pay, 0.0, ti.reset);
    let zii = integrated_zeta(p, ti.reset, ti.reset, 0.0, ti.reset);
    let zjj = integrated_zeta(p, tj.reset, tj.reset, 0.0, tj.reset);
    let zij = integrated_zeta(p, ti.reset, tj.reset, 0.0, ti.reset);
    let convexity = si * si * zii - si * sj * zij;
    let forward_ratio = tj.forward / ti.forward * (drift_j - drift_i + convexity).exp();
    let variance = sj * sj * zjj + si * si * zii - 2.0 * si * sj * zij;
    Ok(YoyMoments { forward_ratio, variance })
}

/// `X_ij = E^{T_p}[F_j(T_j) / F_i(T_i)]`.
pub fn yoy_forward_ratio(inst: &YoyInstrument, m: &YoyModel<'_>) -> Result<f64> {
    Ok(yoy_moments(inst, m)?.forward_ratio)
}

/// `N P(0,T_p) (X_ij - K_Y)`.
pub fn yoy_swap(inst: &YoyInstrument, m: &YoyModel<'_>, curve: &DiscountCurve) -> Result<PriceQuote> {
    let x = yoy_forward_ratio(inst, m)?;
    Ok(PriceQuote::exact(inst.notional * curve.discount(inst.pay)? * (x - inst.strike)))
}

/// Black price on `X_ij` with variance `η_ij`; `inst.kind == Swap` gives the swap.
pub fn yoy_cap_floor(inst: &YoyInstrument, m: &YoyModel<'_>, curve: &DiscountCurve) -> Result<PriceQuote> {
    let mo = yoy_moments(inst, m)?;
    if !(mo.variance > 0.0) && inst.kind != OptionKind::Swap {
        log::warn!("non-positive year-on-year variance {}; using intrinsic value", mo.variance);
    }
    let p = curve.discount(inst.pay)?;
    Ok(PriceQuote::exact(
        inst.notional * p * black(inst.kind, mo.forward_ratio, inst.strike, mo.variance),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve() -> DiscountCurve {
        DiscountCurve::new(vec![(0.0, 1.0), (1.0, 0.9656), (2.0, 0.9318), (10.0, 0.7596)]).unwrap()
    }

    #[test]
    fn zc_swap_examples() {
        let c = curve();
        let atm = ZcInstrument::new(OptionKind::Swap, 1.0, 153.93, 10.0, 10.0).unwrap();
        assert_eq!(zc_swap(&atm, &c, 153.93).unwrap().value, 0.0);
        let i = ZcInstrument::from_kbar(OptionKind::Swap, 1.0, 0.02, 153.93, 10.0, 10.0).unwrap();
        let v = zc_swap(&i, &c, 153.93).unwrap().value;
        let oracle = 0.7596 * (153.93 - 153.93 * 1.02f64.powi(10));
        assert_relative_eq!(v, oracle, max_relative = 1e-14);
        assert_relative_eq!(v, -25.61, epsilon = 0.01);
        let j = ZcInstrument { notional: 2.0, ..i };
        assert_relative_eq!(zc_swap(&j, &c, 153.93).unwrap().value, 2.0 * v, max_relative = 1e-15);
    }

    #[test]
    fn zc_cap_atm_example() {
        let c = curve();
        let i = ZcInstrument::new(OptionKind::Cap, 1.0, 124.43, 1.0, 1.0).unwrap();
        let v = zc_cap_floor(&i, &c, 124.43, 0.02442f64.powi(2)).unwrap().value;
        // ATM Black: F (2Φ(s/2) - 1) evaluated with erf at 50 digits.
        assert_relative_eq!(v, 1.170_488_881_511_465_6, epsilon = 1e-12);
    }

    #[test]
    fn intrinsic_limit() {
        let c = curve();
        let i = ZcInstrument::new(OptionKind::Cap, 1.0, 120.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(zc_cap_floor(&i, &c, 124.43, 0.0).unwrap().value, 0.9656 * 4.43, max_relative = 1e-14);
        assert_relative_eq!(zc_cap_floor(&i, &c, 124.43, 1e-14).unwrap().value, 0.9656 * 4.43, max_relative = 1e-12);
    }

    #[test]
    fn parity() {
        let c = curve();
        for k in [100.0, 124.43, 130.0, 160.0] {
            let cap = ZcInstrument::new(OptionKind::Cap, 3.0, k, 2.0, 2.0).unwrap();
            let fl = ZcInstrument { kind: OptionKind::Floor, ..cap };
            let sw = ZcInstrument { kind: OptionKind::Swap, ..cap };
            let d = zc_cap_floor(&cap, &c, 127.26, 0.003).unwrap().value
                - zc_cap_floor(&fl, &c, 127.26, 0.003).unwrap().value;
            assert!((d - zc_swap(&sw, &c, 127.26).unwrap().value).abs() < 1e-12);
        }
    }

    #[test]
    fn implied_vol_round_trip_and_monotone() {
        let c = curve();
        let i = ZcInstrument::new(OptionKind::Cap, 1.0, 124.43, 1.0, 1.0).unwrap();
        let v = zc_cap_floor(&i, &c, 124.43, 0.02442f64.powi(2)).unwrap().value;
        assert_relative_eq!(implied_vol(v, &i, &c, 124.43).unwrap(), 0.02442, epsilon = 1e-10);
        assert!(implied_vol(v * 1.01, &i, &c, 124.43).unwrap() > 0.02442);
        let otm = ZcInstrument::new(OptionKind::Floor, 1.0, 150.0, 10.0, 10.0).unwrap();
        for s in [0.005, 0.02, 0.05, 0.1] {
            let p = zc_cap_floor(&otm, &c, 153.93, s * s * 10.0).unwrap().value;
            assert_relative_eq!(implied_vol(p, &otm, &c, 153.93).unwrap(), s, max_relative = 1e-9);
        }
    }

    #[test]
    fn implied_vol_band() {
        let c = curve();
        let i = ZcInstrument::new(OptionKind::Cap, 1.0, 120.0, 1.0, 1.0).unwrap();
        let intrinsic = 0.9656 * 4.43;
        assert_eq!(implied_vol(intrinsic, &i, &c, 124.43).unwrap(), VOL_BRACKET.0);
        assert!(matches!(implied_vol(0.5 * intrinsic, &i, &c, 124.43), Err(Error::PriceOutOfBand { .. })));
        assert!(implied_vol(0.9656 * 125.0, &i, &c, 124.43).is_err());
    }

    #[test]
    fn black_dw_matches_finite_difference() {
        for (f, k, w) in [(124.43, 124.43, 0.0006), (153.93, 170.0, 0.016)] {
            let h = 1e-7;
            let fd = (black(OptionKind::Cap, f, k, w + h) - black(OptionKind::Cap, f, k, w - h)) / (2.0 * h);
            assert_relative_eq!(black_dw(f, k, w), fd, max_relative = 1e-7);
        }
    }

    fn flat_setup() -> (CpiVolSurface, SigmaVector) {
        let s = CpiVolSurface::flat(&[1.0, 2.0], &[124.43, 127.26], 0.02, &[0.0]).unwrap();
        (s, SigmaVector::new(vec![0.02, 0.02]).unwrap())
    }

    #[test]
    fn yoy_ratio_without_rate_vol() {
        let (s, sig) = flat_setup();
        let p = FactorParams::One;
        let rc = RateCorrelations::uniform(1, -0.5).unwrap();
        let g = G1ppParams::deterministic();
        let m = YoyModel { factors: &p, sigmas: &sig, rate_corr: &rc, rates: &g, surface: &s };
        let inst = YoyInstrument::new(OptionKind::Cap, 1.0, 0.02, 1.0, 2.0, 2.0).unwrap();
        let mo = yoy_moments(&inst, &m).unwrap();
        assert_relative_eq!(mo.forward_ratio, 127.26 / 124.43, max_relative = 1e-15);
        assert_relative_eq!(mo.variance, 0.02 * 0.02 * 1.0, max_relative = 1e-12);
    }

    #[test]
    fn yoy_parity() {
        let (s, sig) = flat_setup();
        let p = FactorParams::usd_two();
        let rc = RateCorrelations::uniform(2, -0.5).unwrap();
        let g = G1ppParams::constant(0.02, 0.01).unwrap();
        let m = YoyModel { factors: &p, sigmas: &sig, rate_corr: &rc, rates: &g, surface: &s };
        let c = curve();
        for kbar in [-0.01, 0.0, 0.01, 0.02, 0.03] {
            let cap = YoyInstrument::new(OptionKind::Cap, 1000.0, kbar, 1.0, 2.0, 2.0).unwrap();
            let fl = YoyInstrument { kind: OptionKind::Floor, ..cap };
            let d = yoy_cap_floor(&cap, &m, &c).unwrap().value - yoy_cap_floor(&fl, &m, &c).unwrap().value;
            assert!((d - yoy_swap(&cap, &m, &c).unwrap().value).abs() < 1e-12 * 1000.0);
        }
    }

    #[test]
    fn cap_monotone_in_strike() {
        let c = curve();
        let mut prev_cap = f64::INFINITY;
        let mut prev_floor = -1.0;
        for k in (90..160).map(|k| k as f64) {
            let cap = ZcInstrument::new(OptionKind::Cap, 1.0, k, 2.0, 2.0).unwrap();
            let fl = ZcInstrument { kind: OptionKind::Floor, ..cap };
            let a = zc_cap_floor(&cap, &c, 127.26, 0.004).unwrap().value;
            let b = zc_cap_floor(&fl, &c, 127.26, 0.004).unwrap().value;
            assert!(a <= prev_cap && b >= prev_floor);
            prev_cap = a;
            prev_floor = b;
        }
    }
}
