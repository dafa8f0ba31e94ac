//! Gaussian one-factor short rate `r_t = x_t + φ_t` with mean-reverting
//! `dx = -a x dt + σ^r dW`, `x_0 = 0`.
//!
//! `a` and `σ^r` are piecewise constant in time; the shift `φ` is piecewise
//! constant on the discount-curve pillar intervals and is fitted so that
//! model bond prices reproduce the curve at every pillar.

use std::path::Path;

use crate::error::{Error, Result};
use crate::market_data::io::{read_rows, write_rows};
use crate::market_data::DiscountCurve;
use crate::quad::bond_rule;

pub const G1PP_HEADER: [&str; 2] = ["t", "sigma_r"];

/// A right-continuous step function: `values[k]` applies on
/// `(ends[k-1], ends[k]]`, and the last value is held flat beyond the last end.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    ends: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    /// `points[k] = (t_k, v_k)` means `v_k` applies on `(t_{k-1}, t_k]`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("piecewise-constant function needs a value".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(format!(
                    "breakpoints must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points[0].0 <= 0.0 {
            return Err(Error::Invalid("first breakpoint must be positive".into()));
        }
        let (ends, values) = points.into_iter().unzip();
        Ok(PiecewiseConstant { ends, values })
    }

    pub fn constant(v: f64) -> Self {
        PiecewiseConstant {
            ends: vec![f64::INFINITY],
            values: vec![v],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ends(&self) -> &[f64] {
        &self.ends
    }

    /// Interior breakpoints, where the value may jump.
    pub fn breaks(&self) -> &[f64] {
        &self.ends[..self.ends.len() - 1]
    }

    fn piece(&self, t: f64) -> usize {
        self.ends[..self.ends.len() - 1].partition_point(|&e| e < t)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.values[self.piece(t)]
    }

    /// Value on the piece containing `(t, t+)`, i.e. the right limit.
    pub fn right_of(&self, t: f64) -> f64 {
        self.values[self.ends[..self.ends.len() - 1].partition_point(|&e| e <= t)]
    }

    /// Calls `f(lo, hi, value)` for every constant piece inside `[a, b]`.
    pub fn for_pieces(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64, f64)) {
        if a >= b {
            return;
        }
        let mut lo = a;
        let mut k = self.ends[..self.ends.len() - 1].partition_point(|&e| e <= a);
        loop {
            let hi = if k + 1 < self.ends.len() { self.ends[k].min(b) } else { b };
            f(lo, hi, self.values[k]);
            if hi >= b {
                break;
            }
            lo = hi;
            k += 1;
        }
    }

    /// `∫_a^b v(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut s = 0.0;
        self.for_pieces(a, b, |lo, hi, v| s += v * (hi - lo));
        s
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        PiecewiseConstant {
            ends: self.ends.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Mean reversion and volatility of the rate state.
#[derive(Debug, Clone, PartialEq)]
pub struct G1ppParams {
    mean_reversion: PiecewiseConstant,
    vol: PiecewiseConstant,
}

impl G1ppParams {
    pub fn new(mean_reversion: PiecewiseConstant, vol: PiecewiseConstant) -> Result<Self> {
        if let Some(a) = mean_reversion.values().iter().find(|&&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::Invalid(format!("mean reversion must be >= 0, got {a}")));
        }
        if let Some(s) = vol.values().iter().find(|&&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::Invalid(format!("rate volatility must be >= 0, got {s}")));
        }
        Ok(G1ppParams { mean_reversion, vol })
    }

    pub fn constant(a: f64, sigma_r: f64) -> Result<Self> {
        Self::new(PiecewiseConstant::constant(a), PiecewiseConstant::constant(sigma_r))
    }

    /// Deterministic rates: `σ^r ≡ 0`.
    pub fn deterministic() -> Self {
        G1ppParams {
            mean_reversion: PiecewiseConstant::constant(0.0),
            vol: PiecewiseConstant::constant(0.0),
        }
    }

    pub fn mean_reversion(&self) -> &PiecewiseConstant {
        &self.mean_reversion
    }

    pub fn vol(&self) -> &PiecewiseConstant {
        &self.vol
    }

    pub fn sigma_r(&self, t: f64) -> f64 {
        self.vol.right_of(t)
    }

    pub fn is_deterministic(&self) -> bool {
        self.vol.values().iter().all(|&s| s == 0.0)
    }

    /// Copy with every volatility multiplied by `k`.
    pub fn with_vol_scaled(&self, k: f64) -> Self {
        G1ppParams {
            mean_reversion: self.mean_reversion.clone(),
            vol: self.vol.map(|s| s * k),
        }
    }

    /// Breakpoints of `a` and `σ^r` merged.
    pub fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .mean_reversion
            .breaks()
            .iter()
            .chain(self.vol.breaks())
            .copied()
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `∫_t^T a(s) ds`.
    pub fn decay_exponent(&self, t: f64, big_t: f64) -> f64 {
        self.mean_reversion.integral(t, big_t)
    }

    /// `b(t,T) = ∫_t^T exp(-∫_t^v a) dv`.
    pub fn b_factor(&self, t: f64, big_t: f64) -> Result<f64> {
        if t > big_t {
            return Err(Error::Invalid(format!("b_factor needs t <= T, got t={t}, T={big_t}")));
        }
        Ok(self.b_unchecked(t, big_t))
    }

    pub(crate) fn b_unchecked(&self, t: f64, big_t: f64) -> f64 {
        let mut acc = 0.0;
        let mut decay = 0.0_f64;
        self.mean_reversion.for_pieces(t, big_t, |lo, hi, a| {
            let h = hi - lo;
            acc += (-decay).exp() * expm1_ratio(a, h);
            decay += a * h;
        });
        acc
    }

    /// `∫_t^T (b(s,T) σ^r_s)² ds` by Gauss–Legendre on every constant piece.
    pub fn convexity(&self, t: f64, big_t: f64) -> f64 {
        if t >= big_t || self.is_deterministic() {
            return 0.0;
        }
        let breaks = self.breaks();
        bond_rule().integrate_pieces(t, big_t, &breaks, |s| {
            let v = self.b_unchecked(s, big_t) * self.vol.at(s);
            v * v
        })
    }

    /// Exact transition of `x` over `[t0, t1]`: `x_{t1} = decay·x_{t0} + ε`
    /// with `Var ε = var`.
    pub fn ou_transition(&self, t0: f64, t1: f64) -> (f64, f64) {
        let decay = (-self.decay_exponent(t0, t1)).exp();
        let mut var = 0.0;
        // Walk backwards from t1 so that the decay to t1 accumulates.
        let mut pieces = Vec::new();
        let breaks = self.breaks();
        let mut lo = t0;
        for &p in breaks.iter().filter(|&&p| p > t0 && p < t1) {
            pieces.push((lo, p));
            lo = p;
        }
        pieces.push((lo, t1));
        let mut tail = 0.0_f64;
        for &(lo, hi) in pieces.iter().rev() {
            let mid = 0.5 * (lo + hi);
            let a = self.mean_reversion.at(mid);
            let s = self.vol.at(mid);
            let h = hi - lo;
            var += s * s * (-2.0 * tail).exp() * expm1_ratio(2.0 * a, h);
            tail += a * h;
        }
        (decay, var)
    }

    /// Reads `t,sigma_r` rows and combines them with a constant mean reversion.
    pub fn read_csv(path: &Path, a: f64) -> Result<Self> {
        let rows = read_rows(path, &G1PP_HEADER)?;
        let mut pts = Vec::with_capacity(rows.rows.len());
        for (line, rec) in &rows.rows {
            let t = rows.num(*line, rec, 0, "t")?;
            let s = rows.num(*line, rec, 1, "sigma_r")?;
            if s < 0.0 {
                return Err(rows.err(*line, format!("sigma_r must be >= 0, got {s}")));
            }
            pts.push((t, s));
        }
        let vol = PiecewiseConstant::new(pts).map_err(|e| Error::schema(path, 0, e.to_string()))?;
        Self::new(PiecewiseConstant::constant(a), vol)
    }

    pub fn write_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .vol
            .ends()
            .iter()
            .zip(self.vol.values())
            .filter(|(t, _)| t.is_finite())
            .map(|(&t, &s)| vec![t, s])
            .collect();
        write_rows(&G1PP_HEADER, &rows)
    }
}

/// `(1 - e^{-a h}) / a`, continuous at `a = 0`.
fn expm1_ratio(a: f64, h: f64) -> f64 {
    if a * h == 0.0 {
        h
    } else {
        -(-a * h).exp_m1() / a
    }
}

/// Piecewise-constant shift on the discount pillar intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftFunction {
    phi: PiecewiseConstant,
    last: f64,
}

impl ShiftFunction {
    pub fn values(&self) -> &[f64] {
        self.phi.values()
    }

    pub fn pillars(&self) -> &[f64] {
        self.phi.ends()
    }

    pub fn last_time(&self) -> f64 {
        self.last
    }

    /// `φ(t)`, right-continuous at pillars; the last value is held flat.
    pub fn at(&self, t: f64) -> f64 {
        self.phi.right_of(t)
    }

    /// `∫_a^b φ(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.phi.integral(a, b)
    }
}

/// Fits `φ` so that `P(0,T_n)` is reproduced at every pillar.
pub fn calibrate_shift(params: &G1ppParams, curve: &DiscountCurve) -> Result<ShiftFunction> {
    let times = curve.times();
    if times.len() < 2 {
        return Err(Error::Invalid("shift calibration needs at least two pillars".into()));
    }
    let lnpz: Vec<f64> = times.iter().map(|&t| 0.5 * params.convexity(0.0, t)).collect();
    let lnp: Vec<f64> = curve.dfs().iter().map(|d| d.ln()).collect();
    let mut pts = Vec::with_capacity(times.len() - 1);
    for n in 1..times.len() {
        let dt = times[n] - times[n - 1];
        if dt <= 0.0 {
            return Err(Error::Invalid(format!("degenerate pillar interval at T={}", times[n])));
        }
        let phi = (lnpz[n] - lnpz[n - 1] + lnp[n - 1] - lnp[n]) / dt;
        pts.push((times[n], phi));
    }
    Ok(ShiftFunction {
        phi: PiecewiseConstant::new(pts)?,
        last: *times.last().unwrap(),
    })
}

/// Deterministic part of a bond price: `P(t,T;x) = exp(ln_a - b·x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondCoefficients {
    pub ln_a: f64,
    pub b: f64,
}

impl BondCoefficients {
    pub fn price(&self, x: f64) -> f64 {
        (self.ln_a - self.b * x).exp()
    }
}

/// A calibrated short-rate model: parameters plus fitted shift.
#[derive(Debug, Clone, PartialEq)]
pub struct G1ppModel {
    pub params: G1ppParams,
    pub shift: ShiftFunction,
}

impl G1ppModel {
    pub fn calibrate(params: G1ppParams, curve: &DiscountCurve) -> Result<Self> {
        let shift = calibrate_shift(&params, curve)?;
        Ok(G1ppModel { params, shift })
    }

    pub fn bond_coefficients(&self, t: f64, big_t: f64) -> Result<BondCoefficients> {
        check_times(t, big_t)?;
        if big_t > self.shift.last_time() * (1.0 + 1e-12) {
            return Err(Error::OutOfRange {
                what: "bond maturity",
                value: big_t,
                lo: 0.0,
                hi: self.shift.last_time(),
            });
        }
        Ok(BondCoefficients {
            ln_a: -self.shift.integral(t, big_t) + 0.5 * self.params.convexity(t, big_t),
            b: self.params.b_unchecked(t, big_t),
        })
    }

    /// `P(t,T)` given the state `x_t`.
    pub fn zcb_price(&self, t: f64, x: f64, big_t: f64) -> Result<f64> {
        Ok(self.bond_coefficients(t, big_t)?.price(x))
    }

    /// Model instantaneous forward `f(0,T) = φ(T) - ½ ∂_T ∫_0^T (bσ)²`.
    pub fn forward_rate(&self, big_t: f64) -> f64 {
        self.shift.at(big_t) - 0.5 * self.convexity_slope(big_t)
    }

    fn convexity_slope(&self, big_t: f64) -> f64 {
        if self.params.is_deterministic() || big_t <= 0.0 {
            return 0.0;
        }
        let p = &self.params;
        bond_rule().integrate_pieces(0.0, big_t, &p.breaks(), |s| {
            let sig = p.vol.at(s);
            2.0 * p.b_unchecked(s, big_t) * sig * sig * (-p.decay_exponent(s, big_t)).exp()
        })
    }
}

/// `P(t,T)` from parameters and shift.
pub fn zcb_price(
    params: &G1ppParams,
    shift: &ShiftFunction,
    t: f64,
    x: f64,
    big_t: f64,
) -> Result<f64> {
    check_times(t, big_t)?;
    Ok((-shift.integral(t, big_t) + 0.5 * params.convexity(t, big_t)
        - params.b_unchecked(t, big_t) * x)
        .exp())
}

/// `P^z(t,T) = exp(½∫(bσ)² - b·x)`.
pub fn pz_bond(params: &G1ppParams, t: f64, x: f64, big_t: f64) -> Result<f64> {
    check_times(t, big_t)?;
    Ok((0.5 * params.convexity(t, big_t) - params.b_unchecked(t, big_t) * x).exp())
}

fn check_times(t: f64, big_t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= big_t) {
        return Err(Error::Invalid(format!("need 0 <= t <= T, got t={t}, T={big_t}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn market_curve() -> DiscountCurve {
        DiscountCurve::new(vec![
            (0.0, 1.0),
            (1.0, 0.9656),
            (2.0, 0.9318),
            (3.0, 0.8993),
            (5.0, 0.8374),
            (7.0, 0.7797),
            (10.0, 0.7596),
            (12.0, 0.7057),
            (15.0, 0.6545),
            (20.0, 0.58),
        ])
        .unwrap()
    }

    fn market_rates() -> G1ppParams {
        let vol = PiecewiseConstant::new(vec![
            (1.0, 0.01071),
            (2.0, 0.01093),
            (3.0, 0.00992),
            (5.0, 0.00839),
            (10.0, 0.00686),
            (20.0, 0.00683),
        ])
        .unwrap();
        G1ppParams::new(PiecewiseConstant::constant(0.02), vol).unwrap()
    }

    // Trapezoid oracle with many panels.
    fn trapz(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..n {
            s += f(a + k as f64 * h);
        }
        s * h
    }

    #[test]
    fn piecewise_pieces_and_integral() {
        let p = PiecewiseConstant::new(vec![(1.0, 2.0), (3.0, 5.0)]).unwrap();
        assert_eq!(p.at(0.5), 2.0);
        assert_eq!(p.at(1.0), 2.0);
        assert_eq!(p.right_of(1.0), 5.0);
        assert_eq!(p.at(10.0), 5.0);
        assert_relative_eq!(p.integral(0.5, 4.0), 0.5 * 2.0 + 3.0 * 5.0);
        assert_eq!(p.integral(2.0, 2.0), 0.0);
    }

    #[test]
    fn b_factor_examples() {
        let zero = G1ppParams::constant(0.0, 0.01).unwrap();
        assert_relative_eq!(zero.b_factor(0.3, 2.1).unwrap(), 1.8, epsilon = 1e-15);
        let g = G1ppParams::constant(0.02, 0.01).unwrap();
        let oracle = trapz(0.0, 1.0, 20000, |v| (-0.02 * v).exp());
        assert_relative_eq!(g.b_factor(0.0, 1.0).unwrap(), oracle, max_relative = 1e-9);
        assert_relative_eq!(g.b_factor(0.0, 1.0).unwrap(), 0.990_066_3, epsilon = 1e-7);
        assert_eq!(g.b_factor(4.0, 4.0).unwrap(), 0.0);
        assert!(g.b_factor(2.0, 1.0).is_err());
    }

    #[test]
    fn b_factor_piecewise_mean_reversion() {
        let a = PiecewiseConstant::new(vec![(1.0, 0.05), (3.0, 0.0), (5.0, 0.2)]).unwrap();
        let g = G1ppParams::new(a.clone(), PiecewiseConstant::constant(0.01)).unwrap();
        let oracle = trapz(0.5, 6.0, 200_000, |v| (-a.integral(0.5, v)).exp());
        assert_relative_eq!(g.b_factor(0.5, 6.0).unwrap(), oracle, max_relative = 1e-8);
    }

    #[test]
    fn b_factor_monotone() {
        let g = G1ppParams::constant(0.05, 0.01).unwrap();
        let h = G1ppParams::constant(0.1, 0.01).unwrap();
        let mut prev = 0.0;
        for k in 1..40 {
            let t = k as f64 * 0.5;
            let b = g.b_factor(0.0, t).unwrap();
            assert!(b > prev);
            assert!(h.b_factor(0.0, t).unwrap() < b);
            prev = b;
        }
    }

    #[test]
    fn shift_round_trip_market() {
        let curve = market_curve();
        let model = G1ppModel::calibrate(market_rates(), &curve).unwrap();
        for (t, df) in curve.pillars() {
            let p = model.zcb_price(0.0, 0.0, t).unwrap();
            assert!((p / df - 1.0).abs() < 1e-12, "T={t}: {p} vs {df}");
        }
    }

    #[test]
    fn shift_without_rate_vol_is_curve_forward() {
        let curve = market_curve();
        let s = calibrate_shift(&G1ppParams::deterministic(), &curve).unwrap();
        let t = curve.times();
        let d = curve.dfs();
        for n in 1..t.len() {
            let fwd = (d[n - 1] / d[n]).ln() / (t[n] - t[n - 1]);
            assert_relative_eq!(s.values()[n - 1], fwd, max_relative = 1e-14);
        }
        let flat = DiscountCurve::flat(0.03, &[1.0, 2.0, 5.0]).unwrap();
        let s = calibrate_shift(&G1ppParams::deterministic(), &flat).unwrap();
        for v in s.values() {
            assert_relative_eq!(*v, 0.03, max_relative = 1e-12);
        }
    }

    #[test]
    fn zcb_examples() {
        let g = G1ppParams::constant(0.0, 0.0).unwrap();
        let flat = DiscountCurve::flat(0.03, &[1.0, 5.0]).unwrap();
        let m = G1ppModel::calibrate(g, &flat).unwrap();
        assert_relative_eq!(m.zcb_price(1.0, 0.01, 3.0).unwrap(), (-0.08f64).exp(), max_relative = 1e-12);
        assert_eq!(m.zcb_price(2.0, 0.3, 2.0).unwrap(), 1.0);
        assert!(m.zcb_price(3.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn pz_examples() {
        let g0 = G1ppParams::constant(0.0, 0.0).unwrap();
        assert_eq!(pz_bond(&g0, 0.0, 0.0, 7.0).unwrap(), 1.0);
        assert_relative_eq!(pz_bond(&g0, 1.0, 0.01, 4.0).unwrap(), (-0.03f64).exp(), max_relative = 1e-14);
        let g = G1ppParams::constant(0.0, 0.01).unwrap();
        let oracle = (0.5 * trapz(0.0, 2.0, 20000, |s| 1e-4 * (2.0 - s).powi(2))).exp();
        let v = pz_bond(&g, 0.0, 0.0, 2.0).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-10);
        assert_relative_eq!(v, (0.5 * 1e-4 * 8.0 / 3.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn zcb_continuous_across_breakpoints() {
        let model = G1ppModel::calibrate(market_rates(), &market_curve()).unwrap();
        for &b in &[1.0, 2.0, 5.0, 10.0] {
            let lo = model.zcb_price(b - 1e-9, 0.004, 15.0).unwrap();
            let hi = model.zcb_price(b + 1e-9, 0.004, 15.0).unwrap();
            assert!((lo - hi).abs() < 1e-8);
        }
    }

    #[test]
    fn ou_transition_matches_quadrature() {
        let g = market_rates();
        let (d, v) = g.ou_transition(0.7, 4.2);
        assert_relative_eq!(d, (-0.02f64 * 3.5).exp(), max_relative = 1e-14);
        let oracle = trapz(0.7, 4.2, 400_000, |s| {
            let sig = g.vol().at(s);
            sig * sig * (-2.0 * 0.02 * (4.2 - s)).exp()
        });
        assert_relative_eq!(v, oracle, max_relative = 1e-6);
    }

    #[test]
    fn forward_rate_matches_log_bond_slope() {
        let model = G1ppModel::calibrate(market_rates(), &market_curve()).unwrap();
        let t = 6.3;
        let h = 1e-5;
        let fd = -(model.zcb_price(0.0, 0.0, t + h).unwrap().ln()
            - model.zcb_price(0.0, 0.0, t - h).unwrap().ln())
            / (2.0 * h);
        assert_relative_eq!(model.forward_rate(t), fd, max_relative = 1e-6);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g1pp.csv");
        let g = market_rates();
        std::fs::write(&path, g.write_csv()).unwrap();
        let back = G1ppParams::read_csv(&path, 0.02).unwrap();
        assert_eq!(back.vol().values(), g.vol().values());
        assert_eq!(back.sigma_r(1.5), 0.01093);
        assert_eq!(back.sigma_r(25.0), 0.00683);
    }
}
