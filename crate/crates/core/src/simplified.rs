//! Calibration-free diffusion coefficient built directly from the smile.
//!
//! `q_i(K) = Σ_i(K) / max(1/η, 1 - K ln(K/F_i(0)) Σ_K / Σ)` and the
//! coefficient is `Λ_i = q_i(F) / √ζ_ii(t)`.

use crate::error::{Error, Result};
use crate::factors::FactorParams;
use crate::market_data::CpiVolSurface;
use crate::mc::DiffusionCoefficient;

/// Default algorithmic cap.
pub const DEFAULT_ETA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedParams {
    pub eta: f64,
}

impl SimplifiedParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(SimplifiedParams { eta })
    }
}

impl Default for SimplifiedParams {
    fn default() -> Self {
        SimplifiedParams { eta: DEFAULT_ETA }
    }
}

/// `q_i(K)` for tenor `i`.
pub fn q_of_strike(i: usize, strike: f64, surface: &CpiVolSurface, sp: &SimplifiedParams) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(Error::Invalid(format!("strike must be positive, got {strike}")));
    }
    let t = surface.tenor(i)?;
    Ok(q_unchecked(t.vol_derivs(strike), strike, t.forward, sp.eta))
}

#[inline]
fn q_unchecked((s, s_k, _): (f64, f64, f64), k: f64, f0: f64, eta: f64) -> f64 {
    let denom = 1.0 - k * (k / f0).ln() * s_k / s;
    s / denom.max(1.0 / eta)
}

/// The simplified model as a diffusion coefficient for the engine.
#[derive(Debug, Clone)]
pub struct SimplifiedCoefficient<'a> {
    surface: &'a CpiVolSurface,
    factors: FactorParams,
    params: SimplifiedParams,
}

impl<'a> SimplifiedCoefficient<'a> {
    pub fn new(surface: &'a CpiVolSurface, factors: FactorParams, params: SimplifiedParams) -> Self {
        SimplifiedCoefficient { surface, factors, params }
    }

    /// `Λ_i(F, t) = q_i(F) / √ζ_ii(t)`.
    pub fn coefficient(&self, i: usize, forward: f64, t: f64) -> Result<f64> {
        let tenor = self.surface.tenor(i)?;
        let q = q_of_strike(i, forward, self.surface, &self.params)?;
        Ok(q / self.factors.zeta_tau(tenor.reset - t).sqrt())
    }
}

impl DiffusionCoefficient for SimplifiedCoefficient<'_> {
    fn coefficient(&self, i: usize, forward: f64, t: f64) -> f64 {
        let tenor = &self.surface.tenors()[i];
        let q = q_unchecked(tenor.vol_derivs(forward), forward, tenor.forward, self.params.eta);
        q / self.factors.zeta_tau(tenor.reset - t).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_row() -> CpiVolSurface {
        let t = crate::market_data::CpiTenor::new(
            5.0,
            5.0,
            136.30,
            vec![-0.02, -0.01, 0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            vec![0.03620, 0.03218, 0.02851, 0.02556, 0.02243, 0.02415, 0.02915, 0.03471],
        )
        .unwrap();
        CpiVolSurface::new(vec![t]).unwrap()
    }

    #[test]
    fn flat_smile_gives_sigma() {
        let s = CpiVolSurface::flat(&[2.0], &[127.26], 0.025, &[-0.02, 0.0, 0.05]).unwrap();
        let sp = SimplifiedParams::default();
        for k in [100.0, 127.26, 150.0] {
            assert_relative_eq!(q_of_strike(0, k, &s, &sp).unwrap(), 0.025, epsilon = 1e-15);
        }
        let c = SimplifiedCoefficient::new(&s, FactorParams::One, sp);
        assert_relative_eq!(c.coefficient(0, 130.0, 1.0).unwrap(), 0.025, epsilon = 1e-15);
        let p3 = FactorParams::usd_three();
        let c3 = SimplifiedCoefficient::new(&s, p3, sp);
        let expect = 0.025 / p3.zeta_tau(1.5).sqrt();
        assert_relative_eq!(c3.coefficient(0, 130.0, 0.5).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn at_the_forward_equals_quote() {
        let s = table_row();
        let q = q_of_strike(0, 136.30, &s, &SimplifiedParams::default()).unwrap();
        assert_relative_eq!(q, 0.02851, epsilon = 1e-14);
    }

    #[test]
    fn clamp_activates_on_steep_smile() {
        // Vol rising steeply with strike drives the denominator to zero above the forward.
        let t = crate::market_data::CpiTenor::new(1.0, 1.0, 100.0, vec![0.0, 0.5], vec![0.02, 0.6]).unwrap();
        let s = CpiVolSurface::new(vec![t]).unwrap();
        let sp = SimplifiedParams::default();
        let k = 125.0;
        let (v, vk, _) = s.tenor(0).unwrap().vol_derivs(k);
        assert!(1.0 - k * (k / 100.0f64).ln() * vk / v < 0.1);
        assert_relative_eq!(q_of_strike(0, k, &s, &sp).unwrap(), 10.0 * v, max_relative = 1e-14);
    }

    #[test]
    fn q_is_continuous_in_strike() {
        let s = table_row();
        let sp = SimplifiedParams::default();
        // quoted strikes run from 136.30·0.98⁵ to 136.30·1.05⁵
        for k in 0..1960 {
            let k = 124.0 + k as f64 * 0.025;
            let a = q_of_strike(0, k, &s, &sp).unwrap();
            let b = q_of_strike(0, k + 1e-7, &s, &sp).unwrap();
            assert!((a - b).abs() < 1e-5, "K={k}: {a} vs {b}");
        }
    }

    #[test]
    fn large_eta_is_irrelevant_for_gentle_smiles() {
        let s = table_row();
        let a = q_of_strike(0, 140.0, &s, &SimplifiedParams::new(10.0).unwrap()).unwrap();
        let b = q_of_strike(0, 140.0, &s, &SimplifiedParams::new(1e9).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
