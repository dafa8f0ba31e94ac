//! Parametric factor loadings `λ_i^α(t)`, their overlaps `ζ_ij(t)`, the
//! per-tenor volatility scales `σ_i` and the measure-change drifts `ν`, `ν̄`.
//!
//! Loadings depend on time to reset `τ = T_i - t` only and are frozen at
//! `τ = 0` once an underlier has reset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::g1pp::G1ppParams;
use crate::market_data::CpiVolSurface;
use crate::quad::factor_rule;

/// Loading parameters for one, two or three factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorParams {
    One,
    Two { h1: f64, h2: f64, kappa: f64 },
    Three { h1: f64, h2: f64, h3: f64, h4: f64, kappa1: f64, kappa2: f64 },
}

impl FactorParams {
    pub fn two(h1: f64, h2: f64, kappa: f64) -> Result<Self> {
        check_kappa(kappa)?;
        check_finite(&[h1, h2])?;
        Ok(FactorParams::Two { h1, h2, kappa })
    }

    pub fn three(h1: f64, h2: f64, h3: f64, h4: f64, kappa1: f64, kappa2: f64) -> Result<Self> {
        check_kappa(kappa1)?;
        check_kappa(kappa2)?;
        check_finite(&[h1, h2, h3, h4])?;
        Ok(FactorParams::Three { h1, h2, h3, h4, kappa1, kappa2 })
    }

    /// Fitted two-factor parameters quoted for the USD market.
    pub fn usd_two() -> Self {
        FactorParams::Two { h1: -3.689, h2: 3.553, kappa: 0.042 }
    }

    /// Fitted three-factor parameters quoted for the USD market.
    pub fn usd_three() -> Self {
        FactorParams::Three {
            h1: 2.319,
            h2: -2.068,
            h3: 0.275,
            h4: -0.145,
            kappa1: 0.085,
            kappa2: 0.142,
        }
    }

    /// Builds parameters from separate `h` and `κ` lists.
    pub fn from_lists(m: usize, h: &[f64], kappa: &[f64]) -> Result<Self> {
        match (m, h, kappa) {
            (1, [], []) => Ok(FactorParams::One),
            (2, &[h1, h2], &[k]) => Self::two(h1, h2, k),
            (3, &[h1, h2, h3, h4], &[k1, k2]) => Self::three(h1, h2, h3, h4, k1, k2),
            (1..=3, _, _) => Err(Error::Invalid(format!(
                "M={m} needs {} h values and {} kappa values, got {} and {}",
                [0, 2, 4][m - 1],
                [0, 1, 2][m - 1],
                h.len(),
                kappa.len()
            ))),
            _ => Err(Error::OutOfRange { what: "factor count M", value: m as f64, lo: 1.0, hi: 3.0 }),
        }
    }

    pub fn h(&self) -> Vec<f64> {
        match *self {
            FactorParams::One => vec![],
            FactorParams::Two { h1, h2, .. } => vec![h1, h2],
            FactorParams::Three { h1, h2, h3, h4, .. } => vec![h1, h2, h3, h4],
        }
    }

    pub fn kappa(&self) -> Vec<f64> {
        match *self {
            FactorParams::One => vec![],
            FactorParams::Two { kappa, .. } => vec![kappa],
            FactorParams::Three { kappa1, kappa2, .. } => vec![kappa1, kappa2],
        }
    }

    pub fn factor_count(&self) -> usize {
        match self {
            FactorParams::One => 1,
            FactorParams::Two { .. } => 2,
            FactorParams::Three { .. } => 3,
        }
    }

    /// Flat parameter vector `[h..., κ...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.h();
        v.extend(self.kappa());
        v
    }

    /// Inverse of [`FactorParams::to_vec`] without validation.
    pub(crate) fn from_vec_unchecked(m: usize, v: &[f64]) -> Self {
        match m {
            2 => FactorParams::Two { h1: v[0], h2: v[1], kappa: v[2] },
            3 => FactorParams::Three {
                h1: v[0],
                h2: v[1],
                h3: v[2],
                h4: v[3],
                kappa1: v[4],
                kappa2: v[5],
            },
            _ => FactorParams::One,
        }
    }

    /// All loadings at time to reset `tau`, written into `out[..M]`.
    #[inline]
    pub fn loadings_tau(&self, tau: f64, out: &mut [f64; 3]) {
        let tau = tau.max(0.0);
        out[0] = 1.0;
        match *self {
            FactorParams::One => {}
            FactorParams::Two { h1, h2, kappa } => {
                out[1] = h1 * (-kappa * tau).exp() + h2;
            }
            FactorParams::Three { h1, h2, h3, h4, kappa1, kappa2 } => {
                out[1] = h1 * (-kappa1 * tau).exp() + h2;
                out[2] = h3 * tau * (-kappa2 * tau).exp() + h4;
            }
        }
    }

    /// `ζ_ii` at time to reset `tau`.
    #[inline]
    pub fn zeta_tau(&self, tau: f64) -> f64 {
        let mut l = [0.0; 3];
        self.loadings_tau(tau, &mut l);
        l[..self.factor_count()].iter().map(|x| x * x).sum()
    }

    /// Closed form of `∫ ζ_ii dτ` over `τ ∈ [u0, u1]`, `0 ≤ u0 ≤ u1`.
    fn zeta_diag_tau_integral(&self, u0: f64, u1: f64) -> f64 {
        let len = u1 - u0;
        // ∫ e^{-cτ} dτ
        let e0 = |c: f64| ((-c * u0).exp() - (-c * u1).exp()) / c;
        // ∫ τ e^{-cτ} dτ
        let e1 = |c: f64| {
            let g = |u: f64| -(-c * u).exp() * (u / c + 1.0 / (c * c));
            g(u1) - g(u0)
        };
        // ∫ τ² e^{-cτ} dτ
        let e2 = |c: f64| {
            let g = |u: f64| -(-c * u).exp() * (u * u / c + 2.0 * u / (c * c) + 2.0 / (c * c * c));
            g(u1) - g(u0)
        };
        match *self {
            FactorParams::One => len,
            FactorParams::Two { h1, h2, kappa } => {
                len * (1.0 + h2 * h2) + h1 * h1 * e0(2.0 * kappa) + 2.0 * h1 * h2 * e0(kappa)
            }
            FactorParams::Three { h1, h2, h3, h4, kappa1, kappa2 } => {
                len * (1.0 + h2 * h2 + h4 * h4)
                    + h1 * h1 * e0(2.0 * kappa1)
                    + 2.0 * h1 * h2 * e0(kappa1)
                    + h3 * h3 * e2(2.0 * kappa2)
                    + 2.0 * h3 * h4 * e1(kappa2)
            }
        }
    }
}

fn check_kappa(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Invalid(format!("kappa must be strictly positive, got {k}")));
    }
    Ok(())
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Invalid("factor loading parameters must be finite".into()))
    }
}

/// `λ_i^α(t)` for `α` in `1..=M`.
pub fn loading(p: &FactorParams, alpha: usize, t_i: f64, t: f64) -> Result<f64> {
    if alpha == 0 || alpha > p.factor_count() {
        return Err(Error::OutOfRange {
            what: "factor index",
            value: alpha as f64,
            lo: 1.0,
            hi: p.factor_count() as f64,
        });
    }
    let mut l = [0.0; 3];
    p.loadings_tau(t_i - t, &mut l);
    Ok(l[alpha - 1])
}

/// `ζ_ij(t) = Σ_α λ_i^α λ_j^α`.
pub fn zeta(p: &FactorParams, t_i: f64, t_j: f64, t: f64) -> f64 {
    let (mut li, mut lj) = ([0.0; 3], [0.0; 3]);
    p.loadings_tau(t_i - t, &mut li);
    p.loadings_tau(t_j - t, &mut lj);
    (0..p.factor_count()).map(|a| li[a] * lj[a]).sum()
}

/// Instantaneous correlation `ζ_ij / √(ζ_ii ζ_jj)`.
pub fn inst_correlation(p: &FactorParams, t_i: f64, t_j: f64, t: f64) -> f64 {
    let c = zeta(p, t_i, t_j, t) / (zeta(p, t_i, t_i, t) * zeta(p, t_j, t_j, t)).sqrt();
    c.clamp(-1.0, 1.0)
}

/// `∫_{t0}^{t1} ζ_ij(s) ds`.
///
/// The diagonal uses closed forms; off-diagonal overlaps use 32-node
/// Gauss–Legendre, split where either loading freezes.
pub fn integrated_zeta(p: &FactorParams, t_i: f64, t_j: f64, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    if t_i == t_j {
        // Past reset the loading is frozen at τ = 0.
        let frozen = (t1 - t1.min(t_i).max(t0)) * p.zeta_tau(0.0);
        let live_hi = t1.min(t_i);
        if live_hi <= t0 {
            return frozen;
        }
        return p.zeta_diag_tau_integral(t_i - live_hi, t_i - t0) + frozen;
    }
    factor_rule().integrate_pieces(t0, t1, &[t_i, t_j], |s| zeta(p, t_i, t_j, s))
}

/// Per-tenor volatility scales `σ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaVector(pub Vec<f64>);

impl SigmaVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(s) = v.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Invalid(format!("sigma must be positive, got {s}")));
        }
        Ok(SigmaVector(v))
    }

    pub fn get(&self, i: usize) -> Result<f64> {
        self.0.get(i).copied().ok_or(Error::UnknownTenor(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Correlations `ρ_{rF^α}` between the rate driver and each inflation factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCorrelations(Vec<f64>);

impl RateCorrelations {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || rho.len() > 3 {
            return Err(Error::Invalid(format!("need 1 to 3 rate correlations, got {}", rho.len())));
        }
        if let Some(r) = rho.iter().find(|r| !(r.abs() <= 1.0)) {
            return Err(Error::InvalidCorrelation(*r));
        }
        let s: f64 = rho.iter().map(|r| r * r).sum();
        if s > 1.0 + 1e-12 {
            return Err(Error::InvalidCorrelation(s));
        }
        Ok(RateCorrelations(rho))
    }

    /// The same correlation `rho` for each of `m` factors.
    pub fn uniform(m: usize, rho: f64) -> Result<Self> {
        Self::new(vec![rho; m])
    }

    pub fn zero(m: usize) -> Self {
        RateCorrelations(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `Σ_α ρ_α λ_i^α` at time to reset `tau`.
    #[inline]
    pub fn weighted_loading(&self, p: &FactorParams, tau: f64) -> f64 {
        let mut l = [0.0; 3];
        p.loadings_tau(tau, &mut l);
        self.0.iter().zip(&l).map(|(r, x)| r * x).sum()
    }
}

/// `σ_i = Σ_i(K)·√(T_i / ∫_0^{T_i} ζ_ii)` at `K = F_i(0)(1+K̄*)^{T_i}`.
pub fn calibrate_sigmas(p: &FactorParams, surface: &CpiVolSurface, kbar: f64) -> Result<SigmaVector> {
    let mut out = Vec::with_capacity(surface.len());
    for t in surface.tenors() {
        let vol = t.vol(t.strike(kbar));
        let iz = integrated_zeta(p, t.reset, t.reset, 0.0, t.reset);
        if !(iz > 0.0) {
            return Err(Error::Numerical(format!("non-positive integrated variance at T={}", t.reset)));
        }
        out.push(vol * (t.reset / iz).sqrt());
    }
    SigmaVector::new(out)
}

/// Risk-neutral drift coefficient `ν_i(t) = σ^r_t b(t,T̃_i) Σ_α ρ_α λ_i^α(t)`.
pub fn nu(p: &FactorParams, rc: &RateCorrelations, g: &G1ppParams, pay: f64, reset: f64, t: f64) -> f64 {
    if t >= pay {
        return 0.0;
    }
    g.sigma_r(t) * g.b_unchecked(t, pay) * rc.weighted_loading(p, reset - t)
}

/// `ν̄_i(t) = σ^r_t (b(t,T̃_i) - b(t,T_p)) Σ_α ρ_α λ_i^α(t)`.
pub fn nu_bar(
    p: &FactorParams,
    rc: &RateCorrelations,
    g: &G1ppParams,
    pay: f64,
    reset: f64,
    t_p: f64,
    t: f64,
) -> f64 {
    let b = |big_t: f64| if t >= big_t { 0.0 } else { g.b_unchecked(t, big_t) };
    g.sigma_r(t) * (b(pay) - b(t_p)) * rc.weighted_loading(p, reset - t)
}
