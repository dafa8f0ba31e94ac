use crate::error::{Error, Result};

use super::smile::SmileSpline;

/// One forward CPI underlier: reset `T_i`, payment `T̃_i`, forward `F_i(0)` and its smile.
#[derive(Debug, Clone, PartialEq)]
pub struct CpiTenor {
    pub reset: f64,
    pub pay: f64,
    pub forward: f64,
    /// Annualized contract strikes `K̄` of the quotes.
    pub kbars: Vec<f64>,
    /// Lognormal vols per quote.
    pub vols: Vec<f64>,
    spline: SmileSpline,
}

impl CpiTenor {
    pub fn new(reset: f64, pay: f64, forward: f64, kbars: Vec<f64>, vols: Vec<f64>) -> Result<Self> {
        if !(reset > 0.0) || pay < reset {
            return Err(Error::Invalid(format!("tenor needs 0 < T_i <= T~_i (got {reset}, {pay})")));
        }
        if !(forward > 0.0) {
            return Err(Error::Invalid(format!("forward CPI must be positive at T_i={reset}")));
        }
        if kbars.is_empty() {
            return Err(Error::Invalid(format!("empty smile at T_i={reset}")));
        }
        if let Some(v) = vols.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Invalid(format!("non-positive vol {v} at T_i={reset}")));
        }
        if kbars.iter().any(|k| !(*k > -1.0)) {
            return Err(Error::Invalid(format!("strike Kbar must exceed -1 at T_i={reset}")));
        }
        let strikes: Vec<f64> = kbars.iter().map(|k| forward * (1.0 + k).powf(reset)).collect();
        let spline = SmileSpline::new(strikes, vols.clone())
            .map_err(|e| Error::Invalid(format!("T_i={reset}: {e}")))?;
        Ok(CpiTenor { reset, pay, forward, kbars, vols, spline })
    }

    /// Contract strike level `K = F_i(0) (1 + K̄)^{T_i}`.
    pub fn strike(&self, kbar: f64) -> f64 {
        self.forward * (1.0 + kbar).powf(self.reset)
    }

    /// Log-moneyness `y = ln(K / F_i(0)) = T_i ln(1 + K̄)`.
    pub fn log_moneyness(&self, kbar: f64) -> f64 {
        self.reset * kbar.ln_1p()
    }

    pub fn strikes(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn vol(&self, strike: f64) -> f64 {
        self.spline.value(strike)
    }

    /// `(Σ, ∂Σ/∂K, ∂²Σ/∂K²)`.
    pub fn vol_derivs(&self, strike: f64) -> (f64, f64, f64) {
        self.spline.eval(strike)
    }
}

/// Per-tenor forward CPIs with their implied-vol smiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CpiVolSurface {
    tenors: Vec<CpiTenor>,
}

impl CpiVolSurface {
    pub fn new(tenors: Vec<CpiTenor>) -> Result<Self> {
        if tenors.is_empty() {
            return Err(Error::Invalid("vol surface has no tenors".into()));
        }
        if tenors.windows(2).any(|w| w[1].reset <= w[0].reset) {
            return Err(Error::Invalid("tenor reset times must be strictly increasing".into()));
        }
        Ok(CpiVolSurface { tenors })
    }

    /// Every tenor quoted at one flat vol on the given `K̄` grid.
    pub fn flat(resets: &[f64], forwards: &[f64], vol: f64, kbars: &[f64]) -> Result<Self> {
        let tenors = resets
            .iter()
            .zip(forwards)
            .map(|(&t, &f)| CpiTenor::new(t, t, f, kbars.to_vec(), vec![vol; kbars.len()]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tenors)
    }

    pub fn tenors(&self) -> &[CpiTenor] {
        &self.tenors
    }

    pub fn len(&self) -> usize {
        self.tenors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tenors.is_empty()
    }

    pub fn tenor(&self, i: usize) -> Result<&CpiTenor> {
        self.tenors.get(i).ok_or(Error::UnknownTenor(i))
    }

    /// Position of the tenor whose reset equals `reset`.
    pub fn index_of(&self, reset: f64) -> Result<usize> {
        self.tenors
            .iter()
            .position(|t| (t.reset - reset).abs() < 1e-12)
            .ok_or_else(|| Error::Invalid(format!("no tenor with reset {reset}")))
    }

    pub fn vol_at(&self, i: usize, strike: f64) -> Result<f64> {
        Ok(self.tenor(i)?.vol(strike))
    }

    /// Copy with every quote multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let tenors = self
            .tenors
            .iter()
            .map(|t| {
                CpiTenor::new(
                    t.reset,
                    t.pay,
                    t.forward,
                    t.kbars.clone(),
                    t.vols.iter().map(|v| v * factor).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tenors)
    }

    pub fn total_variance(&self) -> TotalVarianceSurface<'_> {
        TotalVarianceSurface { vols: self }
    }
}

/// Total implied variance and the partials the Dupire equations need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TivPoint {
    pub w: f64,
    pub dw_dt: f64,
    pub dw_dy: f64,
    pub d2w_dy2: f64,
}

/// `w_i(y, T) = Σ_i(F_i(0) e^y)² T` for `0 < T <= T_i`.
#[derive(Debug, Clone, Copy)]
pub struct TotalVarianceSurface<'a> {
    vols: &'a CpiVolSurface,
}

impl TotalVarianceSurface<'_> {
    pub fn forward(&self, i: usize) -> Result<f64> {
        Ok(self.vols.tenor(i)?.forward)
    }

    pub fn reset(&self, i: usize) -> Result<f64> {
        Ok(self.vols.tenor(i)?.reset)
    }

    pub fn eval(&self, i: usize, y: f64, t: f64) -> Result<TivPoint> {
        let tenor = self.vols.tenor(i)?;
        if !(t > 0.0) || t > tenor.reset * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { what: "variance time", value: t, lo: 0.0, hi: tenor.reset });
        }
        let k = tenor.forward * y.exp();
        let (s, s_k, s_kk) = tenor.vol_derivs(k);
        // chain rule through K = F e^y
        let s_y = s_k * k;
        let s_yy = s_kk * k * k + s_k * k;
        Ok(TivPoint {
            w: s * s * t,
            dw_dt: s * s,
            dw_dy: 2.0 * s * s_y * t,
            d2w_dy2: 2.0 * (s_y * s_y + s * s_yy) * t,
        })
    }
}
