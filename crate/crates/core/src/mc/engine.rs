use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::correlation::{build_correlation, FactorCholesky};
use crate::error::{Error, Result};
use crate::factors::{nu, FactorParams, RateCorrelations, SigmaVector};
use crate::g1pp::{BondCoefficients, G1ppModel};
use crate::market_data::CpiVolSurface;

/// Runs fail when more than this fraction of paths turns non-finite.
pub const MAX_INVALID_FRACTION: f64 = 1e-3;

/// Tolerance used when matching times against the simulation grid.
const TIME_EPS: f64 = 1e-9;

/// State-dependent volatility multiplier `L_i(F, t)` of the forward CPI
/// dynamics `dF_i/F_i = ν_i L_i dt + L_i Σ_α λ_i^α dW^α`.
pub trait DiffusionCoefficient: Sync {
    fn coefficient(&self, i: usize, forward: f64, t: f64) -> f64;
}

/// `L_i ≡ σ_i`.
#[derive(Debug, Clone)]
pub struct ConstantSigma(pub SigmaVector);

impl DiffusionCoefficient for ConstantSigma {
    fn coefficient(&self, i: usize, _forward: f64, _t: f64) -> f64 {
        self.0 .0[i]
    }
}

/// Frozen forwards.
#[derive(Debug, Clone, Copy)]
pub struct ZeroDiffusion;

impl DiffusionCoefficient for ZeroDiffusion {
    fn coefficient(&self, _i: usize, _forward: f64, _t: f64) -> f64 {
        0.0
    }
}

/// One forward CPI: reset `T_i`, payment `T̃_i`, initial level `F_i(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Underlier {
    pub reset: f64,
    pub pay: f64,
    pub forward: f64,
}

impl Underlier {
    pub fn from_surface(surface: &CpiVolSurface) -> Vec<Underlier> {
        surface
            .tenors()
            .iter()
            .map(|t| Underlier { reset: t.reset, pay: t.pay, forward: t.forward })
            .collect()
    }
}

/// Everything the engine needs about the model apart from the diffusion
/// coefficient.
#[derive(Debug, Clone, Copy)]
pub struct ModelSpec<'a> {
    pub rates: &'a G1ppModel,
    pub factors: &'a FactorParams,
    pub rate_corr: &'a RateCorrelations,
    pub underliers: &'a [Underlier],
}

impl ModelSpec<'_> {
    pub fn underlier_index(&self, reset: f64) -> Result<usize> {
        self.underliers
            .iter()
            .position(|u| (u.reset - reset).abs() < TIME_EPS)
            .ok_or_else(|| Error::Invalid(format!("no underlier resets at T={reset}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Slice times, strictly increasing and positive.
    pub grid: Vec<f64>,
    /// Equal substeps per slice.
    pub substeps: usize,
    pub antithetic: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, grid: Vec<f64>) -> Result<Self> {
        let cfg = McConfig { n_paths, seed, grid, substeps: 3, antithetic: false, threads: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::Invalid(format!("need at least 2 paths, got {}", self.n_paths)));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Invalid("antithetic sampling needs an even path count".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Invalid("substeps must be at least 1".into()));
        }
        if self.grid.is_empty() || self.grid[0] <= 0.0 {
            return Err(Error::Invalid("simulation grid must start after 0".into()));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("simulation grid must be strictly increasing".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Invalid("thread count must be positive".into()));
        }
        Ok(())
    }

    pub fn on_grid(&self, t: f64) -> bool {
        self.grid.iter().any(|g| (g - t).abs() < TIME_EPS)
    }

    pub fn unit_size(&self) -> usize {
        if self.antithetic {
            2
        } else {
            1
        }
    }
}

/// Uniform points `dt, 2dt, ...` up to `horizon`, merged with `extra`.
pub fn slice_grid(horizon: f64, dt: f64, extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = (1..)
        .map(|k| k as f64 * dt)
        .take_while(|t| *t <= horizon + TIME_EPS)
        .collect();
    g.extend(extra.iter().copied().filter(|t| *t > 0.0 && *t <= horizon + TIME_EPS));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < TIME_EPS);
    g
}

/// Request to record `D(time)·P(time, pay; x_time)` on every path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub pay: f64,
}

/// Deterministic per-substep coefficients shared by all paths.
struct Step {
    t0: f64,
    dt: f64,
    decay: f64,
    sd: f64,
    phi_int: f64,
    /// Per underlier: `(active, ν, λ¹..λ³, ζ)`.
    tenors: Vec<(bool, f64, [f64; 3], f64)>,
    /// Observations that fall on the end of this substep.
    obs: Vec<usize>,
}

/// A set of simulated paths that can be advanced slice by slice.
pub struct Simulation<'a> {
    spec: ModelSpec<'a>,
    cfg: McConfig,
    chol: FactorCholesky,
    pool: Option<rayon::ThreadPool>,
    t: f64,
    n_under: usize,
    rngs: Vec<ChaCha8Rng>,
    x: Vec<f64>,
    logd: Vec<f64>,
    logf: Vec<f64>,
    valid: Vec<bool>,
    obs: Vec<Observation>,
    obs_coeffs: Vec<BondCoefficients>,
    recorded: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(spec: ModelSpec<'a>, cfg: McConfig, obs: Vec<Observation>) -> Result<Self> {
        cfg.validate()?;
        if spec.rate_corr.len() != spec.factors.factor_count() {
            return Err(Error::Invalid(format!(
                "{} rate correlations for {} factors",
                spec.rate_corr.len(),
                spec.factors.factor_count()
            )));
        }
        if spec.underliers.is_empty() {
            return Err(Error::Invalid("simulation needs at least one underlier".into()));
        }
        let chol = build_correlation(spec.rate_corr)?;
        let obs_coeffs = obs
            .iter()
            .map(|o| spec.rates.bond_coefficients(o.time, o.pay))
            .collect::<Result<Vec<_>>>()?;
        let pool = match cfg.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?,
            ),
            None => None,
        };
        let n = cfg.n_paths;
        let n_under = spec.underliers.len();
        let units = n / cfg.unit_size();
        let rngs = (0..units)
            .map(|u| {
                let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
                r.set_stream(u as u64);
                r
            })
            .collect();
        let mut logf = Vec::with_capacity(n * n_under);
        for _ in 0..n {
            logf.extend(spec.underliers.iter().map(|u| u.forward.ln()));
        }
        let slots = obs.len().max(1);
        Ok(Simulation {
            spec,
            cfg,
            chol,
            pool,
            t: 0.0,
            n_under,
            rngs,
            x: vec![0.0; n],
            logd: vec![0.0; n],
            logf,
            valid: vec![true; n],
            obs,
            obs_coeffs,
            recorded: vec![f64::NAN; n * slots],
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn config(&self) -> &McConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &ModelSpec<'a> {
        &self.spec
    }

    pub fn n_paths(&self) -> usize {
        self.cfg.n_paths
    }

    pub fn x(&self, p: usize) -> f64 {
        self.x[p]
    }

    pub fn log_discount(&self, p: usize) -> f64 {
        self.logd[p]
    }

    pub fn discount(&self, p: usize) -> f64 {
        self.logd[p].exp()
    }

    pub fn forward(&self, p: usize, i: usize) -> f64 {
        self.logf[p * self.n_under + i].exp()
    }

    pub fn is_valid(&self, p: usize) -> bool {
        self.valid[p]
    }

    pub fn valid_flags(&self) -> &[bool] {
        &self.valid
    }

    /// `r_t = x_t + φ_t` at the current time.
    pub fn short_rate(&self, p: usize) -> f64 {
        self.x[p] + self.spec.rates.shift.at(self.t)
    }

    /// Recorded `D(T_obs)·P(T_obs, T_pay)` for observation `k`.
    pub fn recorded(&self, p: usize, k: usize) -> f64 {
        self.recorded[p * self.obs.len().max(1) + k]
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    /// Fails when the invalid-path fraction exceeds [`MAX_INVALID_FRACTION`].
    pub fn check_valid(&self) -> Result<usize> {
        let bad = self.invalid_count();
        if bad as f64 > MAX_INVALID_FRACTION * self.cfg.n_paths as f64 {
            return Err(Error::Numerical(format!(
                "{bad} of {} paths became non-finite",
                self.cfg.n_paths
            )));
        }
        if bad > 0 {
            log::warn!("{bad} invalid paths excluded");
        }
        Ok(bad)
    }

    fn build_steps(&self, t_next: f64) -> Vec<Step> {
        let spec = &self.spec;
        let g = &spec.rates.params;
        let ns = self.cfg.substeps;
        let h = (t_next - self.t) / ns as f64;
        (0..ns)
            .map(|s| {
                let t0 = self.t + s as f64 * h;
                let t1 = if s + 1 == ns { t_next } else { self.t + (s + 1) as f64 * h };
                let (decay, var) = g.ou_transition(t0, t1);
                let tenors = spec
                    .underliers
                    .iter()
                    .map(|u| {
                        let active = t0 < u.reset - TIME_EPS;
                        let mut lam = [0.0; 3];
                        spec.factors.loadings_tau(u.reset - t0, &mut lam);
                        let zeta = spec.factors.zeta_tau(u.reset - t0);
                        let v = nu(spec.factors, spec.rate_corr, g, u.pay, u.reset, t0);
                        (active, v, lam, zeta)
                    })
                    .collect();
                let obs = self
                    .obs
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| (o.time - t1).abs() < TIME_EPS)
                    .map(|(k, _)| k)
                    .collect();
                Step {
                    t0,
                    dt: t1 - t0,
                    decay,
                    sd: var.sqrt(),
                    phi_int: spec.rates.shift.integral(t0, t1),
                    tenors,
                    obs,
                }
            })
            .collect()
    }

    /// Advances every path from the current time to `t_next`.
    pub fn advance(&mut self, t_next: f64, coeff: &dyn DiffusionCoefficient) -> Result<()> {
        if !(t_next > self.t) {
            return Err(Error::Invalid(format!("cannot advance from {} to {t_next}", self.t)));
        }
        if let Some(u) = self
            .spec
            .underliers
            .iter()
            .find(|u| u.reset > self.t + TIME_EPS && u.reset < t_next - TIME_EPS)
        {
            return Err(Error::Invalid(format!(
                "reset T={} falls inside the step ({}, {t_next}); add it to the grid",
                u.reset, self.t
            )));
        }
        let steps = self.build_steps(t_next);
        let k = self.cfg.unit_size();
        let ni = self.n_under;
        let no = self.obs.len().max(1);
        let m = self.spec.factors.factor_count();
        let Simulation { chol, obs_coeffs, rngs, x, logd, logf, valid, recorded, pool, .. } = self;
        let (chol, obs_coeffs) = (&*chol, &*obs_coeffs);
        let body = |(((((rng, x), ld), lf), valid), rec): (
            ((((&mut ChaCha8Rng, &mut [f64]), &mut [f64]), &mut [f64]), &mut [bool]),
            &mut [f64],
        )| {
            let mut z = [0.0; 4];
            let mut w = [0.0; 4];
            for st in &steps {
                for zi in z.iter_mut().take(m + 1) {
                    *zi = rng.sample(StandardNormal);
                }
                let sq = st.dt.sqrt();
                chol.apply(&z[..m + 1], &mut w[..m + 1]);
                for p in 0..k {
                    if !valid[p] {
                        continue;
                    }
                    let sign = if p == 1 { -1.0 } else { 1.0 };
                    let x0 = x[p];
                    let x1 = st.decay * x0 + sign * st.sd * w[0];
                    x[p] = x1;
                    ld[p] -= 0.5 * (x0 + x1) * st.dt + st.phi_int;
                    let mut ok = x1.is_finite() && ld[p].is_finite();
                    for (i, &(active, v, lam, zeta)) in st.tenors.iter().enumerate() {
                        if !active {
                            continue;
                        }
                        let lfi = &mut lf[p * ni + i];
                        let l = coeff.coefficient(i, lfi.exp(), st.t0);
                        let shock: f64 = (0..m).map(|a| lam[a] * w[a + 1]).sum();
                        *lfi += (v * l - 0.5 * l * l * zeta) * st.dt + sign * l * sq * shock;
                        ok &= lfi.is_finite();
                    }
                    if !ok {
                        valid[p] = false;
                        continue;
                    }
                    for &o in &st.obs {
                        rec[p * no + o] = ld[p].exp() * obs_coeffs[o].price(x1);
                    }
                }
            }
        };
        let mut run = || {
            rngs.par_iter_mut()
                .zip(x.par_chunks_mut(k))
                .zip(logd.par_chunks_mut(k))
                .zip(logf.par_chunks_mut(k * ni))
                .zip(valid.par_chunks_mut(k))
                .zip(recorded.par_chunks_mut(k * no))
                .for_each(body);
        };
        match pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
        self.t = t_next;
        Ok(())
    }

    /// Advances through every remaining grid point up to `horizon`.
    pub fn run_to(&mut self, horizon: f64, coeff: &dyn DiffusionCoefficient) -> Result<()> {
        let pts: Vec<f64> = self
            .cfg
            .grid
            .iter()
            .copied()
            .filter(|&g| g > self.t + TIME_EPS && g <= horizon + TIME_EPS)
            .collect();
        for g in pts {
            self.advance(g, coeff)?;
        }
        Ok(())
    }
}
