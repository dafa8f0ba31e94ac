//! Market correlations from historical forward CPI curves, PCA diagnostics
//! and least-squares fitting of the factor loadings.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factors::{inst_correlation, FactorParams};
use crate::market_data::HistoricalSeries;

/// Minimum number of daily changes for correlation estimates.
pub const MIN_CHANGES: usize = 60;

/// Lower bound kept on every `κ` during fitting.
pub const KAPPA_LOWER: f64 = 1e-8;

const PSD_TOL: f64 = 1e-8;

/// Symmetric correlation matrix on bucket maturities.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    tenors: Vec<f64>,
    values: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn new(tenors: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        let n = tenors.len();
        if n == 0 || values.nrows() != n || values.ncols() != n {
            return Err(Error::Invalid(format!("{n} tenors for a {}x{} matrix", values.nrows(), values.ncols())));
        }
        for j in 0..n {
            if (values[(j, j)] - 1.0).abs() > 1e-12 {
                return Err(Error::Invalid(format!("diagonal entry {j} is {}", values[(j, j)])));
            }
            for k in 0..n {
                let v = values[(j, k)];
                if !(v.abs() <= 1.0 + 1e-12) {
                    return Err(Error::InvalidCorrelation(v));
                }
                if (v - values[(k, j)]).abs() > 1e-12 {
                    return Err(Error::Invalid(format!("matrix not symmetric at ({j},{k})")));
                }
            }
        }
        let min_eig = values.clone().symmetric_eigenvalues().min();
        if min_eig < -PSD_TOL {
            return Err(Error::Invalid(format!("correlation matrix not positive semidefinite (eigenvalue {min_eig})")));
        }
        Ok(CorrelationMatrix { tenors, values })
    }

    /// Model correlations `ρ^M(0, T_j, T_k)`.
    pub fn from_model(p: &FactorParams, tenors: &[f64]) -> Self {
        let n = tenors.len();
        let values = DMatrix::from_fn(n, n, |j, k| if j == k { 1.0 } else { inst_correlation(p, tenors[j], tenors[k], 0.0) });
        CorrelationMatrix { tenors: tenors.to_vec(), values }
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[(j, k)]
    }

    pub fn len(&self) -> usize {
        self.tenors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tenors.is_empty()
    }
}

fn changes(h: &HistoricalSeries) -> Result<DMatrix<f64>> {
    let d = h.daily_changes();
    if d.len() < MIN_CHANGES {
        return Err(Error::InsufficientData(format!("{} daily changes, need at least {MIN_CHANGES}", d.len())));
    }
    let nb = h.buckets().len();
    Ok(DMatrix::from_fn(d.len(), nb, |r, c| d[r][c]))
}

fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &means;
    }
    c.transpose() * &c / (n as f64 - 1.0)
}

/// Pearson correlations of daily changes.
pub fn market_correlations(h: &HistoricalSeries) -> Result<CorrelationMatrix> {
    let cov = covariance(&changes(h)?);
    let n = cov.nrows();
    if let Some(j) = (0..n).find(|&j| !(cov[(j, j)] > 0.0)) {
        return Err(Error::InsufficientData(format!("bucket {} has no variation", h.buckets()[j])));
    }
    let sd: Vec<f64> = (0..n).map(|j| cov[(j, j)].sqrt()).collect();
    let values = DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            1.0
        } else {
            (cov[(j, k)] / (sd[j] * sd[k])).clamp(-1.0, 1.0)
        }
    });
    CorrelationMatrix::new(h.buckets().to_vec(), values)
}

/// Principal components of the covariance of daily changes.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// Descending, non-negative.
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to eigenvalue `k`; its largest-magnitude entry is positive.
    pub eigenvectors: DMatrix<f64>,
    /// Cumulative explained-variance fractions.
    pub explained: Vec<f64>,
}

pub fn pca(h: &HistoricalSeries) -> Result<PcaResult> {
    let cov = covariance(&changes(h)?);
    if !(cov.trace() > 0.0) {
        return Err(Error::InsufficientData("daily changes have no variation".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if lead < 0.0 {
            v = -v;
        }
        vecs.set_column(c, &v);
    }
    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    let mut explained: Vec<f64> = eigenvalues
        .iter()
        .map(|e| {
            acc += e;
            acc / total
        })
        .collect();
    if let Some(last) = explained.last_mut() {
        *last = 1.0;
    }
    Ok(PcaResult { eigenvalues, eigenvectors: vecs, explained })
}

/// `J = Σ_{j≤k} [ρ^M(0,T_j,T_k) - ρ_market(T_j,T_k)]²`.
pub fn objective(p: &FactorParams, target: &CorrelationMatrix) -> f64 {
    let t = target.tenors();
    let mut j_sum = 0.0;
    for j in 0..t.len() {
        for k in j + 1..t.len() {
            let d = inst_correlation(p, t[j], t[k], 0.0) - target.get(j, k);
            j_sum += d * d;
        }
    }
    j_sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub threads: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { starts: 8, seed: 7, max_iter: 500, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: FactorParams,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value reached from each start, in start order.
    pub start_objectives: Vec<f64>,
}

impl FitResult {
    /// Set when the best run stopped at the iteration cap.
    pub fn warning(&self) -> bool {
        !self.converged
    }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

/// Fits `M ∈ {2, 3}` loadings to `target` from `cfg.starts` random starts.
pub fn fit_factor_params(target: &CorrelationMatrix, m: usize, cfg: &FitConfig) -> Result<FitResult> {
    if !(2..=3).contains(&m) {
        return Err(Error::OutOfRange { what: "fitted factor count M", value: m as f64, lo: 2.0, hi: 3.0 });
    }
    if target.len() < 2 {
        return Err(Error::InsufficientData("need at least two tenors to fit correlations".into()));
    }
    if cfg.starts == 0 || cfg.max_iter == 0 {
        return Err(Error::Invalid("need at least one start and one iteration".into()));
    }
    let n_h = if m == 2 { 2 } else { 4 };
    let dim = if m == 2 { 3 } else { 6 };
    let lower: Vec<f64> = (0..dim).map(|k| if k < n_h { f64::NEG_INFINITY } else { KAPPA_LOWER }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.starts)
        .map(|_| {
            (0..dim)
                .map(|k| if k < n_h { rng.random_range(-5.0..5.0) } else { rng.random_range(0.01..0.5) })
                .collect()
        })
        .collect();
    let f = |x: &[f64]| objective(&FactorParams::from_vec_unchecked(m, x), target);
    let solve = || -> Vec<Run> { starts.par_iter().map(|x0| minimize(&f, x0, &lower, cfg.max_iter)).collect() };
    let runs = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?
            .install(solve),
        None => solve(),
    };
    let start_objectives = runs.iter().map(|r| r.f).collect();
    let best = runs
        .into_iter()
        .filter(|r| r.f.is_finite())
        .min_by(|a, b| a.f.total_cmp(&b.f).then_with(|| cmp_lex(&a.x, &b.x)))
        .ok_or_else(|| Error::Numerical("every correlation fit diverged".into()))?;
    let params = FactorParams::from_lists(m, &best.x[..n_h], &best.x[n_h..])?;
    if !best.converged {
        log::warn!("correlation fit stopped after {} iterations without converging", best.iterations);
    }
    Ok(FitResult {
        objective: objective(&params, target),
        params,
        iterations: best.iterations,
        converged: best.converged,
        start_objectives,
    })
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

const FD_STEP: f64 = 1e-6;
const F_TOL: f64 = 1e-12;
const G_TOL: f64 = 1e-8;

fn project(x: &mut [f64], lower: &[f64]) {
    for (v, lo) in x.iter_mut().zip(lower) {
        *v = v.max(*lo);
    }
}

/// Central differences; one-sided where the lower bound blocks the step.
fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], lower: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for k in 0..x.len() {
        let up = x[k] + FD_STEP;
        let dn = x[k] - FD_STEP;
        p[k] = up;
        let fu = f(&p);
        if dn >= lower[k] {
            p[k] = dn;
            g[k] = (fu - f(&p)) / (2.0 * FD_STEP);
        } else {
            p[k] = x[k];
            g[k] = (fu - f(&p)) / FD_STEP;
        }
        p[k] = x[k];
    }
    g
}

/// Projected BFGS with Armijo backtracking on a box `x ≥ lower`.
fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], lower: &[f64], max_iter: usize) -> Run {
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower);
    let mut fx = f(&x);
    let mut g = gradient(f, &x, lower);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    for it in 0..max_iter {
        let free: Vec<bool> = (0..n).map(|k| !(x[k] <= lower[k] && g[k] > 0.0)).collect();
        let pg = (0..n).filter(|&k| free[k]).map(|k| g[k].abs()).fold(0.0, f64::max);
        if pg < G_TOL {
            return Run { x, f: fx, iterations: it, converged: true };
        }
        let mut d = vec![0.0; n];
        for r in (0..n).filter(|&r| free[r]) {
            d[r] = -(0..n).filter(|&c| free[c]).map(|c| hinv[(r, c)] * g[c]).sum::<f64>();
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv.fill_with_identity();
            for k in 0..n {
                d[k] = if free[k] { -g[k] } else { 0.0 };
            }
            slope = -d.iter().map(|v| v * v).sum::<f64>();
        }
        let _ = slope;
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn, lower);
            let fnew = f(&xn);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gk, (a, b))| gk * (a - b)).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            return Run { x, f: fx, iterations: it, converged: true };
        };
        let gn = gradient(f, &xn, lower);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        if sy > 1e-12 * (ss * yy).sqrt() {
            let sv = nalgebra::DVector::from_vec(s);
            let yv = nalgebra::DVector::from_vec(y);
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - rho * &sv * yv.transpose();
            let b = &i - rho * &yv * sv.transpose();
            hinv = &a * &hinv * &b + rho * &sv * sv.transpose();
        }
        let df = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if df.abs() < F_TOL {
            return Run { x, f: fx, iterations: it + 1, converged: true };
        }
    }
    Run { x, f: fx, iterations: max_iter, converged: false }
}

/// Settings of [`synthetic_history`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHistory {
    pub params: FactorParams,
    /// Bucket maturities.
    pub tenors: Vec<f64>,
    pub start: NaiveDate,
    /// Number of daily changes.
    pub days: usize,
    /// Scale of the daily factor shocks.
    pub daily_vol: f64,
    /// Idiosyncratic noise per bucket relative to its factor volatility.
    pub noise: f64,
    pub seed: u64,
}

/// Business-day curves of `log F_k` driven by the model loadings at `t = 0`.
///
/// The factor shocks are centred and orthonormalized, so without noise the
/// sample correlations of the daily changes equal the model correlations
/// up to rounding.
pub fn synthetic_history(spec: &SyntheticHistory) -> Result<HistoricalSeries> {
    let m = spec.params.factor_count();
    let n = spec.days;
    if n <= m + 1 {
        return Err(Error::InsufficientData(format!("need more than {} days, got {n}", m + 1)));
    }
    if !(spec.daily_vol > 0.0) || !(spec.noise >= 0.0) {
        return Err(Error::Invalid("daily_vol must be positive and noise non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut z = DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let means = z.row_mean();
    for mut row in z.row_iter_mut() {
        row -= &means;
    }
    let q = z.qr().q() * (n as f64 - 1.0).sqrt();

    let nb = spec.tenors.len();
    let lam: Vec<[f64; 3]> = spec
        .tenors
        .iter()
        .map(|&t| {
            let mut l = [0.0; 3];
            spec.params.loadings_tau(t, &mut l);
            l
        })
        .collect();
    let mut level: Vec<f64> = spec.tenors.iter().map(|t| 100f64.ln() + 0.02 * t).collect();
    let mut rows = vec![level.clone()];
    for r in 0..n {
        for k in 0..nb {
            let f: f64 = (0..m).map(|a| lam[k][a] * q[(r, a)]).sum();
            let size: f64 = lam[k][..m].iter().map(|x| x * x).sum::<f64>().sqrt();
            let e: f64 = if spec.noise > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            level[k] += spec.daily_vol * (f + spec.noise * size * e);
        }
        rows.push(level.clone());
    }
    let mut dates = Vec::with_capacity(n + 1);
    let mut d = spec.start;
    while dates.len() <= n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().ok_or_else(|| Error::Invalid("date overflow".into()))?;
    }
    HistoricalSeries::new(dates, spec.tenors.clone(), rows)
}
