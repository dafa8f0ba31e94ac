//! Run configuration read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. A minimal config names the three market files:
//!
//! ```toml
//! [data]
//! discounts = "discounts.csv"
//! cpi_vols = "cpi_vols.csv"
//! g1pp = "g1pp.csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corr_calib::FitConfig;
use crate::error::{Error, Result};
use crate::factors::{FactorParams, RateCorrelations};
use crate::g1pp::{G1ppModel, G1ppParams};
use crate::leverage::{LeverageConfig, ThetaReference};
use crate::market_data::{io, CpiVolSurface, DiscountCurve, HistoricalSeries};
use crate::simplified::DEFAULT_ETA;

/// Which diffusion coefficient drives the forward CPIs in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Constant,
    #[default]
    Leveraged,
    Simplified,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Constant => "constant",
            ModelKind::Leveraged => "leveraged",
            ModelKind::Simplified => "simplified",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ModelKind::Constant),
            "leveraged" => Ok(ModelKind::Leveraged),
            "simplified" => Ok(ModelKind::Simplified),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub discounts: PathBuf,
    pub cpi_vols: PathBuf,
    pub g1pp: PathBuf,
    pub history: Option<PathBuf>,
    /// A factors file; takes precedence over an inline `[factors]` table.
    pub factors: Option<PathBuf>,
    /// A calibrated leverage surface to reuse instead of calibrating.
    pub leverage: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesConfig {
    pub mean_reversion: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        RatesConfig { mean_reversion: 0.02 }
    }
}

/// Summary of the correlation fit stored alongside fitted loadings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tenors: Vec<f64>,
}

/// Factor loadings and rate correlations, as written to `factors.json` or
/// inlined in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorBlock {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub kappa: Vec<f64>,
    #[serde(rename = "rho_rF", default, skip_serializing_if = "Option::is_none")]
    pub rho_rf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
}

impl FactorBlock {
    pub fn from_params(p: &FactorParams, rho_rf: Option<Vec<f64>>) -> Self {
        FactorBlock { m: p.factor_count(), h: p.h(), kappa: p.kappa(), rho_rf, fit: None }
    }

    pub fn params(&self) -> Result<FactorParams> {
        FactorParams::from_lists(self.m, &self.h, &self.kappa)
    }

    /// Rate correlations; one value is broadcast to every factor and a
    /// missing list means uncorrelated.
    pub fn rate_correlations(&self) -> Result<RateCorrelations> {
        match self.rho_rf.as_deref() {
            None => Ok(RateCorrelations::zero(self.m)),
            Some([r]) => RateCorrelations::uniform(self.m, *r),
            Some(list) if list.len() == self.m => RateCorrelations::new(list.to_vec()),
            Some(list) => Err(Error::Config(format!("rho_rF has {} values for M={}", list.len(), self.m))),
        }
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("factor block serializes");
        s.push('\n');
        s
    }
}

impl Default for FactorBlock {
    fn default() -> Self {
        FactorBlock::from_params(&FactorParams::usd_three(), Some(vec![-0.5]))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Cap of the simplified model.
    pub eta: f64,
    /// Moneyness at which `σ_i` is calibrated for the constant model and
    /// closed forms.
    pub sigma_kbar: f64,
    pub theta_reference: ThetaReference,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::default(),
            eta: DEFAULT_ETA,
            sigma_kbar: 0.0,
            theta_reference: ThetaReference::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
    pub slice_dt: f64,
    pub substeps: usize,
    pub antithetic: bool,
    pub threads: Option<usize>,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { paths: 2000, seed: 1, slice_dt: 0.25, substeps: 3, antithetic: false, threads: None }
    }
}

/// Settings of the leverage calibration run; the time grid and substeps
/// are shared with `[mc]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeverageSettings {
    pub paths: usize,
    pub seed: u64,
}

impl Default for LeverageSettings {
    fn default() -> Self {
        let d = LeverageConfig::default();
        LeverageSettings { paths: d.n_paths, seed: d.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        let d = FitConfig::default();
        FitSettings { starts: d.starts, seed: d.seed, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub rates: RatesConfig,
    pub factors: Option<FactorBlock>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub leverage: LeverageSettings,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn require_file(what: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} file {} does not exist", p.display())))
    }
}

impl RunConfig {
    /// Parses a config, resolving relative paths against `base`. File
    /// existence is not checked.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = &mut cfg.data;
        for p in [&mut d.discounts, &mut d.cpi_vols, &mut d.g1pp] {
            resolve(base, p);
        }
        for p in [&mut d.history, &mut d.factors, &mut d.leverage].into_iter().flatten() {
            resolve(base, p);
        }
        resolve(base, &mut cfg.output.dir);
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks referenced files exist and the scalar settings are usable.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        require_file("discounts", &d.discounts)?;
        require_file("cpi_vols", &d.cpi_vols)?;
        require_file("g1pp", &d.g1pp)?;
        for (what, p) in [("history", &d.history), ("factors", &d.factors), ("leverage", &d.leverage)] {
            if let Some(p) = p {
                require_file(what, p)?;
            }
        }
        if let (Some(_), Some(f)) = (&self.factors, &d.factors) {
            log::warn!("both [factors] and data.factors are set; using {}", f.display());
        }
        let fb = self.factor_block()?;
        fb.params()?;
        fb.rate_correlations()?;
        if !(self.model.eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {}", self.model.eta)));
        }
        if !(self.model.sigma_kbar > -1.0) {
            return Err(Error::Config(format!("sigma_kbar must exceed -1, got {}", self.model.sigma_kbar)));
        }
        if !(self.mc.slice_dt > 0.0) {
            return Err(Error::Config(format!("slice_dt must be positive, got {}", self.mc.slice_dt)));
        }
        if self.mc.substeps == 0 || self.mc.paths < 2 || self.leverage.paths < 2 {
            return Err(Error::Config("need substeps >= 1 and at least 2 paths".into()));
        }
        Ok(())
    }

    /// The factor block from `data.factors`, the inline table, or the
    /// three-factor default in that order.
    pub fn factor_block(&self) -> Result<FactorBlock> {
        match (&self.data.factors, &self.factors) {
            (Some(p), _) => FactorBlock::read_json(p),
            (None, Some(b)) => Ok(b.clone()),
            (None, None) => Ok(FactorBlock::default()),
        }
    }

    pub fn leverage_config(&self) -> LeverageConfig {
        LeverageConfig {
            n_paths: self.leverage.paths,
            seed: self.leverage.seed,
            slice_dt: self.mc.slice_dt,
            substeps: self.mc.substeps,
            antithetic: self.mc.antithetic,
            threads: self.mc.threads,
            reference: self.model.theta_reference,
            ..LeverageConfig::default()
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { starts: self.fit.starts, seed: self.fit.seed, max_iter: self.fit.max_iter, threads: self.mc.threads }
    }

    /// Loads the market files and calibrates the short-rate model.
    pub fn load_inputs(&self) -> Result<Inputs> {
        let curve = io::read_discounts(&self.data.discounts)?;
        let surface = io::read_cpi_vols(&self.data.cpi_vols)?;
        let g = G1ppParams::read_csv(&self.data.g1pp, self.rates.mean_reversion)?;
        let rates = G1ppModel::calibrate(g, &curve)?;
        let fb = self.factor_block()?;
        Ok(Inputs { curve, surface, rates, factors: fb.params()?, rate_corr: fb.rate_correlations()? })
    }

    pub fn load_history(&self) -> Result<HistoricalSeries> {
        let p = self
            .data
            .history
            .as_ref()
            .ok_or_else(|| Error::Config("no history file configured".into()))?;
        let (h, report) = io::read_history(p)?;
        log::info!("history {}: {report:?}", p.display());
        Ok(h)
    }
}

/// Market data and calibrated model pieces shared by every run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub curve: DiscountCurve,
    pub surface: CpiVolSurface,
    pub rates: G1ppModel,
    pub factors: FactorParams,
    pub rate_corr: RateCorrelations,
}
