//! The `infl` command line.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or data error,
//! 3 when the correlation optimizer stopped without converging.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::analytic::{
    yoy_cap_floor, zc_cap_floor, zc_swap, OptionKind, PriceQuote, YoyInstrument, YoyModel, ZcInstrument,
};
use crate::config::{FactorBlock, FitSummary, Inputs, ModelKind, RunConfig};
use crate::corr_calib::{fit_factor_params, market_correlations, pca, CorrelationMatrix, FitConfig};
use crate::error::{Error, Result};
use crate::factors::{calibrate_sigmas, FactorParams};
use crate::leverage::{calibrate_all, LeverageCalibration, LeverageInputs};
use crate::market_data::io::read_history;
use crate::mc::{price_yoy_options_mc, price_zc_options_mc, McConfig, ModelSpec, Underlier};
use crate::workflows::{
    hit_rate, model_coefficient, pricing_config, recover_vols, recovery_rows, yoy_compare, CoefficientSettings,
    YoyCompareSetup, RECOVERY_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_OPTIMIZER: i32 = 3;

pub const PRICE_HEADER: [&str; 8] = ["kind", "Ti", "Tj", "Tp", "K", "value", "stderr", "method"];
pub const CORRELATION_HEADER: [&str; 4] = ["Tj", "Tk", "market", "model"];
pub const YOY_HEADER: [&str; 7] = ["K", "mc", "mc_stderr", "mc_lo", "mc_hi", "sigma_Kbar", "analytic"];

/// Strikes `K̄_Y` of the default YoY comparison and the `σ_i` moneynesses.
pub const YOY_STRIKES: [f64; 8] = [-0.02, -0.01, 0.0, 0.01, 0.02, 0.03, 0.04, 0.05];
pub const SIGMA_KBARS: [f64; 6] = [-0.02, -0.01, 0.0, 0.01, 0.02, 0.03];

#[derive(Debug, Parser)]
#[command(name = "infl", version, about = "Multi-factor forward CPI calibration and pricing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed of the Monte Carlo run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Spacing of the simulation slice grid in years.
    #[arg(long, global = true)]
    pub slice_dt: Option<f64>,
    /// Substeps per slice.
    #[arg(long, global = true)]
    pub substeps: Option<usize>,
    /// Antithetic path pairs.
    #[arg(long, global = true)]
    pub antithetic: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Analytic,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit factor loadings to historical correlations.
    CalibrateCorrelations {
        #[arg(long)]
        history: Option<PathBuf>,
        /// Number of factors to fit.
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        factors: Option<u8>,
    },
    /// Per-tenor volatility scales `σ_i` and their ratio to the one-factor values.
    CalibrateSigmas {
        #[arg(long, allow_negative_numbers = true)]
        kbar: Option<f64>,
    },
    /// Bootstrap the leverage surface.
    CalibrateLeverage,
    /// Price instruments from a JSON file.
    Price {
        #[arg(long)]
        instrument: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Analytic)]
        method: Method,
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// Market versus simulated implied vols on the quoted grid.
    RecoverVols {
        #[arg(long)]
        model: Option<ModelKind>,
    },
    /// Simulated versus closed-form year-on-year cap prices.
    YoyCompare {
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long, default_value_t = 1.0)]
        ti: f64,
        #[arg(long, default_value_t = 2.0)]
        tj: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        strikes: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        sigma_kbars: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1000.0)]
        notional: f64,
    },
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::PriceOutOfBand { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::CalibrateCorrelations { history, factors } => {
            calibrate_correlations(g, history.as_deref(), factors.map(usize::from))
        }
        Command::CalibrateSigmas { kbar } => calibrate_sigmas_cmd(g, *kbar),
        Command::CalibrateLeverage => calibrate_leverage(g),
        Command::Price { instrument, method, model } => price(g, instrument, *method, *model),
        Command::RecoverVols { model } => recover(g, *model),
        Command::YoyCompare { model, ti, tj, strikes, sigma_kbars, notional } => {
            let strikes = strikes.clone().unwrap_or_else(|| YOY_STRIKES.to_vec());
            let sk = sigma_kbars.clone().unwrap_or_else(|| SIGMA_KBARS.to_vec());
            yoy(g, *model, (*ti, *tj), &strikes, &sk, *notional)
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<RunConfig> {
    let path = g.config.clone().unwrap_or_else(|| PathBuf::from("config.toml"));
    let mut cfg = RunConfig::load(&path)?;
    let mc = &mut cfg.mc;
    if let Some(s) = g.seed {
        mc.seed = s;
    }
    if let Some(p) = g.paths {
        mc.paths = p;
    }
    if let Some(d) = g.slice_dt {
        mc.slice_dt = d;
    }
    if let Some(s) = g.substeps {
        mc.substeps = s;
    }
    if g.threads.is_some() {
        mc.threads = g.threads;
    }
    mc.antithetic |= g.antithetic;
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(g: &GlobalArgs, cfg: Option<&RunConfig>, default: &str) -> PathBuf {
    match (&g.out, cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.output.dir.join(default),
        (None, None) => PathBuf::from(default),
    }
}

/// `dir/stem<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn mc_config(cfg: &RunConfig, inp: &Inputs) -> Result<McConfig> {
    let resets: Vec<f64> = inp.surface.tenors().iter().map(|t| t.reset).collect();
    let mut mc = pricing_config(cfg.mc.paths, cfg.mc.seed, cfg.mc.slice_dt, &resets)?;
    mc.substeps = cfg.mc.substeps;
    mc.antithetic = cfg.mc.antithetic;
    mc.threads = cfg.mc.threads;
    mc.validate()?;
    Ok(mc)
}

fn coefficient_settings(cfg: &RunConfig, kind: ModelKind) -> CoefficientSettings<'_> {
    CoefficientSettings {
        kind,
        sigma_kbar: cfg.model.sigma_kbar,
        eta: cfg.model.eta,
        leverage_file: cfg.data.leverage.as_deref(),
        leverage: cfg.leverage_config(),
    }
}

/// Rows `Tj,Tk,market,model` over the upper triangle.
pub fn correlation_rows(market: &CorrelationMatrix, p: &FactorParams) -> Vec<Vec<f64>> {
    let model = CorrelationMatrix::from_model(p, market.tenors());
    let t = market.tenors();
    let mut rows = Vec::new();
    for j in 0..t.len() {
        for k in j..t.len() {
            rows.push(vec![t[j], t[k], market.get(j, k), model.get(j, k)]);
        }
    }
    rows
}

fn calibrate_correlations(g: &GlobalArgs, history: Option<&Path>, m: Option<usize>) -> Result<i32> {
    let cfg = match &g.config {
        Some(_) => Some(load_config(g)?),
        None => None,
    };
    let block = cfg.as_ref().map(RunConfig::factor_block).transpose()?;
    let h = match (history, &cfg) {
        (Some(p), _) => read_history(p)?.0,
        (None, Some(c)) => c.load_history()?,
        (None, None) => return Err(Error::Config("no history file given".into())),
    };
    let m = m.or(block.as_ref().map(|b| b.m)).unwrap_or(3);
    let fit_cfg = match &cfg {
        Some(c) => c.fit_config(),
        None => FitConfig { threads: g.threads, ..FitConfig::default() },
    };
    let target = market_correlations(&h)?;
    let pc = pca(&h)?;
    let fit = fit_factor_params(&target, m, &fit_cfg)?;

    let out = out_path(g, cfg.as_ref(), "factors.json");
    let mut fb = FactorBlock::from_params(&fit.params, block.and_then(|b| b.rho_rf));
    fb.fit = Some(FitSummary {
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        tenors: target.tenors().to_vec(),
    });
    write_file(&out, &fb.to_json())?;
    let rows: Vec<Vec<String>> = correlation_rows(&target, &fit.params)
        .iter()
        .map(|r| r.iter().map(f64::to_string).collect())
        .collect();
    write_file(&sibling(&out, "_correlations.csv"), &csv_text(&CORRELATION_HEADER, &rows))?;
    let pca_rows: Vec<Vec<String>> = pc
        .eigenvalues
        .iter()
        .zip(&pc.explained)
        .enumerate()
        .map(|(k, (e, x))| vec![(k + 1).to_string(), e.to_string(), x.to_string()])
        .collect();
    write_file(&sibling(&out, "_pca.csv"), &csv_text(&["component", "eigenvalue", "explained"], &pca_rows))?;

    println!("M={m} h={:?} kappa={:?}", fit.params.h(), fit.params.kappa());
    println!("J* = {:.6e} after {} iterations", fit.objective, fit.iterations);
    for (k, x) in pc.explained.iter().take(3).enumerate() {
        println!("first {} principal components explain {:.2}%", k + 1, 100.0 * x);
    }
    if fit.warning() {
        eprintln!("warning: optimizer stopped at the iteration cap without converging");
        return Ok(EXIT_OPTIMIZER);
    }
    Ok(EXIT_OK)
}

fn calibrate_sigmas_cmd(g: &GlobalArgs, kbar: Option<f64>) -> Result<i32> {
    let cfg = load_config(g)?;
    let inp = cfg.load_inputs()?;
    let kbar = kbar.unwrap_or(cfg.model.sigma_kbar);
    let s = calibrate_sigmas(&inp.factors, &inp.surface, kbar)?;
    let s1 = calibrate_sigmas(&FactorParams::One, &inp.surface, kbar)?;
    let rows: Vec<Vec<String>> = inp
        .surface
        .tenors()
        .iter()
        .zip(s.as_slice().iter().zip(s1.as_slice()))
        .map(|(t, (a, b))| vec![t.reset.to_string(), b.to_string(), a.to_string(), (a / b).to_string()])
        .collect();
    let text = csv_text(&["tenor", "market_vol", "sigma", "ratio"], &rows);
    write_file(&out_path(g, Some(&cfg), "sigmas.csv"), &text)?;
    print!("{text}");
    Ok(EXIT_OK)
}

/// Plain-text summary of the floors and fallbacks of a leverage run.
pub fn leverage_report(cal: &LeverageCalibration) -> String {
    let mut s = String::new();
    let sum = |f: fn(&crate::leverage::SliceStats) -> usize| cal.slices.iter().map(f).sum::<usize>();
    let _ = writeln!(s, "slices: {}", cal.slices.len());
    let _ = writeln!(s, "bracket floors: {}", sum(|x| x.bracket_floors));
    let _ = writeln!(s, "negative squares replaced: {}", sum(|x| x.negative_floors));
    let _ = writeln!(s, "theta fallbacks: {}", sum(|x| x.theta_fallbacks));
    let flagged: Vec<_> = cal.slices.iter().filter(|x| x.total() > 0).collect();
    if !flagged.is_empty() {
        let _ = writeln!(s, "\nt,bracket_floors,negative_floors,theta_fallbacks");
        for x in flagged {
            let _ = writeln!(s, "{},{},{},{}", x.t, x.bracket_floors, x.negative_floors, x.theta_fallbacks);
        }
    }
    s
}

fn calibrate_leverage(g: &GlobalArgs) -> Result<i32> {
    let mut cfg = load_config(g)?;
    if let Some(s) = g.seed {
        cfg.leverage.seed = s;
    }
    if let Some(p) = g.paths {
        cfg.leverage.paths = p;
    }
    let inp = cfg.load_inputs()?;
    let li = LeverageInputs { rates: &inp.rates, factors: &inp.factors, rate_corr: &inp.rate_corr, surface: &inp.surface };
    let cal = calibrate_all(&li, &cfg.leverage_config())?;
    let out = out_path(g, Some(&cfg), "leverage.csv");
    write_file(&out, &cal.surface.to_csv())?;
    let report = leverage_report(&cal);
    write_file(&sibling(&out, "_report.txt"), &report)?;
    print!("{report}");
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Product {
    Zc,
    Yoy,
}

/// One instrument of a `price` request.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentSpec {
    pub product: Product,
    pub kind: OptionKind,
    #[serde(default = "unit")]
    pub notional: f64,
    #[serde(rename = "Ti")]
    pub ti: f64,
    #[serde(rename = "Tj")]
    pub tj: Option<f64>,
    /// Payment date; defaults to the payment date of the last fixing's tenor.
    #[serde(rename = "Tp")]
    pub tp: Option<f64>,
    /// Annualized strike `K̄`.
    #[serde(rename = "K")]
    pub kbar: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(InstrumentSpec),
    Many(Vec<InstrumentSpec>),
}

pub fn read_instruments(path: &Path) -> Result<Vec<InstrumentSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))? {
        OneOrMany::One(i) => Ok(vec![i]),
        OneOrMany::Many(v) => Ok(v),
    }
}

enum Resolved {
    Zc(ZcInstrument, usize),
    Yoy(YoyInstrument),
}

fn resolve(spec: &InstrumentSpec, inp: &Inputs) -> Result<Resolved> {
    let s = &inp.surface;
    let i = s.index_of(spec.ti)?;
    match (spec.product, spec.tj) {
        (Product::Zc, None) => {
            let ten = s.tenor(i)?;
            let pay = spec.tp.unwrap_or(ten.pay);
            let inst = ZcInstrument::new(spec.kind, spec.notional, ten.strike(spec.kbar), ten.reset, pay)?;
            Ok(Resolved::Zc(inst, i))
        }
        (Product::Yoy, Some(tj)) => {
            let pay = spec.tp.unwrap_or(s.tenor(s.index_of(tj)?)?.pay);
            Ok(Resolved::Yoy(YoyInstrument::new(spec.kind, spec.notional, spec.kbar, spec.ti, tj, pay)?))
        }
        (Product::Zc, Some(_)) => Err(Error::Config("zero-coupon instruments take no Tj".into())),
        (Product::Yoy, None) => Err(Error::Config("year-on-year instruments need Tj".into())),
    }
}

/// Prices instruments analytically or by simulation with `kind`.
pub fn price_instruments(
    cfg: &RunConfig,
    inp: &Inputs,
    specs: &[InstrumentSpec],
    method: Method,
    kind: ModelKind,
) -> Result<Vec<PriceQuote>> {
    let resolved = specs.iter().map(|s| resolve(s, inp)).collect::<Result<Vec<_>>>()?;
    match method {
        Method::Analytic => {
            let sigmas = calibrate_sigmas(&inp.factors, &inp.surface, cfg.model.sigma_kbar)?;
            let m = YoyModel {
                factors: &inp.factors,
                sigmas: &sigmas,
                rate_corr: &inp.rate_corr,
                rates: &inp.rates.params,
                surface: &inp.surface,
            };
            resolved
                .iter()
                .map(|r| match r {
                    Resolved::Zc(z, i) => {
                        let ten = inp.surface.tenor(*i)?;
                        if z.kind == OptionKind::Swap {
                            zc_swap(z, &inp.curve, ten.forward)
                        } else {
                            let v = ten.vol(z.strike);
                            zc_cap_floor(z, &inp.curve, ten.forward, v * v * z.reset)
                        }
                    }
                    Resolved::Yoy(y) => yoy_cap_floor(y, &m, &inp.curve),
                })
                .collect()
        }
        Method::Mc => {
            let (coeff, _) = model_coefficient(inp, &coefficient_settings(cfg, kind))?;
            let mc = mc_config(cfg, inp)?;
            let u = Underlier::from_surface(&inp.surface);
            let spec = ModelSpec { rates: &inp.rates, factors: &inp.factors, rate_corr: &inp.rate_corr, underliers: &u };
            let zcs: Vec<ZcInstrument> =
                resolved.iter().filter_map(|r| if let Resolved::Zc(z, _) = r { Some(*z) } else { None }).collect();
            let yoys: Vec<YoyInstrument> =
                resolved.iter().filter_map(|r| if let Resolved::Yoy(y) = r { Some(*y) } else { None }).collect();
            let mut zq = if zcs.is_empty() { Vec::new() } else { price_zc_options_mc(spec, &mc, coeff.as_dyn(), &zcs)? }
                .into_iter();
            let mut yq = if yoys.is_empty() { Vec::new() } else { price_yoy_options_mc(spec, &mc, coeff.as_dyn(), &yoys)? }
                .into_iter();
            Ok(resolved
                .iter()
                .map(|r| match r {
                    Resolved::Zc(..) => zq.next().expect("one quote per instrument"),
                    Resolved::Yoy(_) => yq.next().expect("one quote per instrument"),
                })
                .collect())
        }
    }
}

fn price(g: &GlobalArgs, instrument: &Path, method: Method, model: Option<ModelKind>) -> Result<i32> {
    let cfg = load_config(g)?;
    let inp = cfg.load_inputs()?;
    let specs = read_instruments(instrument)?;
    let kind = model.unwrap_or(cfg.model.kind);
    let quotes = price_instruments(&cfg, &inp, &specs, method, kind)?;
    let label = match method {
        Method::Analytic => "analytic".to_string(),
        Method::Mc => format!("mc-{kind}"),
    };
    let rows: Vec<Vec<String>> = specs
        .iter()
        .zip(&quotes)
        .map(|(s, q)| {
            let r = resolve(s, &inp).expect("resolved above");
            let (tj, tp) = match r {
                Resolved::Zc(z, _) => (String::new(), z.pay),
                Resolved::Yoy(y) => (y.reset_j.to_string(), y.pay),
            };
            let kind = match s.product {
                Product::Zc => format!("zc_{}", s.kind.as_str()),
                Product::Yoy => format!("yoy_{}", s.kind.as_str()),
            };
            vec![kind, s.ti.to_string(), tj, tp.to_string(), s.kbar.to_string(), q.value.to_string(), q.stderr.to_string(), label.clone()]
        })
        .collect();
    let text = csv_text(&PRICE_HEADER, &rows);
    if let Some(out) = &g.out {
        write_file(out, &text)?;
    }
    print!("{text}");
    Ok(EXIT_OK)
}

fn recover(g: &GlobalArgs, model: Option<ModelKind>) -> Result<i32> {
    let cfg = load_config(g)?;
    let inp = cfg.load_inputs()?;
    let kind = model.unwrap_or(cfg.model.kind);
    let (coeff, _) = model_coefficient(&inp, &coefficient_settings(&cfg, kind))?;
    let mc = mc_config(&cfg, &inp)?;
    let u = Underlier::from_surface(&inp.surface);
    let spec = ModelSpec { rates: &inp.rates, factors: &inp.factors, rate_corr: &inp.rate_corr, underliers: &u };
    let kbars = inp.surface.tenor(0)?.kbars.clone();
    let rows = recover_vols(spec, &mc, coeff.as_dyn(), &inp.surface, &inp.curve, &kbars)?;
    let body: Vec<Vec<String>> =
        recovery_rows(&rows).iter().map(|r| r.iter().map(f64::to_string).collect()).collect();
    write_file(&out_path(g, Some(&cfg), &format!("recovery_{kind}.csv")), &csv_text(&RECOVERY_HEADER, &body))?;
    println!("{kind}: {:.1}% of {} market vols inside the 2 SE band", 100.0 * hit_rate(&rows), rows.len());
    Ok(EXIT_OK)
}

fn yoy(
    g: &GlobalArgs,
    model: Option<ModelKind>,
    (ti, tj): (f64, f64),
    strikes: &[f64],
    sigma_kbars: &[f64],
    notional: f64,
) -> Result<i32> {
    let cfg = load_config(g)?;
    let inp = cfg.load_inputs()?;
    let kind = model.unwrap_or(cfg.model.kind);
    let (coeff, _) = model_coefficient(&inp, &coefficient_settings(&cfg, kind))?;
    let mc = mc_config(&cfg, &inp)?;
    let setup = YoyCompareSetup {
        rates: &inp.rates,
        factors: &inp.factors,
        rate_corr: &inp.rate_corr,
        surface: &inp.surface,
        curve: &inp.curve,
        reset_i: ti,
        reset_j: tj,
        notional,
    };
    let cmp = yoy_compare(&setup, &mc, coeff.as_dyn(), strikes, sigma_kbars)?;
    let mut rows = Vec::new();
    for c in &cmp {
        let (v, se) = (c.mc.value, c.mc.stderr);
        for (kb, a) in &c.analytic {
            rows.push(
                [c.strike_kbar, v, se, v - 2.0 * se, v + 2.0 * se, *kb, *a].iter().map(f64::to_string).collect(),
            );
        }
    }
    write_file(&out_path(g, Some(&cfg), &format!("yoy_{kind}.csv")), &csv_text(&YOY_HEADER, &rows))?;
    println!("K,mc,stderr,analytic range");
    for c in &cmp {
        let lo = c.analytic.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
        let hi = c.analytic.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
        println!("{},{:.6},{:.6},[{:.6}, {:.6}]", c.strike_kbar, c.mc.value, c.mc.stderr, lo, hi);
    }
    Ok(EXIT_OK)
}

/// Entry point of the `infl` binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    main_with_args(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let c = Cli::try_parse_from(["infl", "recover-vols", "--seed", "9", "--paths", "100", "--antithetic"]).unwrap();
        assert_eq!(c.global.seed, Some(9));
        assert_eq!(c.global.paths, Some(100));
        assert!(c.global.antithetic);
    }

    #[test]
    fn factor_count_is_bounded() {
        assert!(Cli::try_parse_from(["infl", "calibrate-correlations", "--factors", "4"]).is_err());
        assert!(Cli::try_parse_from(["infl", "calibrate-correlations", "--factors", "2"]).is_ok());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["infl", "bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["infl", "calibrate-correlations", "--factors", "4"]), EXIT_USAGE);
        assert_eq!(
            main_with_args(["infl", "calibrate-correlations", "--history", "/nonexistent/history.csv"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
    }

    #[test]
    fn instrument_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.json");
        std::fs::write(&p, r#"{"product":"zc","kind":"cap","Ti":5,"K":0.02}"#).unwrap();
        let v = read_instruments(&p).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].notional, 1.0);
        std::fs::write(&p, r#"[{"product":"yoy","kind":"floor","Ti":1,"Tj":2,"K":0.0,"notional":1000}]"#).unwrap();
        assert_eq!(read_instruments(&p).unwrap()[0].tj, Some(2.0));
        std::fs::write(&p, r#"{"product":"zc","kind":"cap","Ti":5,"K":0.02,"strike":3}"#).unwrap();
        assert!(read_instruments(&p).is_err());
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("out/factors.json"), "_pca.csv"), PathBuf::from("out/factors_pca.csv"));
    }
}
