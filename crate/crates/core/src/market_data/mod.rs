//! Market inputs: discount curve, forward CPI vol surface, total implied
//! variance and historical swap series.

mod curve;
mod history;
pub mod io;
mod smile;
mod surface;

use std::path::Path;

pub use curve::DiscountCurve;
pub use history::{CleaningReport, HistoricalSeries, MAX_FILL_GAP};
pub use smile::SmileSpline;
pub use surface::{CpiTenor, CpiVolSurface, TivPoint, TotalVarianceSurface};

use crate::error::Result;

/// Market input file locations.
#[derive(Debug, Clone)]
pub struct MarketPaths<'a> {
    pub discounts: &'a Path,
    pub cpi_vols: &'a Path,
    pub history: Option<&'a Path>,
}

#[derive(Debug, Clone)]
pub struct MarketData {
    pub curve: DiscountCurve,
    pub surface: CpiVolSurface,
    pub history: Option<(HistoricalSeries, CleaningReport)>,
}

/// Loads and validates all market files.
pub fn load_market(paths: &MarketPaths<'_>) -> Result<MarketData> {
    let curve = io::read_discounts(paths.discounts)?;
    let surface = io::read_cpi_vols(paths.cpi_vols)?;
    let history = paths.history.map(io::read_history).transpose()?;
    Ok(MarketData { curve, surface, history })
}
