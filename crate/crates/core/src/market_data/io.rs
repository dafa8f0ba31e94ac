//! CSV readers and canonical writers for the market input files.
//!
//! Writers emit `f64` values in their shortest round-trip form, so a file
//! written here loads and re-serializes byte-identically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};

use super::{CleaningReport, CpiTenor, CpiVolSurface, DiscountCurve, HistoricalSeries};

pub const DISCOUNTS_HEADER: [&str; 2] = ["T", "df"];
pub const CPI_VOLS_HEADER: [&str; 5] = ["Ti", "Ti_tilde", "F0", "Kbar", "sigma"];
pub const HISTORY_HEADER: [&str; 3] = ["date", "bucket", "logF"];

/// Data rows of a headed CSV file with their 1-based line numbers.
pub(crate) struct Rows {
    pub path: PathBuf,
    pub rows: Vec<(usize, csv::StringRecord)>,
}

impl Rows {
    pub fn num(&self, line: usize, rec: &csv::StringRecord, col: usize, name: &str) -> Result<f64> {
        let raw = rec.get(col).unwrap_or("").trim();
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::schema(&self.path, line, format!("column {name}: '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(Error::schema(&self.path, line, format!("column {name} is not finite")));
        }
        Ok(v)
    }

    pub fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::schema(&self.path, line, msg)
    }
}

pub(crate) fn read_rows(path: &Path, header: &[&str]) -> Result<Rows> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(path, &text, header)
}

pub(crate) fn parse_rows(path: &Path, text: &str, header: &[&str]) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| Error::schema(path, 1, e.to_string()))?.clone();
    if got.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::schema(
            path,
            1,
            format!("expected header '{}', found '{}'", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::schema(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::schema(path, line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        rows.push((line, rec));
    }
    Ok(Rows { path: path.to_path_buf(), rows })
}

/// Writes a headed numeric table.
pub(crate) fn write_rows(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_discounts(path: &Path) -> Result<DiscountCurve> {
    let rows = read_rows(path, &DISCOUNTS_HEADER)?;
    let mut pillars: Vec<(f64, f64)> = Vec::with_capacity(rows.rows.len());
    for (line, rec) in &rows.rows {
        let t = rows.num(*line, rec, 0, "T")?;
        let df = rows.num(*line, rec, 1, "df")?;
        if let Some(&(prev, _)) = pillars.last() {
            if t <= prev {
                return Err(rows.err(*line, format!("pillar time {t} not after {prev} (duplicate or unsorted)")));
            }
        } else if (t, df) != (0.0, 1.0) {
            return Err(rows.err(*line, "first pillar must be T=0, df=1"));
        }
        if !(df > 0.0 && df <= 1.0) {
            return Err(rows.err(*line, format!("discount factor {df} outside (0, 1]")));
        }
        pillars.push((t, df));
    }
    DiscountCurve::new(pillars).map_err(|e| rows.err(0, e.to_string()))
}

pub fn write_discounts(curve: &DiscountCurve) -> String {
    let mut out = DISCOUNTS_HEADER.join(",");
    out.push('\n');
    for (t, df) in curve.pillars() {
        let _ = writeln!(out, "{t},{df}");
    }
    out
}

pub fn read_cpi_vols(path: &Path) -> Result<CpiVolSurface> {
    let rows = read_rows(path, &CPI_VOLS_HEADER)?;
    struct Group {
        line: usize,
        reset: f64,
        pay: f64,
        fwd: f64,
        kbars: Vec<f64>,
        vols: Vec<f64>,
    }
    let mut groups: Vec<Group> = Vec::new();
    for (line, rec) in &rows.rows {
        let line = *line;
        let reset = rows.num(line, rec, 0, "Ti")?;
        let pay = rows.num(line, rec, 1, "Ti_tilde")?;
        let fwd = rows.num(line, rec, 2, "F0")?;
        let kbar = rows.num(line, rec, 3, "Kbar")?;
        let sigma = rows.num(line, rec, 4, "sigma")?;
        if !(sigma > 0.0) {
            return Err(rows.err(line, format!("non-positive vol {sigma}")));
        }
        if pay < reset {
            return Err(rows.err(line, "Ti_tilde must not precede Ti"));
        }
        match groups.last_mut() {
            Some(g) if g.reset == reset => {
                if g.pay != pay || g.fwd != fwd {
                    return Err(rows.err(line, format!("inconsistent Ti_tilde/F0 within tenor {reset}")));
                }
                if kbar <= *g.kbars.last().unwrap() {
                    return Err(rows.err(line, format!("strikes not strictly increasing in tenor {reset}")));
                }
                g.kbars.push(kbar);
                g.vols.push(sigma);
            }
            last => {
                if let Some(g) = last {
                    if reset <= g.reset {
                        return Err(rows.err(line, format!("tenor {reset} does not follow {} (non-increasing tenors)", g.reset)));
                    }
                }
                groups.push(Group { line, reset, pay, fwd, kbars: vec![kbar], vols: vec![sigma] });
            }
        }
    }
    let tenors = groups
        .into_iter()
        .map(|g| CpiTenor::new(g.reset, g.pay, g.fwd, g.kbars, g.vols).map_err(|e| rows.err(g.line, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    CpiVolSurface::new(tenors).map_err(|e| rows.err(0, e.to_string()))
}

pub fn write_cpi_vols(surface: &CpiVolSurface) -> String {
    let mut out = CPI_VOLS_HEADER.join(",");
    out.push('\n');
    for t in surface.tenors() {
        for (k, v) in t.kbars.iter().zip(&t.vols) {
            let _ = writeln!(out, "{},{},{},{},{}", t.reset, t.pay, t.forward, k, v);
        }
    }
    out
}

pub fn read_history(path: &Path) -> Result<(HistoricalSeries, CleaningReport)> {
    let rows = read_rows(path, &HISTORY_HEADER)?;
    let mut recs = Vec::with_capacity(rows.rows.len());
    for (line, rec) in &rows.rows {
        let raw = rec.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| rows.err(*line, format!("invalid date '{raw}' (expected YYYY-MM-DD)")))?;
        let bucket = rows.num(*line, rec, 1, "bucket")?;
        let v = rows.num(*line, rec, 2, "logF")?;
        recs.push((date, bucket, v));
    }
    HistoricalSeries::from_records(&recs).map_err(|e| rows.err(0, e.to_string()))
}

pub fn write_history(h: &HistoricalSeries) -> String {
    let mut out = HISTORY_HEADER.join(",");
    out.push('\n');
    for (d, row) in h.dates().iter().zip(h.rows()) {
        for (b, v) in h.buckets().iter().zip(row) {
            let _ = writeln!(out, "{},{b},{v}", d.format("%Y-%m-%d"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn discounts_round_trip() {
        let text = "T,df\n0,1\n1,0.9656\n2,0.9379\n";
        let f = tmp(text);
        let c = read_discounts(f.path()).unwrap();
        assert_eq!(write_discounts(&c), text);
    }

    #[test]
    fn duplicate_pillar_reports_line() {
        let f = tmp("T,df\n0,1\n1,0.99\n1,0.98\n");
        let e = read_discounts(f.path()).unwrap_err();
        match e {
            Error::Schema { line, .. } => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header() {
        let f = tmp("t,discount\n0,1\n");
        assert!(matches!(read_discounts(f.path()), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn cpi_vols_errors() {
        let bad_vol = tmp("Ti,Ti_tilde,F0,Kbar,sigma\n1,1,100,0,0.02\n1,1,100,0.01,-0.1\n");
        assert!(matches!(read_cpi_vols(bad_vol.path()), Err(Error::Schema { line: 3, .. })));
        let bad_tenor = tmp("Ti,Ti_tilde,F0,Kbar,sigma\n2,2,100,0,0.02\n1,1,100,0,0.02\n");
        assert!(matches!(read_cpi_vols(bad_tenor.path()), Err(Error::Schema { line: 3, .. })));
        let not_num = tmp("Ti,Ti_tilde,F0,Kbar,sigma\n1,1,abc,0,0.02\n");
        assert!(matches!(read_cpi_vols(not_num.path()), Err(Error::Schema { line: 2, .. })));
    }

    #[test]
    fn history_round_trip() {
        let text = "date,bucket,logF\n2022-01-03,1,4.8\n2022-01-03,2,4.9\n2022-01-04,1,4.81\n2022-01-04,2,4.92\n";
        let f = tmp(text);
        let (h, rep) = read_history(f.path()).unwrap();
        assert_eq!(rep, CleaningReport::default());
        assert_eq!(write_history(&h), text);
    }
}
