use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Longest run of consecutive missing observations that is forward-filled.
pub const MAX_FILL_GAP: usize = 3;

/// Daily curves of `X_k = log F_k` by nearest-maturity bucket.
///
/// Buckets are labelled by their maturity in years; these are the `T_j`
/// used when comparing model and market correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalSeries {
    dates: Vec<NaiveDate>,
    buckets: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleaningReport {
    pub filled: usize,
    pub dropped_rows: usize,
}

impl HistoricalSeries {
    pub fn new(dates: Vec<NaiveDate>, buckets: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::Invalid("one row of values per date required".into()));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("history dates must be strictly increasing".into()));
        }
        if buckets.is_empty() || buckets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("history buckets must be non-empty and increasing".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != buckets.len() || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Invalid(format!("history row {} is incomplete or non-finite", dates[r])));
        }
        Ok(HistoricalSeries { dates, buckets, rows })
    }

    /// Builds a series from long-format `(date, bucket, logF)` records,
    /// forward-filling gaps of at most [`MAX_FILL_GAP`] rows per bucket and
    /// dropping rows that cannot be completed.
    pub fn from_records(records: &[(NaiveDate, f64, f64)]) -> Result<(Self, CleaningReport)> {
        let mut dates: Vec<NaiveDate> = records.iter().map(|r| r.0).collect();
        dates.sort();
        dates.dedup();
        let mut buckets: Vec<f64> = records.iter().map(|r| r.1).collect();
        buckets.sort_by(f64::total_cmp);
        buckets.dedup();

        let nb = buckets.len();
        let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; nb]; dates.len()];
        for &(d, b, v) in records {
            let di = dates.binary_search(&d).unwrap();
            let bi = buckets.binary_search_by(|x| x.total_cmp(&b)).unwrap();
            if grid[di][bi].replace(v).is_some() {
                return Err(Error::Invalid(format!("duplicate history record for {d}, bucket {b}")));
            }
        }

        let mut report = CleaningReport::default();
        let mut last: Vec<Option<f64>> = vec![None; nb];
        let mut gap = vec![0usize; nb];
        let mut kept_dates = Vec::new();
        let mut rows = Vec::new();
        for (d, cells) in dates.iter().zip(grid) {
            let mut row = Vec::with_capacity(nb);
            let mut complete = true;
            let mut fills = 0;
            for (b, cell) in cells.into_iter().enumerate() {
                match cell {
                    Some(v) => {
                        last[b] = Some(v);
                        gap[b] = 0;
                        row.push(v);
                    }
                    None => {
                        gap[b] += 1;
                        match last[b] {
                            Some(v) if gap[b] <= MAX_FILL_GAP => {
                                fills += 1;
                                row.push(v);
                            }
                            _ => complete = false,
                        }
                    }
                }
            }
            if complete {
                report.filled += fills;
                kept_dates.push(*d);
                rows.push(row);
            } else {
                report.dropped_rows += 1;
            }
        }
        Ok((Self::new(kept_dates, buckets, rows)?, report))
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn buckets(&self) -> &[f64] {
        &self.buckets
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Day-over-day differences of every bucket, one row per consecutive pair of dates.
    pub fn daily_changes(&self) -> Vec<Vec<f64>> {
        self.rows
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2022, 1, n).unwrap()
    }

    #[test]
    fn forward_fill_short_gaps() {
        let mut recs = vec![];
        for n in 1..=6 {
            recs.push((d(n), 1.0, n as f64));
            if n != 3 {
                recs.push((d(n), 2.0, 10.0 + n as f64));
            }
        }
        let (h, rep) = HistoricalSeries::from_records(&recs).unwrap();
        assert_eq!(h.rows().len(), 6);
        assert_eq!(h.rows()[2], vec![3.0, 12.0]);
        assert_eq!(rep, CleaningReport { filled: 1, dropped_rows: 0 });
    }

    #[test]
    fn long_gaps_drop_rows() {
        let mut recs = vec![];
        for n in 1..=8 {
            recs.push((d(n), 1.0, n as f64));
            if !(2..=6).contains(&n) {
                recs.push((d(n), 2.0, 0.0));
            }
        }
        let (h, rep) = HistoricalSeries::from_records(&recs).unwrap();
        // days 2,3,4 filled; 5,6 dropped
        assert_eq!(rep.filled, 3);
        assert_eq!(rep.dropped_rows, 2);
        assert_eq!(h.dates().len(), 6);
    }

    #[test]
    fn leading_gap_cannot_fill() {
        let recs = vec![(d(1), 1.0, 0.0), (d(2), 1.0, 0.1), (d(2), 2.0, 0.2)];
        let (h, rep) = HistoricalSeries::from_records(&recs).unwrap();
        assert_eq!(rep.dropped_rows, 1);
        assert_eq!(h.dates(), &[d(2)]);
    }

    #[test]
    fn duplicate_record_rejected() {
        let recs = vec![(d(1), 1.0, 0.0), (d(1), 1.0, 0.1)];
        assert!(HistoricalSeries::from_records(&recs).is_err());
    }

    #[test]
    fn differences() {
        let h = HistoricalSeries::new(vec![d(1), d(2), d(3)], vec![1.0], vec![vec![0.0], vec![0.5], vec![0.25]]).unwrap();
        assert_eq!(h.daily_changes(), vec![vec![0.5], vec![-0.25]]);
    }
}
