//! Discount curve with log-linear interpolation in time.

use crate::error::{Error, Result};

/// Pillars `(T, P(0,T))`, first pillar `(0, 1)`.
///
/// Between pillars the log discount factor is linear in `T`, so the
/// instantaneous forward rate is piecewise constant and right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCurve {
    times: Vec<f64>,
    dfs: Vec<f64>,
    log_dfs: Vec<f64>,
}

impl DiscountCurve {
    pub fn new(pillars: Vec<(f64, f64)>) -> Result<Self> {
        if pillars.len() < 2 {
            return Err(Error::Invalid("discount curve needs at least two pillars".into()));
        }
        if pillars[0] != (0.0, 1.0) {
            return Err(Error::Invalid(format!(
                "first discount pillar must be (0, 1), got {:?}",
                pillars[0]
            )));
        }
        for w in pillars.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Invalid(format!(
                    "discount pillar times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(t, df)) = pillars.iter().find(|(_, df)| !(*df > 0.0 && *df <= 1.0)) {
            return Err(Error::Invalid(format!("discount factor {df} at T={t} outside (0, 1]")));
        }
        let (times, dfs): (Vec<f64>, Vec<f64>) = pillars.into_iter().unzip();
        let log_dfs = dfs.iter().map(|d| d.ln()).collect();
        Ok(DiscountCurve { times, dfs, log_dfs })
    }

    /// Flat continuously-compounded curve `exp(-rate*T)` on the given pillar times.
    pub fn flat(rate: f64, times: &[f64]) -> Result<Self> {
        let mut pillars = vec![(0.0, 1.0)];
        pillars.extend(times.iter().filter(|&&t| t > 0.0).map(|&t| (t, (-rate * t).exp())));
        Self::new(pillars)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dfs(&self) -> &[f64] {
        &self.dfs
    }

    pub fn pillars(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.dfs.iter().copied())
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index `k` of the interval `[T_k, T_{k+1})` containing `t`.
    fn interval(&self, t: f64) -> usize {
        match self.times.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(k) => k.min(self.times.len() - 2),
            Err(k) => k - 1,
        }
    }

    pub fn log_discount(&self, t: f64) -> Result<f64> {
        let last = self.last_time();
        if !(0.0..=last).contains(&t) {
            return Err(Error::OutOfRange { what: "discount time", value: t, lo: 0.0, hi: last });
        }
        let k = self.interval(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let (l0, l1) = (self.log_dfs[k], self.log_dfs[k + 1]);
        if t == t1 {
            return Ok(l1);
        }
        Ok(l0 + (l1 - l0) * (t - t0) / (t1 - t0))
    }

    pub fn discount(&self, t: f64) -> Result<f64> {
        let k = self.times.iter().position(|&p| p == t);
        match k {
            Some(k) => Ok(self.dfs[k]),
            None => self.log_discount(t).map(f64::exp),
        }
    }

    /// `f(0,T) = -d log P(0,T) / dT`, right-continuous at pillars.
    pub fn instantaneous_forward(&self, t: f64) -> Result<f64> {
        let last = self.last_time();
        if !(0.0..last).contains(&t) {
            return Err(Error::OutOfRange { what: "forward time", value: t, lo: 0.0, hi: last });
        }
        let k = self.interval(t);
        Ok(self.piece_forward(k))
    }

    /// Forward rate on `[T_k, T_{k+1})`.
    pub(crate) fn piece_forward(&self, k: usize) -> f64 {
        (self.log_dfs[k] - self.log_dfs[k + 1]) / (self.times[k + 1] - self.times[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DiscountCurve {
        DiscountCurve::new(vec![
            (0.0, 1.0),
            (1.0, 0.9656),
            (2.0, 0.9379),
            (5.0, 0.8706),
            (7.0, 0.8264),
            (10.0, 0.7596),
            (12.0, 0.7152),
            (15.0, 0.6547),
            (20.0, 0.5800),
        ])
        .unwrap()
    }

    #[test]
    fn pillar_values_exact() {
        let c = table();
        assert_eq!(c.discount(0.0).unwrap(), 1.0);
        assert_eq!(c.discount(10.0).unwrap(), 0.7596);
        assert_eq!(c.discount(20.0).unwrap(), 0.58);
    }

    #[test]
    fn log_linear_midpoint() {
        let c = table();
        let expected = (0.9656f64 * 0.9379).sqrt();
        assert!((c.discount(1.5).unwrap() - expected).abs() < 1e-15);
        assert!((c.discount(1.5).unwrap() - 0.95165).abs() < 1e-5);
    }

    #[test]
    fn forwards() {
        let c = table();
        let f15 = c.instantaneous_forward(1.5).unwrap();
        assert!((f15 - (0.9656f64 / 0.9379).ln()).abs() < 1e-15);
        assert!((f15 - 0.029106).abs() < 1e-6);
        let f05 = c.instantaneous_forward(0.5).unwrap();
        assert!((f05 - 0.035005).abs() < 1e-6);
        // right-continuous at a pillar
        assert_eq!(c.instantaneous_forward(1.0).unwrap(), f15);
    }

    #[test]
    fn flat_curve_forward() {
        let c = DiscountCurve::flat(0.03, &[1.0, 5.0, 10.0]).unwrap();
        for t in [0.0, 0.3, 1.0, 4.9, 9.99] {
            assert!((c.instantaneous_forward(t).unwrap() - 0.03).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_integrates_back() {
        let c = table();
        let mut acc = 0.0;
        for k in 0..c.times().len() - 1 {
            acc += c.piece_forward(k) * (c.times()[k + 1] - c.times()[k]);
            let df = c.dfs()[k + 1];
            assert!(((-acc).exp() / df - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let c = table();
        assert!(c.discount(20.5).is_err());
        assert!(c.instantaneous_forward(20.0).is_err());
        assert!(DiscountCurve::new(vec![(0.0, 1.0), (1.0, 0.9), (1.0, 0.8)]).is_err());
        assert!(DiscountCurve::new(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(DiscountCurve::new(vec![(0.5, 1.0), (1.0, 0.9)]).is_err());
    }
}
