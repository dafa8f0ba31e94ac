use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Quintic spline of implied vol against strike.
///
/// C⁴ inside the quoted range and passes through every quote exactly, with
/// natural end conditions (third and fourth derivatives vanish at the
/// outermost quotes). Outside the quotes the vol is flat; derivatives at an
/// outermost quote are the one-sided values from inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // per interval: coefficients of sum c_p u^p, u = (k - x_i) / h_i
    coef: Vec<[f64; 6]>,
}

impl SmileSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Invalid("smile needs at least one (strike, vol) quote".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("smile strikes must be strictly increasing".into()));
        }
        let coef = match x.len() {
            1 => Vec::new(),
            2 => vec![[y[0], y[1] - y[0], 0.0, 0.0, 0.0, 0.0]],
            _ => Self::solve(&x, &y)?,
        };
        Ok(SmileSpline { x, y, coef })
    }

    fn solve(x: &[f64], y: &[f64]) -> Result<Vec<[f64; 6]>> {
        let n = x.len() - 1;
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let dim = 6 * n;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        let mut row = 0;
        // d-th derivative (in k) of u^p at u, for interval of width hw
        let dcoef = |p: usize, d: usize, u: f64, hw: f64| -> f64 {
            if d > p {
                return 0.0;
            }
            let fall: f64 = (0..d).map(|j| (p - j) as f64).product();
            fall * u.powi((p - d) as i32) / hw.powi(d as i32)
        };
        for i in 0..n {
            for p in 0..6 {
                a[(row, 6 * i + p)] = dcoef(p, 0, 0.0, h[i]);
                a[(row + 1, 6 * i + p)] = dcoef(p, 0, 1.0, h[i]);
            }
            b[row] = y[i];
            b[row + 1] = y[i + 1];
            row += 2;
        }
        for i in 0..n - 1 {
            for d in 1..=4 {
                for p in 0..6 {
                    a[(row, 6 * i + p)] = dcoef(p, d, 1.0, h[i]);
                    a[(row, 6 * (i + 1) + p)] = -dcoef(p, d, 0.0, h[i + 1]);
                }
                row += 1;
            }
        }
        for d in 3..=4 {
            for p in 0..6 {
                a[(row, p)] = dcoef(p, d, 0.0, h[0]);
                a[(row + 1, 6 * (n - 1) + p)] = dcoef(p, d, 1.0, h[n - 1]);
            }
            row += 2;
        }
        debug_assert_eq!(row, dim);
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular smile spline system".into()))?;
        Ok((0..n)
            .map(|i| {
                let mut c = [0.0; 6];
                c.copy_from_slice(&sol.as_slice()[6 * i..6 * i + 6]);
                c
            })
            .collect())
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn value(&self, k: f64) -> f64 {
        self.eval(k).0
    }

    /// Value, first and second derivative in strike.
    pub fn eval(&self, k: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        if n == 1 || k < self.x[0] {
            return (self.y[0], 0.0, 0.0);
        }
        if k > self.x[n - 1] {
            return (self.y[n - 1], 0.0, 0.0);
        }
        let i = match self.x.binary_search_by(|p| p.total_cmp(&k)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let u = (k - self.x[i]) / h;
        let c = &self.coef[i];
        if u == 0.0 {
            return (self.y[i], c[1] / h, 2.0 * c[2] / (h * h));
        }
        if k == self.x[i + 1] {
            let d = c[1] + 2.0 * c[2] + 3.0 * c[3] + 4.0 * c[4] + 5.0 * c[5];
            let dd = 2.0 * c[2] + 6.0 * c[3] + 12.0 * c[4] + 20.0 * c[5];
            return (self.y[i + 1], d / h, dd / (h * h));
        }
        let v = c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
        let d = c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5])));
        let dd = 2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5]));
        (v, d / h, dd / (h * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SmileSpline {
        SmileSpline::new(
            vec![90.0, 95.0, 100.0, 104.0, 110.0],
            vec![0.031, 0.027, 0.024, 0.022, 0.025],
        )
        .unwrap()
    }

    #[test]
    fn interpolates_quotes() {
        let s = sample();
        for (k, v) in s.knots().iter().zip(s.values()) {
            assert_eq!(s.value(*k), *v);
        }
        // interval end evaluated from the left polynomial agrees too
        let c = &s.coef[1];
        let right: f64 = c.iter().sum();
        assert!((right - 0.024).abs() < 1e-15);
    }

    #[test]
    fn flat_outside() {
        let s = sample();
        assert_eq!(s.eval(50.0), (0.031, 0.0, 0.0));
        assert_eq!(s.eval(200.0), (0.025, 0.0, 0.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let s = sample();
        let h = 1e-3;
        for k in [91.3, 95.0, 97.7, 100.0, 103.2, 104.0, 108.9] {
            let (_, d, dd) = s.eval(k);
            let fd = (s.value(k + h) - s.value(k - h)) / (2.0 * h);
            let fdd = (s.value(k + h) - 2.0 * s.value(k) + s.value(k - h)) / (h * h);
            assert!((d - fd).abs() < 1e-9, "k={k} d={d} fd={fd}");
            assert!((dd - fdd).abs() < 1e-7, "k={k} dd={dd} fdd={fdd}");
        }
    }

    #[test]
    fn continuous_into_flat_wings() {
        let s = sample();
        for k in [90.0, 110.0] {
            let (v, d, dd) = s.eval(k);
            let (vi, di, ddi) = s.eval(if k < 100.0 { k + 1e-9 } else { k - 1e-9 });
            assert!((v - vi).abs() < 1e-10);
            assert!((d - di).abs() < 1e-8 && (dd - ddi).abs() < 1e-6);
            assert!((s.value(k + 1e-9) - s.value(k - 1e-9)).abs() < 1e-10);
        }
    }

    #[test]
    fn natural_end_conditions() {
        let s = sample();
        let n = s.coef.len();
        // third derivative ∝ 6c3 + 24c4 u + 60c5 u², fourth ∝ 24c4 + 120c5 u
        let c0 = &s.coef[0];
        assert!(c0[3].abs() < 1e-10 && c0[4].abs() < 1e-10);
        let c = &s.coef[n - 1];
        assert!((6.0 * c[3] + 24.0 * c[4] + 60.0 * c[5]).abs() < 1e-10);
        assert!((24.0 * c[4] + 120.0 * c[5]).abs() < 1e-10);
    }

    #[test]
    fn single_quote_is_flat() {
        let s = SmileSpline::new(vec![100.0], vec![0.02]).unwrap();
        assert_eq!(s.eval(80.0), (0.02, 0.0, 0.0));
        assert_eq!(s.eval(100.0), (0.02, 0.0, 0.0));
    }

    #[test]
    fn two_quotes() {
        let s = SmileSpline::new(vec![1.0, 2.0], vec![0.1, 0.2]).unwrap();
        assert!((s.value(1.5) - 0.15).abs() < 1e-14);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(SmileSpline::new(vec![1.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(SmileSpline::new(vec![], vec![]).is_err());
    }
}
