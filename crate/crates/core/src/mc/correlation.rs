//! Joint correlation of the rate driver and the inflation factors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factors::RateCorrelations;

/// Lower-triangular factor of the `(M+1)×(M+1)` correlation matrix whose
/// first row/column is the rate driver and whose inflation block is the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorCholesky {
    lower: DMatrix<f64>,
}

impl FactorCholesky {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// Writes `L z` into `out`.
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for r in 0..n {
            let mut s = 0.0;
            for c in 0..=r {
                s += self.lower[(r, c)] * z[c];
            }
            out[r] = s;
        }
    }
}

/// Factors the joint correlation matrix; rank-deficient boundaries such as
/// `ρ = -1` with one factor are allowed.
pub fn build_correlation(rc: &RateCorrelations) -> Result<FactorCholesky> {
    let rho = rc.as_slice();
    let s: f64 = rho.iter().map(|r| r * r).sum();
    if s > 1.0 + 1e-12 {
        return Err(Error::InvalidCorrelation(s));
    }
    let n = rho.len() + 1;
    let mut c = DMatrix::<f64>::identity(n, n);
    for (a, &r) in rho.iter().enumerate() {
        c[(0, a + 1)] = r;
        c[(a + 1, 0)] = r;
    }
    // Semidefinite Cholesky: a vanishing pivot zeroes its column.
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let d = c[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d < -1e-12 {
            return Err(Error::InvalidCorrelation(s));
        }
        let piv = d.max(0.0).sqrt();
        l[(j, j)] = piv;
        for i in j + 1..n {
            let v = c[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = if piv > 1e-12 { v / piv } else { 0.0 };
        }
    }
    Ok(FactorCholesky { lower: l })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max()
    }

    fn target(rho: &[f64]) -> DMatrix<f64> {
        let n = rho.len() + 1;
        let mut c = DMatrix::identity(n, n);
        for (a, &r) in rho.iter().enumerate() {
            c[(0, a + 1)] = r;
            c[(a + 1, 0)] = r;
        }
        c
    }

    #[test]
    fn zero_correlation_is_identity() {
        let f = build_correlation(&RateCorrelations::zero(3)).unwrap();
        assert_eq!(f.lower(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn three_factors_at_minus_half() {
        let rc = RateCorrelations::uniform(3, -0.5).unwrap();
        let f = build_correlation(&rc).unwrap();
        assert!(max_err(&f.reconstruct(), &target(rc.as_slice())) <= 1e-14);
        let eig = target(rc.as_slice()).symmetric_eigen();
        assert!(eig.eigenvalues.min() > 0.0);
    }

    #[test]
    fn perfect_anticorrelation_boundary() {
        let rc = RateCorrelations::new(vec![-1.0]).unwrap();
        let f = build_correlation(&rc).unwrap();
        assert!(max_err(&f.reconstruct(), &target(&[-1.0])) <= 1e-14);
        let mut out = [0.0; 2];
        f.apply(&[0.7, 0.3], &mut out);
        assert_eq!(out, [0.7, -0.7]);
    }
}
