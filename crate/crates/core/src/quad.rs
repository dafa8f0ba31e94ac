//! Fixed-node Gauss–Legendre quadrature.
//!
//! Every deterministic time integral in the crate (bond convexity terms,
//! drift integrals, off-diagonal factor overlaps) goes through this module so
//! that there is a single integration path to validate.

use std::sync::OnceLock;

/// Nodes used for integrands built from bond `b`-factors.
pub const BOND_NODES: usize = 16;
/// Nodes used for factor-loading and drift integrals.
pub const FACTOR_NODES: usize = 32;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integrates over `[a, b]` applying the rule separately on every
    /// sub-interval delimited by `breaks` (points outside `(a, b)` ignored).
    pub fn integrate_pieces(
        &self,
        a: f64,
        b: f64,
        breaks: &[f64],
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        if a >= b {
            return 0.0;
        }
        let mut total = 0.0;
        let mut lo = a;
        for &p in breaks.iter().filter(|&&p| p > a && p < b) {
            total += self.integrate(lo, p, &mut f);
            lo = p;
        }
        total + self.integrate(lo, b, &mut f)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn bond_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(BOND_NODES))
}

pub fn factor_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(FACTOR_NODES))
}
