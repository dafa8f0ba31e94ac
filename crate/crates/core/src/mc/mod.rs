//! Joint risk-neutral simulation of the short-rate state, the pathwise
//! discount factor and every forward CPI.
//!
//! The rate state uses the exact Ornstein–Uhlenbeck transition, the discount
//! integral uses the trapezoid rule on `x` plus the exact integral of `φ`,
//! and forward CPIs use a log-Euler step driven by a pluggable diffusion
//! coefficient. Each path (or antithetic pair) owns a ChaCha stream keyed by
//! the seed and its index, so results do not depend on the worker count.

mod correlation;
mod engine;
mod pricing;

pub use correlation::{build_correlation, FactorCholesky};
pub use engine::{
    slice_grid, ConstantSigma, DiffusionCoefficient, McConfig, ModelSpec, Observation, Simulation,
    Underlier, ZeroDiffusion, MAX_INVALID_FRACTION,
};
pub use pricing::{mean_and_stderr, price_yoy_options_mc, price_zc_options_mc};
