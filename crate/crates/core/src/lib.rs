//! Continued fraction digit laws.
//!
//! The crate is split into five areas:
//!
//! * [`cf`] exact expansions, cylinders and random digit streams,
//! * [`measure`] Gauss and Lebesgue measures of cylinder unions,
//! * [`sums`] pair-product sums along trajectories and Monte Carlo drivers,
//! * [`arith`] divisor counts, zeta and composition sums,
//! * [`fractal`] digit schedules and envelopes for prescribed growth.

pub mod arith;
pub mod cf;
pub mod fractal;
pub mod measure;
pub mod numeric;
pub mod sums;

pub use cf::{
    convergents, cylinder, expand_rational, CfError, Convergent, CylinderInterval, DigitSequence,
    DigitSource, Law, LftState, RandomRealStream,
};
