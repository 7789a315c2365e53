//! Exact continued fraction machinery and random digit streams.

mod expansion;
mod lazy;
mod lft;
mod stream;

pub use expansion::{
    convergents, cylinder, expand_rational, Convergent, CylinderInterval, DigitSequence,
};
pub use lazy::{sample_gauss_box, DyadicBox};
pub use lft::{BitTransducer, FrozenPrefix, LftState};
pub use stream::{DigitSource, FiniteDigits, Law, RandomRealStream, DEFAULT_BIT_BUDGET};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("digit does not fit in 64 bits")]
    DigitOverflow,
    #[error("exact refinement exceeded the bit budget of {budget} bits")]
    BudgetExceeded { budget: u64 },
    #[error("digit source exhausted after {0} digits")]
    Exhausted(u64),
}
