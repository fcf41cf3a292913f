//! Consumer-disagreement indices, a dispersed-information survey simulator,
//! and a sign-restricted factor BVAR with impulse-response tools.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvar;
pub mod dispersion;
pub mod error;
pub mod period;
pub mod pipeline;
pub mod sampling;
pub mod stats;
pub mod structural;
pub mod survey_index;
pub mod synthetic;

pub use error::{Error, Result};
pub use period::{Frequency, Period};
