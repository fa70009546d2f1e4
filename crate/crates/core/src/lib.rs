//! Pulsating fronts of the strongly competing two-species system
//!
//! ```text
//! u1_t =   u1_xx + u1 f1(u1, x) -     k u1 u2
//! u2_t = d u2_xx + u2 f2(u2, x) - alpha k u1 u2
//! ```
//!
//! in an L-periodic medium, together with the analytic predictors of the
//! sign of the limiting front speed as `k -> infinity`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod plot;
pub mod reaction;
pub mod scalar_kpp;
pub mod sim;
pub mod theta;

pub use error::{Error, Result};
pub use reaction::{FourierSeries, PeriodicReaction};
