//! Optimal no-trade buffers for trading under proportional transaction costs.
//!
//! The crate sizes the band around a frictionless target position with the
//! cube-root law `δθ = (3εGΓ̂₀²/2)^(1/3)`, runs the band rule over synthetic
//! or historical target paths, scores the result with stdev/VaR/ESF Sharpe
//! ratios, and checks the law against a brute-force dynamic program.

// `!(x > 0.0)` guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod buffer;
pub mod cli;
pub mod data_io;
pub mod dp;
pub mod error;
pub mod experiments;
pub mod momentum;
pub mod normal;
pub mod strategy;
pub mod synth;

pub use buffer::{
    apply_buffer, half_width, time_average_width, BufferParams, BufferPolicy, ExecutionResult,
    TargetPath,
};
pub use error::{Error, Result};
