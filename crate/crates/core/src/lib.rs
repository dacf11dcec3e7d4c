//! Rough and classical stochastic-volatility models for commodity futures options.
//!
//! Numerical code is generic over [`Real`], implemented for `f32` and `f64`.

pub mod acceptance;
pub mod calibration;
pub mod error;
pub mod fv_curve;
pub mod hurst;
pub mod market_data;
pub mod pricing;
pub mod real;
pub mod sim;

pub use error::{Error, Result};
pub use fv_curve::{ForwardVarianceCurve, LeftAnchor};
pub use market_data::{FuturesContract, IntradaySeries, OptionQuote, QuoteSurface, TradingCalendar};
pub use real::Real;

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default working precision.
pub type F64 = f64;
/// Reduced precision for memory-bound path batches.
pub type F32 = f32;
