//! Cycle and scaling analysis of daily stock-market-index returns.
//!
//! The pipeline runs from closure prices to log returns ([`ingest`]), through
//! a Morlet continuous wavelet transform and its scalegram ([`cwt`]), to
//! scalegram peaks mapped onto nine canonical cycle bands ([`peaks`]). Band
//! energies and amplitudes feed a cross-group comparison ([`spectral_stats`]).
//! Centered DMA gives global, windowed and per-band Hurst exponents ([`dma`]),
//! and per-band Hurst vectors are projected onto a development direction to
//! classify markets ([`devindex`]). [`synth`] provides seeded test signals with
//! known properties.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cwt;
pub mod devindex;
pub mod dma;
mod error;
pub mod fit;
pub mod ingest;
pub mod peaks;
pub mod spectral_stats;
pub mod synth;

pub use error::{Error, Result};

/// Trading days per calendar week.
pub const TRADING_DAYS_PER_WEEK: f64 = 5.0;
/// Calendar days per week.
pub const REAL_DAYS_PER_WEEK: f64 = 7.0;
