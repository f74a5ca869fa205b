//! Time- and frequency-domain volatility connectedness.
//!
//! Modules follow the pipeline: [`ingest`] builds a daily volatility panel
//! from ticks, [`varcore`] fits the VAR and its moving-average form,
//! [`timedomain`] computes the generalized variance decomposition and
//! spillover measures, [`freqdomain`] splits them over frequency bands, and
//! [`dynamics`] runs everything over rolling windows with parametric
//! bootstrap bands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod freqdomain;
pub mod ingest;
pub mod matrix_serde;
pub mod par;
pub mod timedomain;
pub mod varcore;

pub use error::{Error, ErrorKind, Result};
pub use par::Execution;
