//! Forecasting of journal citation counts and CiteScore values one year ahead.
//!
//! The crate covers the full experiment pipeline:
//!
//! * [`data`] — annual bibliometric records, journal histories, the CiteScore
//!   formula, NDJSON ingestion and a calibrated synthetic generator.
//! * [`features`] — the fixed feature-selection matrix, sliding-window sample
//!   enumeration, train/test splitting and fitted preprocessing (power
//!   transform + min-max scaling).
//! * [`baselines`] — persistence, delta and weighted-delta heuristics.
//! * [`models`] — native implementations of the seven regression families
//!   (linear regression, decision tree, random forest, k-NN, MLP, RNN, LSTM)
//!   trained with Adam on an MSE objective.
//! * [`eval`] — error metrics, bucketized reports, k-fold cross-validation,
//!   grid search and error-reduction comparisons.
//! * [`citescore`] — composition of trained models into next-year CiteScore
//!   predictions.

pub mod baselines;
pub mod citescore;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod util;

pub use error::{Error, Result};
