//! Link-level workbench for channel-aging mitigation in TDD links.
//!
//! The pipeline runs tapped-delay-line MIMO fading ([`channel`]) through
//! per-RB MMSE SINR and EESM compression with CQI selection ([`link`]),
//! builds report-instant windows of the resulting effective-SINR trace
//! ([`predictor`]), fits small dense or LSTM forecasters ([`neural`]) and
//! evaluates NMSE and slot-level throughput ([`harness`]).

pub mod channel;
pub mod error;
pub mod harness;
pub mod link;
pub mod neural;
pub mod predictor;
pub mod seed;

pub use error::{Error, Result};
