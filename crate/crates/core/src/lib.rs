//! RR-interval heart-rate-variability analysis, rule-based sleep staging and
//! a three-state ambient temperature controller, plus a seeded night
//! simulator for end-to-end checks.
//!
//! Pipeline: [`rr::parse_rr`] → [`spectral::windowize`] →
//! [`stager::smooth_windows`] → [`stager::classify`] → [`controller::run`].

// `!(x >= lo)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod io;
pub mod rr;
pub mod simulator;
pub mod spectral;
pub mod stager;

pub use controller::{ControllerConfig, DfaState, TemperatureProfile};
pub use error::{Error, Result};
pub use rr::{IngestConfig, RRSeries};
pub use simulator::{closed_loop_run, PipelineConfig, SessionReport, SimConfig};
pub use spectral::{FrequencyBands, SpectralConfig, SpectralWindow, Spectrum};
pub use stager::{Hypnogram, SleepStage, StagerConfig};
