//! Sub-Nyquist cognitive MIMO radar simulation and recovery.
//!
//! The pipeline runs array geometry → FDM cognitive waveforms → scene
//! synthesis → per-receiver Xampling acquisition → joint sparse recovery.
//! [`harness`] wraps it in seeded Monte-Carlo experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
mod fft;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod recovery;
pub mod scene;
pub mod waveform;
pub mod xampler;

pub use error::{Error, Result};
pub use geometry::{build_mode, ArrayConfig, ArrayMode, AzimuthGrid};
pub use recovery::{build_dictionaries, matrix_omp, DictionarySet, RangeGrid, SparseEstimate};
pub use scene::{add_noise, oracle_coefficients, synth_received, Scene, Target};
pub use waveform::{build_cognitive_plan, build_fdm_plan, CognitivePlan, FdmPlan, Subband};
pub use xampler::{acquire, AdcConfig, CoefficientSet, KappaSet};
