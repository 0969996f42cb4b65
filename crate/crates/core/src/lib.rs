//! Occupation times of alternating renewal processes with dependent sojourn
//! pairs and of reflected spectrally positive Lévy processes.
//!
//! * [`renewal`]: sojourn laws, path simulation, the exact series law of the
//!   occupation time and its Gaussian approximation.
//! * [`transforms`]: double Laplace transforms and numerical inversion.
//! * [`levy`]: Lévy models and their scale functions.
//! * [`storage`]: sojourn statistics and occupation transforms of reflected
//!   processes.
//! * [`ldp`]: the large-deviations rate function.
//! * [`simulate`]: Monte Carlo oracles.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ldp;
pub mod levy;
pub mod numeric;
pub mod renewal;
pub mod simulate;
pub mod storage;
pub mod transforms;
pub mod validation;

pub use error::{Error, Result};
pub use ldp::{MgfDomain, RateValue};
pub use levy::{LevyKind, LevyModel, PhaseType, ScaleEvaluator};
pub use renewal::{LatticeConfig, Marginal, MomentSummary, PathSample, SojournLaw};
pub use simulate::{CycleRecord, SimConfig};
pub use transforms::{Algorithm, InversionConfig, Inverted};

/// Version of this crate, recorded in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
