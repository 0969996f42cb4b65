//! Spectrally positive Lévy processes: Laplace exponents and scale functions.

mod expsum;
mod model;
mod phase_type;
mod scale;

pub use expsum::ExpSum;
pub use model::{LevyKind, LevyModel};
pub use phase_type::PhaseType;
pub use scale::{ScaleEvaluator, Tilted};
