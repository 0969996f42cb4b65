//! Alternating renewal processes with dependent sojourn pairs.

mod lattice;
mod law;
mod moments;
mod path;

pub use lattice::{
    exact_cdf_alpha, exact_cdf_beta, independent_series_terms, LatticeConfig, SeriesLattice, SeriesValue,
};
pub use law::{LawKind, Marginal, SojournLaw};
pub use moments::{normal_approx_cdf, MomentSummary};
pub use path::{simulate_alternating, PathSample};
