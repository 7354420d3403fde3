//! Smooth entropies, information-spectrum slicing encoders and channel
//! resolvability checks on finite instances.

// `!(x >= 0.0)` is used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dist;
pub mod encoder;
pub mod error;
pub mod gaussian;
pub mod grouped;
pub mod io;
pub mod measures;
pub mod oracle;
pub mod second_order;
pub mod smooth;
pub mod suite;
pub mod verify;

/// Tolerance on total probability mass.
pub const MASS_TOL: f64 = 1e-9;
/// Tolerance for comparisons involving cumulative sums.
pub const CUM_TOL: f64 = 1e-12;

pub use dist::{Atom, FiniteDistribution};
pub use error::{Error, Result};
pub use grouped::{iid_power, iid_power_with_cap, GroupedDistribution, Level, Spectrum};
pub use measures::{
    entropy, info_quantile, kl_divergence, renyi_entropy, varentropy, variational_distance,
    SpectralQuantile,
};
pub use smooth::{g_delta, h_delta, h_div_upper, Method, SmoothEntropyResult, Witness};
