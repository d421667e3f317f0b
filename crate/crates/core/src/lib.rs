//! Weighted simultaneous orthogonal matching pursuit (SOMP-NS) for jointly
//! sparse signals observed under per-vector Gaussian noise.
//!
//! - [`dictionary`]: dictionaries and their conditioning metrics.
//! - [`recovery`]: SOMP-NS, plain SOMP and OMP.
//! - [`bounds`]: recovery-probability bounds and optimal weights.
//! - [`experiments`]: seeded Monte Carlo sweeps and fits.

pub mod bounds;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod matrix_io;
pub mod recovery;
pub mod rng;
pub mod support;

pub use bounds::NoiseSpec;
pub use dictionary::Dictionary;
pub use error::{Error, Result};
pub use recovery::{somp, somp_ns, somp_ns_prescaled, RecoveryTrace, WeightVector};
pub use support::Support;
