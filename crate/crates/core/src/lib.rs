//! Scoring rules for spatial point processes.
//!
//! The crate simulates point patterns from Poisson, Strauss, Neyman–Scott
//! cluster, log-Gaussian Cox and mixture models, estimates summary
//! statistics (kernel intensity, Ripley's K, the empty-space function F),
//! scores forecasts against observed patterns with CRPS-type, log and
//! intensity-likelihood scores, compares forecasts with a paired permutation
//! test and fits cluster models by minimum contrast.

pub mod error;
pub mod fitting;
pub mod estimate;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod intensity;
pub mod io;
pub mod numeric;
pub mod rng;
pub mod scoring;
pub mod simulate;

pub use error::{Error, Result};
pub use geometry::{Point, PointPattern, RGrid, Window};
pub use intensity::IntensityFn;
pub use simulate::{ModelSpec, PreparedModel};
