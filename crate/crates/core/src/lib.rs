//! Sketch-and-validate K-means clustering.
//!
//! The crate clusters data that is too large in dimension (`D`) or in number
//! of points (`N`) by running K-means on small random sketches and scoring
//! each sketch on held-out validation data:
//!
//! * [`skeva_dims`]: batch and sequential sketching of dimensions, scored by
//!   validation-set size and Fisher's discriminant ratio.
//! * [`keskeva`]: kernel K-means on point sketches.
//! * [`diskeva`]: draw selection by Cauchy-Schwarz divergence between Parzen
//!   estimates, with a single K-means on the chosen draw.
//! * [`bench`]: synthetic data, relative accuracy, a random-projection
//!   baseline and a Monte-Carlo experiment runner.

pub mod data;
pub mod error;
pub mod kernels;
pub mod kmeans;
pub mod skeva_dims;
pub mod keskeva;
pub mod diskeva;
pub mod bench;

pub use data::{DataMatrix, IndexSet, RngSeed};
pub use error::{Error, Result};
pub use kmeans::{Clustering, KMeansConfig};
