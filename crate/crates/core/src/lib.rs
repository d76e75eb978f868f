//! Numerical laboratory for random linear projections of discrete point sets.
//!
//! A sequence `v_k` in `C^n` (or `R^n`) whose growth series `sum |v_k|^{-s}`
//! converges for the right exponent has a discrete image under a Haar-random
//! linear projection with probability one. This crate generates such point
//! sets, checks the growth series, samples Haar-random projections, measures
//! how discrete their images look on finite truncations, and checks the
//! supporting inequalities (spherical cap scaling, union/counting bounds,
//! coordinate-splitting displacement bounds) numerically.
//!
//! Modules:
//! - [`point`]: vectors, point sets, norms, pairwise gaps
//! - [`generators`]: lattices, perturbed lattices, power-law sequences
//! - [`growth`]: partial sums, counting functions, exponent estimates
//! - [`sampling`]: Haar sampling, sphere sampling, cap measures
//! - [`projector`]: projections, separation reports, projection search
//! - [`splitmap`]: the coordinate-splitting map and its bounds
//! - [`io`]: JSONL point-set files, CSV and JSON output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generators;
pub mod growth;
pub mod io;
pub mod point;
pub mod projector;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod splitmap;
pub mod stats;

pub use error::{Error, Result};
pub use point::{FieldTag, PointSet, Vector};
pub use rng::RngStream;
pub use stats::MomentAccumulator;
