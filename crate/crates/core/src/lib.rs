//! Moment and cumulant algebra for homoscedastic Gaussian mixtures:
//! identifiability analysis through secant-variety dimensions, and
//! method-of-moments parameter recovery.

pub mod error;
pub mod estimate;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod poly;
pub mod ranktest;
pub mod scalar;
pub mod tps;

pub use error::{Error, Result};
pub use scalar::{Dual, Fp, Scalar};
pub use tps::{Layout, MultiIndex, Space, TruncatedSeries};
