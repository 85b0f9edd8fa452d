//! Assouad dimension and regularized Assouad spectrum of planar point sets,
//! their behaviour under holomorphic and quasiregular maps, and porosity.

pub mod cmaps;
pub mod covering;
pub mod dimension;
pub mod error;
pub mod harness;
pub mod pointset;
pub mod porosity;
pub mod refine;

pub use error::{Error, Result};
pub use pointset::{generate, Point, PointSet, SetSpec, Similarity};
