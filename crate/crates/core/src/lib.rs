//! Reflection-based bmo extension for planar uniformly C² domains, with
//! grid seminorm estimators and the supporting geometry.

pub mod covering;
pub mod extension;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod vector_extension;
