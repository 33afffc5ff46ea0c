//! Reconstruction of surface immersions from prescribed first and second
//! fundamental forms, at desk scale on rectangular grids.
//!
//! The pipeline builds the antisymmetric connection one-form from the
//! form fields, integrates the frame system `dP = P Omega` over the grid,
//! recovers the immersion as a potential of `P g_i`, and cross-checks the
//! structural identities along the way: antisymmetry of the coefficients,
//! equivalence of the compatibility conditions, uniqueness up to rigid
//! motion, and convergence behaviour of families of immersions.

pub mod coefficients;
pub mod compatibility;
pub mod corpus;
pub mod error;
pub mod grid;
pub mod gridio;
pub mod obj;
pub mod pfaffian;
pub mod potential;
pub mod reconstruction;
pub mod smallmat;
pub mod sweep;

pub use error::{Error, Result};
