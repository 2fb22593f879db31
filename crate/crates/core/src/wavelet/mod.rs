//! Daubechies filters, cascade tables and interior tensor bases.

pub mod basis;
pub mod family;
pub mod filters;

pub use basis::{bar_project, minimal_coarse_level, project, BasisSpec, CoeffVector, TensorIndex};
pub use family::WaveletFamily;
