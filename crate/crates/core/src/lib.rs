//! Numerical laboratory for the critical Choquard equation with a potential.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod energy;
pub mod ground_state;
pub mod io;
pub mod landscape;
pub mod par;
pub mod potential;
pub mod probe;
pub mod quad;
pub mod special;
pub mod spectral;

pub use num_complex::Complex64;
pub use spectral::{Field, Grid};
