//! Numerical laboratory for gradient blowup in the fractal Burgers equation
//! `∂_t u + u ∂_x u + (-Δ)^α u = 0`.

// `!(x > 0.0)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fraclap;
pub mod grid;
pub mod oracle;
pub mod physical;
pub mod profiles;
pub mod quadrature;
pub mod selfsim;
pub mod singular;
pub mod special;

pub use error::{Error, Result};
pub use fraclap::Alpha;
pub use grid::{Field, Grid, Spectrum};
pub use profiles::ProfileNu;
