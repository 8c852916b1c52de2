//! Sequential-measurement quantum thermometry.
//!
//! A two-level probe is repeatedly prepared, dephased by a thermal bath
//! for a window `t` and read out along `cos θ x̂ + sin θ ŷ`. Low-frequency
//! bath noise correlates successive outcomes, and those correlations carry
//! temperature information that independent shots do not.
//!
//! Modules, bottom-up:
//! - [`bath`]: spectral densities, Bose factors and `g²`,
//! - [`correlations`]: window-integrated correlation blocks and their β-derivatives,
//! - [`sequential`]: joint outcome statistics (first-order model, exact path sum, sampler),
//! - [`estimation`]: score, Fisher/QSNR bounds, MLE,
//! - [`spectroscopy`]: lag and spectrum reconstruction from records,
//! - [`io`]: file formats.

// `!(x > 0.0)` is how inputs reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod correlations;
pub mod error;
pub mod estimation;
pub mod io;
pub mod par;
pub mod quadrature;
pub mod sequential;
pub mod spectroscopy;

pub use error::{Error, Result};
pub use par::Execution;
