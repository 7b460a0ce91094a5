//! A computational laboratory for singular measures and the additive
//! structure of their Fourier spectra.
//!
//! The crate is organized around two oracles for a measure (exact Fourier
//! coefficients and ball masses) and the objects built on them: thresholded
//! spectra and their 3-term progression counts, counting multilinear forms,
//! local-dimension estimators, subspace bundles on the sphere, and a worked
//! construction of a wave-cone operator whose annihilated measures have
//! dimension at least 3/2.

pub mod error;
pub mod rng;
pub mod measures;
pub mod configurations;
pub mod forms;
pub mod dimension;
pub mod poly;
pub mod sphere;
pub mod bundles;
pub mod construction;
pub mod experiments;

pub use error::{Error, Result};
