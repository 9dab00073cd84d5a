//! Recovery of mixtures of sparse linear classifiers from 1-bit responses.
//!
//! An oracle holds `ell` unknown `k`-sparse unit vectors. Each query `v`
//! is answered by `sign(<v, beta>)` for a component `beta` chosen uniformly
//! at random. The crate builds non-adaptive query batteries from randomized
//! set families, recovers the supports of all components, and estimates the
//! components themselves to a target accuracy.

pub mod error;
pub mod harness;
pub mod oracle;
pub mod params;
pub mod recovery;
pub mod rng;
pub mod setfam;
pub mod support;
pub mod two_mix;

pub use error::{Error, Result};
