//! Models for teleporting a qubit between two remote single-atom memories
//! through a linear-optics Bell-state measurement.
//!
//! The crate is `no_std` with `alloc`; the `std` feature (on by default)
//! only forwards to dependencies. File formats, the campaign engine and the
//! command-line tool live in the `teleportsim` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bsm;
pub mod error;
pub mod photonics;
pub mod protocol;
pub mod qubit;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex<f64>;
