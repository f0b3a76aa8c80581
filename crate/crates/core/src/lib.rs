// SPDX-License-Identifier: Apache-2.0

//! Channel charting and chart-based beam prediction.
//!
//! The pipeline implemented here runs in four stages:
//!
//! 1. [`channel`] synthesizes multi-BS, multicarrier UPA channels from a
//!    geometric line-of-sight plus single-bounce model.
//! 2. [`codebook`] builds oversampled 2D-DFT codebooks and ranks beams
//!    against downlink channels, which gives the training labels.
//! 3. [`chart`] compresses uplink channels measured at the first BS into
//!    low-dimensional pseudo-locations with ISOMAP, and embeds new channels
//!    through a convex combination of calibration pseudo-locations.
//! 4. [`neural`] and [`predict`] map pseudo-locations to beams or precoders
//!    at every BS; [`metrics`] scores the result.
//!
//! The crate is `no_std` (with `alloc`) so the algorithmic core can be
//! embedded anywhere. File formats, reports and the CLI live in the
//! `chartbeam` crate.
// NaN must fail these checks, which `!(x > 0.0)` expresses directly
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod chart;
pub mod codebook;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod neural;
pub mod predict;
pub mod seed;

pub use error::{Error, Result};

/// Complex sample type used for stored channels (two 32-bit floats).
pub type C32 = num_complex::Complex32;
/// Complex type used for all arithmetic.
pub type C64 = num_complex::Complex64;
