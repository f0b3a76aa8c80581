// SPDX-License-Identifier: Apache-2.0

//! File formats, configuration, reports and the experiment pipeline around
//! [`chartbeam_core`].
//!
//! * [`mod@format`]: the `CBDS` dataset, `CBCH` chart and `CBNN` checkpoint
//!   binary files.
//! * [`config`]: the TOML experiment configuration.
//! * [`pipeline`]: generate, chart, train and evaluate stages.
//! * [`report`]: CSV/SVG/TOML report artifacts.
//! * [`timing`]: inference timing.

// NaN must fail these checks, which `!(x > 0.0)` expresses directly
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod report;
pub mod timing;

pub use chartbeam_core as core;
pub use error::{PipelineError, Result};
