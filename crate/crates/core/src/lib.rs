//! Change point detection and source localization for multivariate series
//! whose per-component change regions follow a parametric plume geometry.
//!
//! The crate provides two aggregation statistics over a grid of plume
//! parameters: a multivariate quadratic form of centered region sums and a
//! projection onto an assumed change direction. Both come with grid-maximizing
//! estimators, long-run variance plug-ins and Monte Carlo null tables built
//! from Brownian bridges.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cov;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod limits;
pub mod lrv;
mod par;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use cov::{CovKind, CovModel, Provenance};
pub use error::{Error, Result};
pub use estimate::{
    estimate_multivariate, estimate_projection, reduce_surface, Estimate, StatSurface,
};
pub use geometry::{
    build_grid, linear_change_map, ChangeMap, GridMode, GridSpec, ParamGrid, PlumeParams, Transect,
    TransectLayout,
};
pub use limits::{mc_null_multivariate, mc_null_projection, p_value, NullTable, StatKind};
pub use lrv::{diag_cov, epidemic_fit, flat_top_lrv, projected_sigma, EpidemicFit, LrvEstimate};
pub use simulate::{gen_dataset, ErrorModel, SimDesign};
pub use stats::{
    t_multivariate, t_projection, MultiSeries, ProjectionDirection, ScanOutcome, Truth,
    WeightScheme, WeightSpec,
};
