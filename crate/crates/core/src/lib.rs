//! Robust circular coordinates for recurrent point clouds and time series.
//!
//! The pipeline detects a dominant loop in a point cloud with persistent
//! cohomology and turns its representative cocycle into a circle-valued
//! coordinate. Sampling bias along the loop is corrected by repeatedly
//! subsampling the cloud with density-equalizing rejection sampling,
//! computing a coordinate per subsample, and averaging the ensemble after
//! aligning it over the orthogonal group O(2). Coordinate quality is scored
//! against a known parameter by mutual information, which is invariant to
//! the unavoidable rotation, reflection, and reparameterization gauges.
//!
//! Modules follow the data flow:
//!
//! * [`cloud`]: point-cloud container and CSV I/O.
//! * [`prep`]: synthetic generators and time-series embedding.
//! * [`density`]: density estimation and rejection subsampling.
//! * [`rips`]: Vietoris-Rips filtrations up to dimension 2.
//! * [`persistence`]: persistent cohomology, bar selection, integer lift.
//! * [`circular`]: harmonic smoothing and circle-valued coordinates.
//! * [`align`]: O(2) Procrustes alignment and ensemble averaging.
//! * [`evaluate`]: mutual-information and circular-error metrics.
//! * [`pipeline`]: end-to-end runs and reporting.

pub mod align;
pub mod circular;
pub mod cloud;
pub mod density;
pub mod evaluate;
pub mod persistence;
pub mod pipeline;
pub mod prep;
pub mod rips;
pub mod stream;
