//! Rolling occupancy grid maps and static free-space extraction for
//! automotive laser scanners.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. A frame of
//! processing runs through these stages:
//!
//! 1. [`scan`]: clutter removal with DBSCAN and virtual points for
//!    unreflected beams.
//! 2. [`alignment`]: the vehicle is kept on a speed-dependent circle inside
//!    a non-rotating local map that only ever shifts by whole cells.
//! 3. [`ism`]: the full scan is rasterized as one polygon so that every
//!    cell receives at most one Bayes update per scan.
//! 4. [`freespace`]: hysteresis binarization, morphological opening and
//!    in-sight edge detection yield one sorted boundary.
//! 5. [`simplify`]: Douglas-Peucker with a hard vertex budget.
//!
//! [`pipeline::Pipeline`] wires the stages together.

#![cfg_attr(not(test), no_std)]
// NaN-rejecting range checks read best as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod alignment;
pub mod freespace;
pub mod geom;
pub mod grid;
pub mod ism;
pub mod line;
pub mod pipeline;
pub mod scan;
pub mod simplify;

pub use alignment::{CircleConfig, PositionCircle, SpeedFilter};
pub use freespace::{BinaryMap, Connectivity, EdgeCell, EdgeIndexGrid};
pub use geom::{GridPose, Point2, Pose2D};
pub use grid::{IsmConfig, OccupancyGrid, ProbabilityMap};
pub use ism::{Rasterizer, UpdateStats};
pub use pipeline::{FrameEvent, FrameOutput, OdometryRecord, Pipeline, PipelineConfig};
pub use scan::{DbscanParams, FullScan, PointKind, ScanPoint};
pub use simplify::FreeSpacePolygon;
