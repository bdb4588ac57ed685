//! Detection of deformable linear objects (cables, ropes, wires) in a single
//! image, returned as chains of fixed-length segments.
//!
//! Stages: color segmentation, thinning, border following, chain fitting,
//! overlap pruning and greedy cost-based merging with gap filling.

pub mod chainfit;
pub mod cli;
pub mod contour;
pub mod geom;
pub mod merge;
pub mod pipeline;
pub mod raster;
pub mod skeletonize;
pub mod synthbench;
