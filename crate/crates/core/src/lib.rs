//! Synthetic side scan sonar shipwreck generation and zero-shot segmentation
//! evaluation kernels.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or image codecs lives in the `sonarwreck` companion
//! crate; this one holds the math:
//!
//! - [`scene`]: meshes, materials and randomized wreck placement,
//! - [`sonar`]: the SONAR-equation ray caster producing waterfall images,
//!   label masks and acoustic shadow masks,
//! - [`deformation`]: quadrant deformation fields, their one-hot encoding and
//!   the forward warp that fractures a wreck into debris,
//! - [`compositor`]: pasting fractured renders onto terrain and tiling scans,
//! - [`anomaly`]: terrain prototypes and cosine-distance anomaly volumes,
//! - [`losses`]: the closed-form training losses,
//! - [`eval`]: IOU/F1 with per-site macro averaging,
//! - [`pipeline`]: one seeded, pure sample synthesis pass.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod anomaly;
pub mod bvh;
pub mod compositor;
pub mod deformation;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod losses;
pub mod math;
pub mod mesh;
pub mod pipeline;
pub mod seed;
pub mod scene;
pub mod sonar;

pub use grid::{Grid, GrayImage, LabelMask, ShadowMask};
