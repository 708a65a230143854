//! Latency/quality co-optimization for multi-view 3D reconstruction on two
//! collaborating edge nodes.
//!
//! The crate is organized around the stages of the optimized pipeline:
//!
//! - [`pointcloud`]: colored clouds, PLY I/O, pinhole projection, and the
//!   foreground/background split and merge.
//! - [`segmentation`]: running-Gaussian background model, foreground masks,
//!   k-means clustering of dynamic regions.
//! - [`camselect`]: visibility matrix, key-point selection, and the exact
//!   "covered by at least two cameras" subset selection.
//! - [`quality`]: precision, recall and F-score against a golden cloud.
//! - [`controller`]: the online bi-section configuration search and the
//!   minor-adjustment feedback law.
//! - [`sim`]: latency/quality surfaces and a deterministic two-node replay.
//! - [`cli`]: the `reconopt` command-line front end.
//!
//! The guide under `book/` walks through each stage; its code listings are
//! compiled and run as doc tests of this crate.

pub mod camselect;
pub mod cli;
pub mod controller;
pub mod pgm;
pub mod pointcloud;
pub mod quality;
pub mod segmentation;
pub mod sim;

pub use camselect::{CameraMap, SelectionSolution, VisibilityMatrix};
pub use controller::{ControllerState, Observation, PipelineConfig};
pub use pointcloud::{CameraModel, CloudLabel, ForegroundMask, Point3, PointCloud};
pub use quality::QualityReport;
pub use sim::{Scenario, ScenarioParams, TaskStream};

/// Book chapters, compiled as doc tests so that the guide never drifts from
/// the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/point-clouds.md")]
    mod point_clouds {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/camera-selection.md")]
    mod camera_selection {}
    #[doc = include_str!("../../../book/src/quality.md")]
    mod quality {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
