//! Tooling for door-detection research on service robots.
//!
//! The crate covers the whole offline pipeline around a door detector:
//!
//! 1. [`grid`] – occupancy grids, mesh slicing, morphology, contour tracing,
//!    discrete Voronoi labeling and Zhang–Suen skeletonization.
//! 2. [`nav`] – navigation graph construction and perception-pose extraction.
//! 3. [`metrics`] – IoU, interpolated AP/mAP and the Operational Performance
//!    Indicators (TP%, FP%, BFD%).
//! 4. [`topo`] – door/observation association, majority-vote status inference,
//!    recognition accuracy and room topology graphs.
//! 5. [`dataset`] – file formats and dataset-preparation utilities.
//! 6. [`annot`] – the file-backed annotation session behind the labeling service.
//!
//! Detectors themselves are never run here; their output is consumed as data.

pub mod annot;
pub mod dataset;
pub mod grid;
pub mod metrics;
pub mod nav;
pub mod topo;

pub use grid::{Cell, CellState, GridFrame, GridMap};
pub use metrics::{BBox, Detection, DoorStatus, GroundTruthBox};
