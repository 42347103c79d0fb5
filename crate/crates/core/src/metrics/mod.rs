//! Detection evaluation: IoU, interpolated AP/mAP and the Operational
//! Performance Indicators (TP%, FP%, BFD%).

mod ap;
mod opi;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap::{average_precision, map_score, ApCurve, ApMode, ApReport};
pub use opi::{
    confidence_sweep, evaluate_opi, opi_aggregate, opi_image, ImageOpi, OpiConfig, OpiReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cross-image input: expected image {expected:?}, found {found:?}")]
    CrossImage { expected: String, found: String },
    #[error("empty ground truth")]
    EmptyGroundTruth,
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
}

/// Traversability of a door.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorStatus {
    Open,
    Closed,
}

impl DoorStatus {
    pub const ALL: [DoorStatus; 2] = [DoorStatus::Open, DoorStatus::Closed];

    pub fn as_str(self) -> &'static str {
        match self {
            DoorStatus::Open => "open",
            DoorStatus::Closed => "closed",
        }
    }
}

impl fmt::Display for DoorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DoorStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(DoorStatus::Open),
            "closed" => Ok(DoorStatus::Closed),
            other => Err(format!("unknown door status {other:?} (expected \"open\" or \"closed\")")),
        }
    }
}

/// Axis-aligned box in pixels: top-left corner plus size. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err("box coordinates must be finite".into());
        }
        if w < 0.0 || h < 0.0 {
            return Err(format!("box size must be non-negative, got {w}x{h}"));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clips the box to `[0, width] × [0, height]`. Boxes already inside are
    /// returned unchanged, and clipping twice gives the same box as once.
    pub fn clamped(&self, width: f64, height: f64) -> BBox {
        let (x, w) = clamp_span(self.x, self.w, width);
        let (y, h) = clamp_span(self.y, self.h, height);
        BBox { x, y, w, h }
    }
}

fn clamp_span(start: f64, len: f64, limit: f64) -> (f64, f64) {
    if start >= 0.0 && start + len <= limit {
        return (start, len);
    }
    let a = start.clamp(0.0, limit);
    let mut len = ((start + len).clamp(0.0, limit) - a).max(0.0);
    while a + len > limit {
        len = len.next_down();
    }
    (a, len)
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = String;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub bbox: BBox,
    pub label: DoorStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub image_id: String,
    pub bbox: BBox,
    pub label: DoorStatus,
    pub confidence: f64,
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
