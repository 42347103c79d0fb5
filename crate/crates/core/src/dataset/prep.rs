use std::collections::{BTreeSet, VecDeque};

use super::DatasetError;
use crate::metrics::BBox;

/// Frames whose door fraction is below this are dropped.
pub const DOOR_FRACTION_THRESHOLD: f64 = 0.025;
pub const DEFAULT_MIN_AREA: usize = 20;

/// Per-pixel class ids, rows top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFrame {
    pub width: usize,
    pub height: usize,
    pub class_of: Vec<u32>,
    pub door_class_ids: BTreeSet<u32>,
}

impl SemanticFrame {
    pub fn new(
        width: usize,
        height: usize,
        class_of: Vec<u32>,
        door_class_ids: BTreeSet<u32>,
    ) -> Result<Self, DatasetError> {
        if class_of.len() != width * height {
            return Err(DatasetError::Invalid(format!(
                "frame is {width}x{height} but has {} pixels",
                class_of.len()
            )));
        }
        Ok(Self { width, height, class_of, door_class_ids })
    }

    fn door_mask(&self) -> Vec<bool> {
        self.class_of.iter().map(|c| self.door_class_ids.contains(c)).collect()
    }
}

pub fn door_pixel_fraction(frame: &SemanticFrame) -> Result<f64, DatasetError> {
    if frame.class_of.is_empty() {
        return Err(DatasetError::Invalid("zero-size frame".into()));
    }
    let doors = frame.class_of.iter().filter(|c| frame.door_class_ids.contains(c)).count();
    Ok(doors as f64 / frame.class_of.len() as f64)
}

/// True when at least `threshold` of the pixels are door pixels.
pub fn keep_frame(frame: &SemanticFrame, threshold: f64) -> Result<bool, DatasetError> {
    Ok(door_pixel_fraction(frame)? >= threshold)
}

/// Bounding box of each 4-connected door component with at least `min_area`
/// pixels, in order of each component's first pixel in raster order.
pub fn propose_boxes(frame: &SemanticFrame, min_area: usize) -> Vec<BBox> {
    let (w, h) = (frame.width, frame.height);
    let mut mask = frame.door_mask();
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] {
            continue;
        }
        mask[start] = false;
        queue.push_back(start);
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            area += 1;
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
            let mut visit = |j: usize| {
                if mask[j] {
                    mask[j] = false;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if area >= min_area {
            boxes.push(BBox {
                x: c0 as f64,
                y: r0 as f64,
                w: (c1 - c0 + 1) as f64,
                h: (r1 - r0 + 1) as f64,
            });
        }
    }
    boxes
}
