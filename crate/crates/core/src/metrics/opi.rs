use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{iou, Detection, GroundTruthBox, MetricsError};

/// Confidence (`rho_c`) and IoU (`rho_a`) thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpiConfig {
    pub rho_c: f64,
    pub rho_a: f64,
}

impl Default for OpiConfig {
    fn default() -> Self {
        Self { rho_c: 0.75, rho_a: 0.5 }
    }
}

impl OpiConfig {
    pub fn new(rho_c: f64, rho_a: f64) -> Result<Self, MetricsError> {
        for (name, v) in [("rho_c", rho_c), ("rho_a", rho_a)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::InvalidThreshold(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(Self { rho_c, rho_a })
    }
}

/// Outcome of one image, as indices into its detection list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImageOpi {
    pub tp: Vec<usize>,
    pub fp: Vec<usize>,
    pub bfd: Vec<usize>,
    /// Confident, well-localized predictions that lost to a more confident one
    /// for the same door.
    pub discarded: Vec<usize>,
}

/// Classifies the confident detections of a single image.
///
/// Confident detections whose best IoU is below `rho_a` are background false
/// detections. Each other detection goes to its best-overlapping door (ties to
/// the lowest index); per door only the most confident one counts (ties to the
/// earliest), as a TP when its label matches and an FP otherwise.
pub fn opi_image(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    cfg: &OpiConfig,
) -> Result<ImageOpi, MetricsError> {
    let first = gts
        .first()
        .map(|g| &g.image_id)
        .or_else(|| dets.first().map(|d| &d.image_id));
    if let Some(id) = first {
        let ids = gts.iter().map(|g| &g.image_id).chain(dets.iter().map(|d| &d.image_id));
        if let Some(other) = ids.into_iter().find(|x| *x != id) {
            return Err(MetricsError::CrossImage {
                expected: id.clone(),
                found: other.clone(),
            });
        }
    }

    let mut out = ImageOpi::default();
    let mut claims: Vec<Vec<usize>> = vec![Vec::new(); gts.len()];
    for (k, d) in dets.iter().enumerate() {
        if d.confidence < cfg.rho_c {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            let v = iou(&d.bbox, &g.bbox);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((j, v));
            }
        }
        match best {
            Some((j, v)) if v >= cfg.rho_a => claims[j].push(k),
            _ => out.bfd.push(k),
        }
    }
    for (j, claimants) in claims.iter().enumerate() {
        let Some(&winner) = claimants
            .iter()
            .reduce(|a, b| if dets[*b].confidence > dets[*a].confidence { b } else { a })
        else {
            continue;
        };
        if dets[winner].label == gts[j].label {
            out.tp.push(winner);
        } else {
            out.fp.push(winner);
        }
        out.discarded.extend(claimants.iter().copied().filter(|&k| k != winner));
    }
    out.tp.sort_unstable();
    out.fp.sort_unstable();
    out.discarded.sort_unstable();
    Ok(out)
}

/// Dataset-level indicators. Rates are fractions of `y_bar`, the total number
/// of ground-truth doors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpiReport {
    pub tp_count: usize,
    pub fp_count: usize,
    pub bfd_count: usize,
    pub y_bar: usize,
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub bfd_rate: f64,
    /// Set when `y_bar` is zero; the rates are then reported as 0.
    pub undefined: bool,
}

pub fn opi_aggregate(per_image: &[ImageOpi], y_bar: usize) -> OpiReport {
    let tp_count = per_image.iter().map(|r| r.tp.len()).sum();
    let fp_count = per_image.iter().map(|r| r.fp.len()).sum();
    let bfd_count = per_image.iter().map(|r| r.bfd.len()).sum();
    let rate = |n: usize| if y_bar == 0 { 0.0 } else { n as f64 / y_bar as f64 };
    OpiReport {
        tp_count,
        fp_count,
        bfd_count,
        y_bar,
        tp_rate: rate(tp_count),
        fp_rate: rate(fp_count),
        bfd_rate: rate(bfd_count),
        undefined: y_bar == 0,
    }
}

/// Groups records by image and runs [`opi_image`] on each group.
pub fn evaluate_opi(gts: &[GroundTruthBox], dets: &[Detection], cfg: &OpiConfig) -> OpiReport {
    let mut groups: BTreeMap<&str, (Vec<GroundTruthBox>, Vec<Detection>)> = BTreeMap::new();
    for g in gts {
        groups.entry(&g.image_id).or_default().0.push(g.clone());
    }
    for d in dets {
        groups.entry(&d.image_id).or_default().1.push(d.clone());
    }
    let per_image: Vec<ImageOpi> = groups
        .values()
        .map(|(g, d)| opi_image(g, d, cfg).expect("records grouped by image"))
        .collect();
    opi_aggregate(&per_image, gts.len())
}

/// One report per confidence threshold, in the given order.
pub fn confidence_sweep(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    rho_a: f64,
    thresholds: &[f64],
) -> Vec<(f64, OpiReport)> {
    thresholds
        .iter()
        .map(|&t| (t, evaluate_opi(gts, dets, &OpiConfig { rho_c: t, rho_a })))
        .collect()
}
