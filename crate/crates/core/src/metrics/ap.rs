use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{iou, Detection, DoorStatus, GroundTruthBox, MetricsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApMode {
    /// Mean of the interpolated precision at recall 0, 0.1, …, 1.
    Voc11,
    /// Area under the interpolated curve sampled at the eleven levels plus
    /// every recall where precision peaks.
    #[default]
    Enriched,
}

impl std::str::FromStr for ApMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voc11" => Ok(ApMode::Voc11),
            "enriched" => Ok(ApMode::Enriched),
            other => Err(format!("unknown AP mode {other:?} (expected voc11 or enriched)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApCurve {
    pub ap: f64,
    /// Raw (recall, precision) after each ranked detection.
    pub pr_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    /// Only classes with at least one ground truth appear here.
    pub per_class_ap: BTreeMap<DoorStatus, f64>,
    pub map_score: f64,
    pub pr_points: BTreeMap<DoorStatus, Vec<(f64, f64)>>,
}

/// Ranks detections of one class and matches them greedily to ground truth.
fn pr_curve(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    class: DoorStatus,
    rho_a: f64,
    rho_c: f64,
) -> Option<Vec<(f64, f64)>> {
    let mut by_image: HashMap<&str, Vec<(&GroundTruthBox, bool)>> = HashMap::new();
    let mut positives = 0usize;
    for g in gts.iter().filter(|g| g.label == class) {
        by_image.entry(&g.image_id).or_default().push((g, false));
        positives += 1;
    }
    if positives == 0 {
        return None;
    }
    let mut ranked: Vec<&Detection> = dets
        .iter()
        .filter(|d| d.label == class && d.confidence >= rho_c)
        .collect();
    // stable: equal confidences keep input order
    ranked.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::with_capacity(ranked.len());
    for d in ranked {
        let mut best: Option<(usize, f64)> = None;
        if let Some(cands) = by_image.get(d.image_id.as_str()) {
            for (j, (g, matched)) in cands.iter().enumerate() {
                if *matched {
                    continue;
                }
                let v = iou(&d.bbox, &g.bbox);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
        }
        match best {
            Some((j, v)) if v >= rho_a => {
                by_image.get_mut(d.image_id.as_str()).expect("image present")[j].1 = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        points.push((tp as f64 / positives as f64, tp as f64 / (tp + fp) as f64));
    }
    Some(points)
}

/// Interpolated precision: the best precision at any recall ≥ `r` (0 if none).
struct Interpolated {
    recalls: Vec<f64>,
    suffix_max: Vec<f64>,
}

impl Interpolated {
    fn new(points: &[(f64, f64)]) -> Self {
        let recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
        let mut suffix_max = vec![0.0; points.len()];
        let mut m: f64 = 0.0;
        for k in (0..points.len()).rev() {
            m = m.max(points[k].1);
            suffix_max[k] = m;
        }
        Self { recalls, suffix_max }
    }

    fn at(&self, r: f64) -> f64 {
        // recall is non-decreasing along the ranking
        let k = self.recalls.partition_point(|&x| x < r);
        self.suffix_max.get(k).copied().unwrap_or(0.0)
    }
}

fn recall_levels() -> impl Iterator<Item = f64> {
    (0..=10).map(|i| i as f64 / 10.0)
}

/// Points where precision peaks: not below the previous point and strictly
/// above the next one (endpoints compare against their single neighbour).
/// These are exactly the recalls after which the interpolated curve drops.
fn peak_recalls(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .filter(|&k| {
            let rises = k == 0 || points[k].1 >= points[k - 1].1;
            let falls = k + 1 == n || points[k].1 > points[k + 1].1;
            rises && falls
        })
        .map(|k| points[k].0)
        .collect()
}

fn integrate(points: &[(f64, f64)], mode: ApMode) -> f64 {
    let curve = Interpolated::new(points);
    match mode {
        ApMode::Voc11 => recall_levels().map(|r| curve.at(r)).sum::<f64>() / 11.0,
        ApMode::Enriched => {
            let mut samples: Vec<f64> = recall_levels().chain(peak_recalls(points)).collect();
            samples.sort_by(f64::total_cmp);
            samples.dedup();
            let mut prev = 0.0;
            let mut area = 0.0;
            for r in samples {
                area += (r - prev) * curve.at(r);
                prev = r;
            }
            area
        }
    }
}

/// AP of one class, or `None` when the class has no ground truth.
///
/// Detections below `rho_c` are dropped before ranking; a detection is a true
/// positive when the best still-unmatched door of its class in its image
/// overlaps it by at least `rho_a`.
pub fn average_precision(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    class: DoorStatus,
    rho_a: f64,
    rho_c: f64,
    mode: ApMode,
) -> Option<ApCurve> {
    let pr_points = pr_curve(gts, dets, class, rho_a, rho_c)?;
    Some(ApCurve { ap: integrate(&pr_points, mode), pr_points })
}

/// Mean AP over the classes that occur in the ground truth.
pub fn map_score(
    gts: &[GroundTruthBox],
    dets: &[Detection],
    rho_a: f64,
    rho_c: f64,
    mode: ApMode,
) -> Result<ApReport, MetricsError> {
    if gts.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let mut per_class_ap = BTreeMap::new();
    let mut pr_points = BTreeMap::new();
    for class in DoorStatus::ALL {
        if let Some(c) = average_precision(gts, dets, class, rho_a, rho_c, mode) {
            per_class_ap.insert(class, c.ap);
            pr_points.insert(class, c.pr_points);
        }
    }
    let map_score = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(ApReport { per_class_ap, map_score, pr_points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::BBox;

    fn gt(img: &str, x: f64, label: DoorStatus) -> GroundTruthBox {
        GroundTruthBox { image_id: img.into(), bbox: BBox::new(x, 0.0, 10.0, 10.0).unwrap(), label }
    }

    fn det(img: &str, x: f64, label: DoorStatus, confidence: f64) -> Detection {
        Detection { image_id: img.into(), bbox: BBox::new(x, 0.0, 10.0, 10.0).unwrap(), label, confidence }
    }

    const OPEN: DoorStatus = DoorStatus::Open;

    #[test]
    fn single_correct_detection() {
        let g = [gt("a", 0.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.9)];
        for mode in [ApMode::Voc11, ApMode::Enriched] {
            assert_eq!(average_precision(&g, &d, OPEN, 0.5, 0.75, mode).unwrap().ap, 1.0);
        }
    }

    #[test]
    fn half_recall_voc11_is_six_elevenths() {
        let g = [gt("a", 0.0, OPEN), gt("a", 50.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.9)];
        let c = average_precision(&g, &d, OPEN, 0.5, 0.75, ApMode::Voc11).unwrap();
        assert!((c.ap - 6.0 / 11.0).abs() < 1e-15);
        let e = average_precision(&g, &d, OPEN, 0.5, 0.75, ApMode::Enriched).unwrap();
        assert!((e.ap - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trailing_false_positive_does_not_hurt() {
        let g = [gt("a", 0.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.9), det("a", 40.0, OPEN, 0.8)];
        let c = average_precision(&g, &d, OPEN, 0.5, 0.75, ApMode::Voc11).unwrap();
        assert_eq!(c.ap, 1.0);
        assert_eq!(c.pr_points, vec![(1.0, 1.0), (1.0, 0.5)]);
    }

    #[test]
    fn plateau_end_is_sampled() {
        // TP, TP, FP, TP over 3 doors: the curve drops right after recall 2/3
        let g = [gt("a", 0.0, OPEN), gt("a", 20.0, OPEN), gt("a", 40.0, OPEN)];
        let d = [
            det("a", 0.0, OPEN, 0.95),
            det("a", 20.0, OPEN, 0.9),
            det("a", 80.0, OPEN, 0.85),
            det("a", 40.0, OPEN, 0.8),
        ];
        let c = average_precision(&g, &d, OPEN, 0.5, 0.0, ApMode::Enriched).unwrap();
        let exact = 2.0 / 3.0 + (1.0 / 3.0) * 0.75;
        assert!((c.ap - exact).abs() < 1e-12, "{} vs {exact}", c.ap);
    }

    #[test]
    fn confidence_gate_applies_before_ranking() {
        let g = [gt("a", 0.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.5)];
        assert_eq!(average_precision(&g, &d, OPEN, 0.5, 0.75, ApMode::Voc11).unwrap().ap, 0.0);
        assert_eq!(average_precision(&g, &d, OPEN, 0.5, 0.0, ApMode::Voc11).unwrap().ap, 1.0);
    }

    #[test]
    fn matching_is_one_to_one() {
        let g = [gt("a", 0.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.9), det("a", 0.0, OPEN, 0.8)];
        let c = average_precision(&g, &d, OPEN, 0.5, 0.0, ApMode::Voc11).unwrap();
        assert_eq!(c.pr_points[1], (1.0, 0.5));
    }

    #[test]
    fn absent_class_is_excluded() {
        let g = [gt("a", 0.0, OPEN)];
        assert!(average_precision(&g, &[], DoorStatus::Closed, 0.5, 0.75, ApMode::Voc11).is_none());
        let r = map_score(&g, &[det("a", 0.0, OPEN, 0.9)], 0.5, 0.75, ApMode::Voc11).unwrap();
        assert_eq!(r.map_score, 1.0);
        assert_eq!(r.per_class_ap.len(), 1);
    }

    #[test]
    fn map_averages_classes() {
        let g = [gt("a", 0.0, OPEN), gt("a", 50.0, OPEN), gt("b", 0.0, DoorStatus::Closed)];
        let d = [det("a", 0.0, OPEN, 0.9)];
        let r = map_score(&g, &d, 0.5, 0.75, ApMode::Voc11).unwrap();
        assert_eq!(r.per_class_ap[&DoorStatus::Closed], 0.0);
        assert!((r.map_score - 3.0 / 11.0).abs() < 1e-15);

        let both = [gt("a", 0.0, OPEN), gt("b", 0.0, DoorStatus::Closed)];
        let dd = [det("a", 0.0, OPEN, 0.9), det("b", 0.0, DoorStatus::Closed, 0.9)];
        assert_eq!(map_score(&both, &dd, 0.5, 0.75, ApMode::Enriched).unwrap().map_score, 1.0);
        assert_eq!(map_score(&[], &dd, 0.5, 0.75, ApMode::Enriched), Err(MetricsError::EmptyGroundTruth));
    }

    #[test]
    fn enriched_without_extra_peaks_equals_level_riemann_sum() {
        // peaks at recall 0.5 and 1.0 only, both already on the 11-level grid
        let g = [gt("a", 0.0, OPEN), gt("a", 20.0, OPEN)];
        let d = [det("a", 0.0, OPEN, 0.9), det("a", 90.0, OPEN, 0.85), det("a", 20.0, OPEN, 0.8)];
        let c = average_precision(&g, &d, OPEN, 0.5, 0.0, ApMode::Enriched).unwrap();
        let curve = Interpolated::new(&c.pr_points);
        let riemann: f64 = (1..=10).map(|i| 0.1 * curve.at(i as f64 / 10.0)).sum();
        assert!((c.ap - riemann).abs() < 1e-12);
    }
}
