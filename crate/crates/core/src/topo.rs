//! Door status inference along a robot run and the resulting room topology.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridMap;
use crate::metrics::DoorStatus;

#[derive(Debug, Error, PartialEq)]
pub enum TopoError {
    #[error("unknown door ids in votes: {}", .0.join(", "))]
    UnknownDoors(Vec<String>),
    #[error("empty door set")]
    NoDoors,
    #[error("node sets differ: {0}")]
    NodeMismatch(String),
    #[error("invalid door {id}: {msg}")]
    InvalidDoor { id: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorRecord {
    pub door_id: String,
    pub center: [f64; 2],
    pub rooms: [String; 2],
    pub true_status: DoorStatus,
}

impl DoorRecord {
    pub fn validate(&self) -> Result<(), TopoError> {
        let invalid = |msg: &str| TopoError::InvalidDoor { id: self.door_id.clone(), msg: msg.into() };
        if self.rooms[0] == self.rooms[1] {
            return Err(invalid("rooms must be distinct"));
        }
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err(invalid("center must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vote {
    pub door_id: String,
    pub label: DoorStatus,
}

/// One image of the run: where it was taken and which doors the detector
/// reported, already associated to door instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub image_id: String,
    /// `[x, y, theta]`
    pub pose: [f64; 3],
    #[serde(default)]
    pub votes: Vec<Vote>,
    /// Doors inside the camera's view for this image, voted on or not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_view: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    CorrectOpen,
    CorrectClosed,
    WrongStatus,
    Undecided,
    /// In view at least once but never detected.
    Undetected,
    /// Never in view.
    Unobserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorVerdict {
    pub door_id: String,
    pub open_votes: usize,
    pub closed_votes: usize,
    /// Majority label, `None` on ties or without votes.
    pub inferred: Option<DoorStatus>,
    pub outcome: Outcome,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Doors visible from `pose = [x, y, theta]`: within `max_range`, within
/// ±`fov`/2 of the heading, and with no blocked cell on the grid ray between
/// the camera and the door (the door's own cell excluded).
pub fn associate(
    pose: [f64; 3],
    doors: &[DoorRecord],
    map: &GridMap,
    fov: f64,
    max_range: f64,
) -> Vec<String> {
    let [x, y, theta] = pose;
    doors
        .iter()
        .filter(|d| {
            let (dx, dy) = (d.center[0] - x, d.center[1] - y);
            let range = dx.hypot(dy);
            if range > max_range {
                return false;
            }
            if range > 0.0 && wrap_angle(dy.atan2(dx) - theta).abs() > fov / 2.0 + 1e-12 {
                return false;
            }
            let target = map.frame().world_to_cell(d.center[0], d.center[1]);
            !map
                .segment_cells((x, y), (d.center[0], d.center[1]))
                .into_iter()
                .filter(|c| Some(*c) != target)
                .any(|c| map.get(c).is_blocked())
        })
        .map(|d| d.door_id.clone())
        .collect()
}

/// Tallies votes per door and classifies the majority against the true status.
pub fn majority_vote(
    doors: &[DoorRecord],
    observations: &[Observation],
) -> Result<Vec<DoorVerdict>, TopoError> {
    let mut tallies: BTreeMap<&str, (usize, usize, bool)> =
        doors.iter().map(|d| (d.door_id.as_str(), (0, 0, false))).collect();
    let mut unknown = BTreeSet::new();
    for obs in observations {
        for v in &obs.votes {
            match tallies.get_mut(v.door_id.as_str()) {
                Some(t) => {
                    match v.label {
                        DoorStatus::Open => t.0 += 1,
                        DoorStatus::Closed => t.1 += 1,
                    }
                    t.2 = true;
                }
                None => {
                    unknown.insert(v.door_id.clone());
                }
            }
        }
        for id in obs.in_view.iter().flatten() {
            match tallies.get_mut(id.as_str()) {
                Some(t) => t.2 = true,
                None => {
                    unknown.insert(id.clone());
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(TopoError::UnknownDoors(unknown.into_iter().collect()));
    }

    Ok(doors
        .iter()
        .map(|d| {
            let (open_votes, closed_votes, seen) = tallies[d.door_id.as_str()];
            let inferred = match open_votes.cmp(&closed_votes) {
                std::cmp::Ordering::Greater => Some(DoorStatus::Open),
                std::cmp::Ordering::Less => Some(DoorStatus::Closed),
                std::cmp::Ordering::Equal => None,
            };
            let outcome = match inferred {
                Some(s) if s == d.true_status => match s {
                    DoorStatus::Open => Outcome::CorrectOpen,
                    DoorStatus::Closed => Outcome::CorrectClosed,
                },
                Some(_) => Outcome::WrongStatus,
                None if open_votes > 0 => Outcome::Undecided,
                None if seen => Outcome::Undetected,
                None => Outcome::Unobserved,
            };
            DoorVerdict {
                door_id: d.door_id.clone(),
                open_votes,
                closed_votes,
                inferred,
                outcome,
            }
        })
        .collect())
}

/// Percentage of doors whose status was recovered.
pub fn recognition_accuracy(verdicts: &[DoorVerdict]) -> Result<f64, TopoError> {
    if verdicts.is_empty() {
        return Err(TopoError::NoDoors);
    }
    let correct = verdicts
        .iter()
        .filter(|v| matches!(v.outcome, Outcome::CorrectOpen | Outcome::CorrectClosed))
        .count();
    Ok(100.0 * correct as f64 / verdicts.len() as f64)
}

/// Outcome counts in the order correct, wrong, undecided, undetected, unobserved.
pub fn outcome_counts(verdicts: &[DoorVerdict]) -> [usize; 5] {
    let mut c = [0; 5];
    for v in verdicts {
        let k = match v.outcome {
            Outcome::CorrectOpen | Outcome::CorrectClosed => 0,
            Outcome::WrongStatus => 1,
            Outcome::Undecided => 2,
            Outcome::Undetected => 3,
            Outcome::Unobserved => 4,
        };
        c[k] += 1;
    }
    c
}

/// Rooms as nodes; an edge wherever some door between two rooms is open.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TopologyGraph {
    pub nodes: BTreeSet<String>,
    /// Unordered room pairs, stored with the smaller id first.
    pub edges: BTreeSet<(String, String)>,
}

impl TopologyGraph {
    fn from_statuses<'a>(
        doors: &'a [DoorRecord],
        status: impl Fn(&'a DoorRecord) -> DoorStatus,
    ) -> Self {
        let mut g = TopologyGraph::default();
        for d in doors {
            g.nodes.extend(d.rooms.iter().cloned());
            if status(d) == DoorStatus::Open {
                g.edges.insert(edge_key(&d.rooms));
            }
        }
        g
    }
}

fn edge_key(rooms: &[String; 2]) -> (String, String) {
    let (a, b) = (&rooms[0], &rooms[1]);
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Topology implied by the verdicts. Doors without a majority use `fallback`.
pub fn build_topology(doors: &[DoorRecord], verdicts: &[DoorVerdict], fallback: DoorStatus) -> TopologyGraph {
    let inferred: BTreeMap<&str, Option<DoorStatus>> =
        verdicts.iter().map(|v| (v.door_id.as_str(), v.inferred)).collect();
    TopologyGraph::from_statuses(doors, |d| {
        inferred
            .get(d.door_id.as_str())
            .copied()
            .flatten()
            .unwrap_or(fallback)
    })
}

/// Topology from the doors' true statuses.
pub fn true_topology(doors: &[DoorRecord]) -> TopologyGraph {
    TopologyGraph::from_statuses(doors, |d| d.true_status)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorDiff {
    pub door_id: String,
    pub rooms: [String; 2],
    pub true_status: DoorStatus,
    pub inferred: Option<DoorStatus>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyComparison {
    pub edge_precision: f64,
    pub edge_recall: f64,
    /// Doors whose outcome is anything but correct.
    pub door_diffs: Vec<DoorDiff>,
}

/// Edge precision/recall of `inferred` against `truth` (1.0 for an empty
/// denominator) plus the list of doors that were not recovered correctly.
pub fn compare_topologies(
    inferred: &TopologyGraph,
    truth: &TopologyGraph,
    doors: &[DoorRecord],
    verdicts: &[DoorVerdict],
) -> Result<TopologyComparison, TopoError> {
    if inferred.nodes != truth.nodes {
        let diff: Vec<String> = inferred.nodes.symmetric_difference(&truth.nodes).cloned().collect();
        return Err(TopoError::NodeMismatch(diff.join(", ")));
    }
    let common = inferred.edges.intersection(&truth.edges).count() as f64;
    let ratio = |n: usize| if n == 0 { 1.0 } else { common / n as f64 };
    let by_id: BTreeMap<&str, &DoorVerdict> = verdicts.iter().map(|v| (v.door_id.as_str(), v)).collect();
    let door_diffs = doors
        .iter()
        .filter_map(|d| {
            let v = by_id.get(d.door_id.as_str())?;
            (!matches!(v.outcome, Outcome::CorrectOpen | Outcome::CorrectClosed)).then(|| DoorDiff {
                door_id: d.door_id.clone(),
                rooms: d.rooms.clone(),
                true_status: d.true_status,
                inferred: v.inferred,
                outcome: v.outcome,
            })
        })
        .collect();
    Ok(TopologyComparison {
        edge_precision: ratio(inferred.edges.len()),
        edge_recall: ratio(truth.edges.len()),
        door_diffs,
    })
}
