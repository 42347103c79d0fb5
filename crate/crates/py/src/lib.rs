//! Python bindings for `doorsense_core`.
//!
//! Boxes, detections, doors and observations cross the boundary as plain
//! dicts and lists with the same shape as the JSON files the CLI reads.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use doorsense_core::annot::{AnnotError, AnnotationSession};
use doorsense_core::dataset::{self, DatasetError, SemanticFrame};
use doorsense_core::grid::{self, SliceConfig, DEFAULT_SITE_SEPARATION};
use doorsense_core::metrics::{self, ApMode, OpiConfig};
use doorsense_core::nav::{self, DistanceAccrual, PoseConfig};
use doorsense_core::topo::{self, DoorRecord, Observation};
use doorsense_core::{BBox, Cell, CellState, Detection, DoorStatus, GroundTruthBox};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset_err(e: DatasetError) -> PyErr {
    match e {
        DatasetError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn annot_err(e: AnnotError) -> PyErr {
    match e {
        AnnotError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    dataset::from_json(&text).map_err(dataset_err)
}

fn parse_status(s: &str) -> PyResult<DoorStatus> {
    s.parse().map_err(value_err)
}

fn parse_mode(s: &str) -> PyResult<ApMode> {
    s.parse().map_err(value_err)
}

fn bbox(b: (f64, f64, f64, f64)) -> PyResult<BBox> {
    BBox::new(b.0, b.1, b.2, b.3).map_err(value_err)
}

/// Intersection over union of two `(x, y, w, h)` boxes.
#[pyfunction]
fn iou(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> PyResult<f64> {
    Ok(metrics::iou(&bbox(a)?, &bbox(b)?))
}

/// Occupancy grid. Row 0 is the top row.
#[pyclass(name = "GridMap", module = "doorsense")]
struct PyGridMap {
    inner: grid::GridMap,
}

#[pymethods]
impl PyGridMap {
    /// `#` is an obstacle, `?` unknown, anything else free.
    #[staticmethod]
    #[pyo3(signature = (rows, resolution=0.05, origin=(0.0, 0.0)))]
    fn from_ascii(rows: Vec<String>, resolution: f64, origin: (f64, f64)) -> PyResult<Self> {
        let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
        let inner = grid::GridMap::from_ascii(&rows, resolution, origin.0, origin.1).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Loads a map from its YAML-style sidecar.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: dataset::load_map(&path).map_err(dataset_err)? })
    }

    /// Writes the sidecar and the PGM next to it; returns the PGM path.
    fn save(&self, path: PathBuf) -> PyResult<PathBuf> {
        dataset::save_map(&path, &self.inner).map_err(dataset_err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    #[getter]
    fn origin(&self) -> (f64, f64) {
        let f = self.inner.frame();
        (f.origin_x, f.origin_y)
    }

    fn free_count(&self) -> usize {
        self.inner.count(CellState::Free)
    }

    fn obstacle_count(&self) -> usize {
        self.inner.count(CellState::Obstacle)
    }

    fn is_free(&self, row: usize, col: usize) -> PyResult<bool> {
        let cell = Cell::new(row, col);
        if !self.inner.frame().contains(cell) {
            return Err(value_err(format!("cell ({row}, {col}) outside the map")));
        }
        Ok(self.inner.is_free(cell))
    }

    fn to_ascii(&self) -> Vec<String> {
        let w = self.inner.width();
        self.inner
            .cells()
            .chunks(w.max(1))
            .map(|row| {
                row.iter()
                    .map(|s| match s {
                        CellState::Obstacle => '#',
                        CellState::Unknown => '?',
                        CellState::Free => '.',
                    })
                    .collect()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("GridMap({}x{}, {} m/cell)", self.inner.width(), self.inner.height(), self.inner.resolution())
    }
}

/// Slices an OBJ mesh into an occupancy grid and cleans it up.
#[pyfunction]
#[pyo3(signature = (mesh_path, resolution=0.05, z_start=0.05, z_step=0.1, z_end=0.7, close_radius=1, inflate_radius=0))]
fn map_from_mesh(
    mesh_path: PathBuf,
    resolution: f64,
    z_start: f64,
    z_step: f64,
    z_end: f64,
    close_radius: usize,
    inflate_radius: usize,
) -> PyResult<PyGridMap> {
    let mesh = dataset::load_mesh_obj(&mesh_path).map_err(dataset_err)?;
    let cfg = SliceConfig { resolution, z_start, z_step, z_end };
    let raw = grid::slice_mesh_to_map(&mesh, &cfg).map_err(value_err)?;
    Ok(PyGridMap { inner: grid::morph_cleanup(&raw, close_radius, inflate_radius) })
}

/// Thins a set of `(row, col)` cells to a one-cell-wide skeleton.
#[pyfunction]
fn skeletonize(cells: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let set: BTreeSet<Cell> = cells.into_iter().map(|(r, c)| Cell::new(r, c)).collect();
    grid::skeletonize(&set).into_iter().map(|c| (c.row, c.col)).collect()
}

/// Navigation graph: skeleton cells of the Voronoi boundary of a map.
#[pyclass(name = "NavGraph", module = "doorsense")]
struct PyNavGraph {
    inner: nav::NavGraph,
}

#[pymethods]
impl PyNavGraph {
    #[staticmethod]
    #[pyo3(signature = (map, site_separation=DEFAULT_SITE_SEPARATION))]
    fn from_map(map: PyRef<'_, PyGridMap>, site_separation: f64) -> PyResult<Self> {
        if !(site_separation >= 0.0) {
            return Err(value_err(format!("site_separation must be >= 0, got {site_separation}")));
        }
        let contours = grid::find_contours(&map.inner);
        let labeling = grid::voronoi_boundary(&map.inner, &contours, site_separation).map_err(value_err)?;
        Ok(Self { inner: nav::build_nav_graph(&map.inner, &labeling) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: dataset::load_nav_graph(&path).map_err(dataset_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataset::save_nav_graph(&path, &self.inner).map_err(dataset_err)
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        self.inner.cells.iter().map(|c| (c.row, c.col)).collect()
    }

    fn degree(&self, row: usize, col: usize) -> usize {
        self.inner.degree(Cell::new(row, col))
    }

    /// Camera poses `(x, y, h, theta)` along a seeded depth-first walk.
    #[pyo3(signature = (distance=1.0, h_low=0.1, h_high=0.7, seed=0, accrual="tree-edge"))]
    fn extract_poses(
        &self,
        distance: f64,
        h_low: f64,
        h_high: f64,
        seed: u64,
        accrual: &str,
    ) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let accrual = match accrual {
            "tree-edge" => DistanceAccrual::TreeEdge,
            "pop-to-pop" => DistanceAccrual::PopToPop,
            other => return Err(value_err(format!("unknown accrual {other:?} (expected tree-edge or pop-to-pop)"))),
        };
        let cfg = PoseConfig { distance, h_low, h_high, seed, accrual };
        let poses = nav::extract_poses(&self.inner, &cfg).map_err(value_err)?;
        Ok(poses.into_iter().map(|p| (p.x, p.y, p.h, p.theta)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("NavGraph({} cells)", self.inner.len())
    }
}

/// Per-image TP/FP/BFD classification, as indices into `detections`.
#[pyfunction]
#[pyo3(signature = (ground_truth, detections, rho_c=0.75, rho_a=0.5))]
fn opi_image<'py>(
    py: Python<'py>,
    ground_truth: &Bound<'py, PyAny>,
    detections: &Bound<'py, PyAny>,
    rho_c: f64,
    rho_a: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let gts: Vec<GroundTruthBox> = from_py(ground_truth)?;
    let dets: Vec<Detection> = from_py(detections)?;
    let cfg = OpiConfig::new(rho_c, rho_a).map_err(value_err)?;
    let r = metrics::opi_image(&gts, &dets, &cfg).map_err(value_err)?;
    let v = serde_json::json!({ "tp": r.tp, "fp": r.fp, "bfd": r.bfd, "discarded": r.discarded });
    to_py(py, &v)
}

/// AP of one class, `None` when it has no ground truth.
#[pyfunction]
#[pyo3(signature = (ground_truth, detections, label, rho_a=0.5, rho_c=0.0, mode="enriched"))]
fn average_precision(
    ground_truth: &Bound<'_, PyAny>,
    detections: &Bound<'_, PyAny>,
    label: &str,
    rho_a: f64,
    rho_c: f64,
    mode: &str,
) -> PyResult<Option<f64>> {
    let gts: Vec<GroundTruthBox> = from_py(ground_truth)?;
    let dets: Vec<Detection> = from_py(detections)?;
    let curve = metrics::average_precision(&gts, &dets, parse_status(label)?, rho_a, rho_c, parse_mode(mode)?);
    Ok(curve.map(|c| c.ap))
}

fn evaluate_inner<'py>(
    py: Python<'py>,
    gts: &[GroundTruthBox],
    dets: &[Detection],
    rho_c: f64,
    rho_a: f64,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = OpiConfig::new(rho_c, rho_a).map_err(value_err)?;
    let opi = metrics::evaluate_opi(gts, dets, &cfg);
    let ap = metrics::map_score(gts, dets, rho_a, rho_c, parse_mode(mode)?).map_err(value_err)?;
    let per_class: serde_json::Map<String, serde_json::Value> =
        ap.per_class_ap.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect();
    let v = serde_json::json!({
        "config": { "rho_c": rho_c, "rho_a": rho_a, "ap_mode": mode },
        "opi": opi,
        "ap": { "per_class_ap": per_class, "map": ap.map_score },
    });
    to_py(py, &v)
}

/// OPI and mAP over lists of ground-truth boxes and detections.
#[pyfunction]
#[pyo3(signature = (ground_truth, detections, rho_c=0.75, rho_a=0.5, ap_mode="enriched"))]
fn evaluate<'py>(
    py: Python<'py>,
    ground_truth: &Bound<'py, PyAny>,
    detections: &Bound<'py, PyAny>,
    rho_c: f64,
    rho_a: f64,
    ap_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let gts: Vec<GroundTruthBox> = from_py(ground_truth)?;
    let dets: Vec<Detection> = from_py(detections)?;
    evaluate_inner(py, &gts, &dets, rho_c, rho_a, ap_mode)
}

/// Same as `evaluate`, reading a dataset JSON file.
#[pyfunction]
#[pyo3(signature = (path, rho_c=0.75, rho_a=0.5, ap_mode="enriched"))]
fn evaluate_dataset<'py>(
    py: Python<'py>,
    path: PathBuf,
    rho_c: f64,
    rho_a: f64,
    ap_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let ds = dataset::load_dataset(&path).map_err(dataset_err)?;
    evaluate_inner(py, &ds.annotations, &ds.detections, rho_c, rho_a, ap_mode)
}

/// OPI at each confidence threshold, as `(rho_c, report)` pairs.
#[pyfunction]
#[pyo3(signature = (ground_truth, detections, thresholds, rho_a=0.5))]
fn confidence_sweep<'py>(
    py: Python<'py>,
    ground_truth: &Bound<'py, PyAny>,
    detections: &Bound<'py, PyAny>,
    thresholds: Vec<f64>,
    rho_a: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let gts: Vec<GroundTruthBox> = from_py(ground_truth)?;
    let dets: Vec<Detection> = from_py(detections)?;
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(value_err("thresholds must be sorted ascending"));
    }
    for t in &thresholds {
        OpiConfig::new(*t, rho_a).map_err(value_err)?;
    }
    to_py(py, &metrics::confidence_sweep(&gts, &dets, rho_a, &thresholds))
}

/// Majority-vote door status inference and the resulting room topology.
///
/// With a map, observations lacking `in_view` get it from a visibility check.
#[pyfunction]
#[pyo3(signature = (doors, observations, map=None, fov=std::f64::consts::FRAC_PI_2, max_range=5.0, fallback="closed"))]
fn topology<'py>(
    py: Python<'py>,
    doors: &Bound<'py, PyAny>,
    observations: &Bound<'py, PyAny>,
    map: Option<PyRef<'py, PyGridMap>>,
    fov: f64,
    max_range: f64,
    fallback: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let doors: Vec<DoorRecord> = from_py(doors)?;
    for d in &doors {
        d.validate().map_err(value_err)?;
    }
    let mut observations: Vec<Observation> = from_py(observations)?;
    if let Some(map) = &map {
        if !(fov > 0.0 && fov <= std::f64::consts::TAU) || !(max_range > 0.0) {
            return Err(value_err("fov must lie in (0, 2*pi] and max_range must be positive"));
        }
        for o in observations.iter_mut().filter(|o| o.in_view.is_none()) {
            o.in_view = Some(topo::associate(o.pose, &doors, &map.inner, fov, max_range));
        }
    }
    let verdicts = topo::majority_vote(&doors, &observations).map_err(value_err)?;
    let ra = topo::recognition_accuracy(&verdicts).map_err(value_err)?;
    let inferred = topo::build_topology(&doors, &verdicts, parse_status(fallback)?);
    let truth = topo::true_topology(&doors);
    let cmp = topo::compare_topologies(&inferred, &truth, &doors, &verdicts).map_err(value_err)?;
    let v = serde_json::json!({
        "recognition_accuracy": ra,
        "verdicts": verdicts,
        "inferred_edges": inferred.edges,
        "true_edges": truth.edges,
        "comparison": cmp,
    });
    to_py(py, &v)
}

fn semantic_frame(width: usize, height: usize, class_of: Vec<u32>, door_classes: Vec<u32>) -> PyResult<SemanticFrame> {
    SemanticFrame::new(width, height, class_of, door_classes.into_iter().collect()).map_err(dataset_err)
}

/// Share of pixels whose class is a door class.
#[pyfunction]
fn door_pixel_fraction(width: usize, height: usize, class_of: Vec<u32>, door_classes: Vec<u32>) -> PyResult<f64> {
    dataset::door_pixel_fraction(&semantic_frame(width, height, class_of, door_classes)?).map_err(dataset_err)
}

/// Bounding boxes `(x, y, w, h)` of door blobs of at least `min_area` pixels.
#[pyfunction]
#[pyo3(signature = (width, height, class_of, door_classes, min_area=dataset::DEFAULT_MIN_AREA))]
fn propose_boxes(
    width: usize,
    height: usize,
    class_of: Vec<u32>,
    door_classes: Vec<u32>,
    min_area: usize,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let frame = semantic_frame(width, height, class_of, door_classes)?;
    Ok(dataset::propose_boxes(&frame, min_area).into_iter().map(|b| (b.x, b.y, b.w, b.h)).collect())
}

/// Reads a dataset JSON file into plain dicts.
#[pyfunction]
fn load_dataset<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ds = dataset::load_dataset(&path).map_err(dataset_err)?;
    to_py(py, &ds)
}

/// File-backed labeling session over a directory of timestamped images.
#[pyclass(name = "AnnotationSession", module = "doorsense")]
struct PyAnnotationSession {
    inner: AnnotationSession,
}

#[pymethods]
impl PyAnnotationSession {
    #[new]
    #[pyo3(signature = (image_dir, sample_period=1.0, store=None))]
    fn new(image_dir: PathBuf, sample_period: f64, store: Option<PathBuf>) -> PyResult<Self> {
        let inner = AnnotationSession::open(&image_dir, sample_period, store.as_deref()).map_err(annot_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    #[getter]
    fn store_path(&self) -> PathBuf {
        self.inner.store_path().to_path_buf()
    }

    fn frames<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.frames())
    }

    /// `(boxes, provenance)` where provenance is `"saved"` or `"carried"`.
    fn get_annotations<'py>(&self, py: Python<'py>, image_id: &str) -> PyResult<(Bound<'py, PyAny>, String)> {
        let (boxes, prov) = self.inner.get_annotations(image_id).map_err(annot_err)?;
        let prov = serde_json::to_value(prov).map_err(value_err)?;
        Ok((to_py(py, &boxes)?, prov.as_str().unwrap_or_default().to_string()))
    }

    /// Replaces the boxes of one frame; returns `{revision, annotations}`.
    fn put_annotations<'py>(
        &self,
        py: Python<'py>,
        image_id: &str,
        boxes: &Bound<'py, PyAny>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let boxes: Vec<GroundTruthBox> = from_py(boxes)?;
        let ack = py.detach(|| self.inner.put_annotations(image_id, boxes)).map_err(annot_err)?;
        to_py(py, &ack)
    }

    /// The session as a dataset JSON document.
    fn export(&self) -> String {
        self.inner.export_dataset().to_json()
    }
}

#[pymodule]
pub fn doorsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridMap>()?;
    m.add_class::<PyNavGraph>()?;
    m.add_class::<PyAnnotationSession>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(map_from_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(skeletonize, m)?)?;
    m.add_function(wrap_pyfunction!(opi_image, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(topology, m)?)?;
    m.add_function(wrap_pyfunction!(door_pixel_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(propose_boxes, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    Ok(())
}
