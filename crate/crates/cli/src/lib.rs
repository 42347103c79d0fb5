//! The `doorsense` command line: one subcommand per pipeline stage plus the
//! annotation server.

pub mod server;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use doorsense_core::annot::AnnotationSession;
use doorsense_core::dataset::{
    self, load_dataset, load_doors, load_map, load_mesh_obj, load_nav_graph, load_observations,
    load_semantic_frame, save_map, save_nav_graph, DatasetFile, ImageInfo, DEFAULT_MIN_AREA,
    DOOR_FRACTION_THRESHOLD,
};
use doorsense_core::grid::{
    find_contours, morph_cleanup, slice_mesh_to_map, voronoi_boundary, SliceConfig,
    DEFAULT_SITE_SEPARATION,
};
use doorsense_core::metrics::{confidence_sweep, evaluate_opi, map_score, ApMode, OpiConfig};
use doorsense_core::nav::{build_nav_graph, extract_poses, poses_to_csv, DistanceAccrual, PoseConfig};
use doorsense_core::topo::{
    associate, build_topology, compare_topologies, majority_vote, outcome_counts,
    recognition_accuracy, true_topology,
};
use doorsense_core::{DoorStatus, GroundTruthBox};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "doorsense", version, about = "Door-detection robotics toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Slice a 3D mesh (OBJ, z up) into an occupancy map (PGM + sidecar).
    MapFromMesh(MapFromMeshArgs),
    /// Build the navigation graph of a map.
    Navgraph(NavgraphArgs),
    /// Extract perception poses from a navigation graph (CSV).
    Poses(PosesArgs),
    /// Filter semantic frames and propose door boxes (dataset JSON).
    Proposals(ProposalsArgs),
    /// Evaluate detections: AP/mAP and operational indicators.
    Eval(EvalArgs),
    /// Operational indicators over a range of confidence thresholds.
    Sweep(SweepArgs),
    /// Infer door statuses and the room topology from a robot run.
    Topology(TopologyArgs),
    /// Serve an annotation session over HTTP.
    AnnotateServe(ServeArgs),
}

#[derive(Args, Debug)]
pub struct MapFromMeshArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Sidecar path; the PGM is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[arg(long, default_value_t = 0.05)]
    pub z_start: f64,
    #[arg(long, default_value_t = 0.1)]
    pub z_step: f64,
    #[arg(long, default_value_t = 0.7)]
    pub z_end: f64,
    #[arg(long, default_value_t = 1)]
    pub close_radius: usize,
    #[arg(long, default_value_t = 0)]
    pub inflate_radius: usize,
}

#[derive(Args, Debug)]
pub struct NavgraphArgs {
    /// Map sidecar.
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SITE_SEPARATION)]
    pub site_separation: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AccrualArg {
    TreeEdge,
    PopToPop,
}

#[derive(Args, Debug)]
pub struct PosesArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub distance_d: f64,
    #[arg(long, default_value_t = 0.1)]
    pub h_low: f64,
    #[arg(long, default_value_t = 0.7)]
    pub h_high: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "tree-edge")]
    pub accrual: AccrualArg,
}

#[derive(Args, Debug)]
pub struct ProposalsArgs {
    /// Semantic frames as 8-bit PGM (pixel value = class id).
    #[arg(required = true)]
    pub frames: Vec<PathBuf>,
    /// Class ids that mean "door" (repeatable).
    #[arg(long = "door-class", required = true)]
    pub door_classes: Vec<u32>,
    #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
    pub min_area: usize,
    #[arg(long, default_value_t = DOOR_FRACTION_THRESHOLD)]
    pub threshold: f64,
    /// Label given to proposals until a technician reviews them.
    #[arg(long, default_value = "closed")]
    pub label: DoorStatus,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Dataset JSON with annotations and detections.
    #[arg(long, required_unless_present = "dump_config")]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0.75)]
    pub rho_c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho_a: f64,
    #[arg(long, default_value = "enriched")]
    pub ap_mode: ApMode,
    /// Machine-readable report.
    #[arg(long)]
    pub json: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub rho_a: f64,
    /// Comma-separated confidence thresholds; 0, 0.05, ..., 0.95 by default.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct TopologyArgs {
    #[arg(long)]
    pub doors: PathBuf,
    /// Observation log, one JSON record per line.
    #[arg(long)]
    pub observations: PathBuf,
    /// Map sidecar; when given, doors in view are computed for records
    /// without an explicit `in_view` list.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub fov: f64,
    #[arg(long, default_value_t = 5.0)]
    pub max_range: f64,
    /// Status assumed for doors without a majority.
    #[arg(long, default_value = "closed")]
    pub fallback: DoorStatus,
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Sampling period in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Store file; `<dir>/annotations.json` by default.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

/// An input problem: bad file, bad value. Exit status 1.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CmdResult = Result<(), InputError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::MapFromMesh(a) => map_from_mesh(a, out),
        Command::Navgraph(a) => navgraph(a, out),
        Command::Poses(a) => poses(a, out),
        Command::Proposals(a) => proposals(a, out, err),
        Command::Eval(a) => eval(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Topology(a) => topology(a, out),
        Command::AnnotateServe(a) => annotate_serve(a, out),
    }
}

fn map_from_mesh(a: MapFromMeshArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = SliceConfig { resolution: a.resolution, z_start: a.z_start, z_step: a.z_step, z_end: a.z_end };
    let mesh = load_mesh_obj(&a.mesh)?;
    let map = morph_cleanup(&slice_mesh_to_map(&mesh, &cfg)?, a.close_radius, a.inflate_radius);
    let pgm = save_map(&a.out, &map)?;
    writeln!(
        out,
        "map {}x{} at {} m/cell: {} obstacle cells -> {}",
        map.width(),
        map.height(),
        map.resolution(),
        map.count(doorsense_core::CellState::Obstacle),
        pgm.display()
    )?;
    Ok(())
}

fn navgraph(a: NavgraphArgs, out: &mut dyn Write) -> CmdResult {
    if !(a.site_separation >= 0.0) {
        return Err(InputError(format!("--site-separation must be >= 0, got {}", a.site_separation)));
    }
    let map = load_map(&a.map)?;
    let contours = find_contours(&map);
    let labeling = voronoi_boundary(&map, &contours, a.site_separation)?;
    let graph = build_nav_graph(&map, &labeling);
    save_nav_graph(&a.out, &graph)?;
    writeln!(
        out,
        "{} contours, {} boundary cells, {} graph cells",
        contours.len(),
        labeling.boundary_cells.len(),
        graph.len()
    )?;
    Ok(())
}

fn poses(a: PosesArgs, out: &mut dyn Write) -> CmdResult {
    let graph = load_nav_graph(&a.graph)?;
    let cfg = PoseConfig {
        distance: a.distance_d,
        h_low: a.h_low,
        h_high: a.h_high,
        seed: a.seed,
        accrual: match a.accrual {
            AccrualArg::TreeEdge => DistanceAccrual::TreeEdge,
            AccrualArg::PopToPop => DistanceAccrual::PopToPop,
        },
    };
    let csv = poses_to_csv(&extract_poses(&graph, &cfg)?);
    match a.out {
        Some(p) => std::fs::write(&p, csv).map_err(|e| InputError(format!("{}: {e}", p.display())))?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn proposals(a: ProposalsArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let classes: BTreeSet<u32> = a.door_classes.iter().copied().collect();
    let mut ds = DatasetFile::default();
    let mut seen = BTreeSet::new();
    for path in &a.frames {
        let frame = load_semantic_frame(path, &classes)?;
        let fraction = dataset::door_pixel_fraction(&frame).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
        if fraction < a.threshold {
            writeln!(err, "skip {} (door fraction {fraction:.4})", path.display())?;
            continue;
        }
        let image_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        if !seen.insert(image_id.clone()) {
            return Err(InputError(format!("two frames share the image id {image_id:?}")));
        }
        for bbox in dataset::propose_boxes(&frame, a.min_area) {
            ds.annotations.push(GroundTruthBox { image_id: image_id.clone(), bbox, label: a.label });
        }
        ds.images.push(ImageInfo {
            image_id,
            file_name: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            width: frame.width as u32,
            height: frame.height as u32,
        });
    }
    writeln!(err, "kept {} of {} frames, {} proposals", ds.images.len(), a.frames.len(), ds.annotations.len())?;
    match a.out {
        Some(p) => dataset::save_dataset(&p, &ds)?,
        None => out.write_all(ds.to_json().as_bytes())?,
    }
    Ok(())
}

fn ap_mode_name(m: ApMode) -> &'static str {
    match m {
        ApMode::Voc11 => "voc11",
        ApMode::Enriched => "enriched",
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = OpiConfig::new(a.rho_c, a.rho_a)?;
    let config = json!({ "rho_c": cfg.rho_c, "rho_a": cfg.rho_a, "ap_mode": ap_mode_name(a.ap_mode) });
    if a.dump_config {
        writeln!(out, "{}", serde_json::to_string_pretty(&config)?)?;
        return Ok(());
    }
    let path = a.dataset.expect("clap requires --dataset");
    let ds = load_dataset(&path)?;
    let opi = evaluate_opi(&ds.annotations, &ds.detections, &cfg);
    let ap = map_score(&ds.annotations, &ds.detections, cfg.rho_a, cfg.rho_c, a.ap_mode)?;
    if a.json {
        let per_class: serde_json::Map<String, serde_json::Value> =
            ap.per_class_ap.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        let report = json!({
            "config": config,
            "opi": opi,
            "ap": { "per_class_ap": per_class, "map": ap.map_score },
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(());
    }
    writeln!(out, "rho_c={:.3} rho_a={:.3} ap_mode={}", cfg.rho_c, cfg.rho_a, ap_mode_name(a.ap_mode))?;
    writeln!(
        out,
        "images={} ground_truth={} detections={}",
        ds.images.len(),
        ds.annotations.len(),
        ds.detections.len()
    )?;
    for class in DoorStatus::ALL {
        match ap.per_class_ap.get(&class) {
            Some(v) => writeln!(out, "ap_{class}={v:.3}")?,
            None => writeln!(out, "ap_{class}=absent")?,
        }
    }
    writeln!(out, "map={:.3}", ap.map_score)?;
    writeln!(out, "tp_rate={:.3} (tp={})", opi.tp_rate, opi.tp_count)?;
    writeln!(out, "fp_rate={:.3} (fp={})", opi.fp_rate, opi.fp_count)?;
    writeln!(out, "bfd_rate={:.3} (bfd={})", opi.bfd_rate, opi.bfd_count)?;
    writeln!(out, "y_bar={}", opi.y_bar)?;
    Ok(())
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CmdResult {
    let thresholds = if a.thresholds.is_empty() {
        (0..20).map(|i| i as f64 * 0.05).collect()
    } else {
        a.thresholds
    };
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(InputError("thresholds must be sorted ascending".into()));
    }
    OpiConfig::new(thresholds.first().copied().unwrap_or(0.0), a.rho_a)?;
    OpiConfig::new(thresholds.last().copied().unwrap_or(0.0), a.rho_a)?;
    let ds = load_dataset(&a.dataset)?;
    let series = confidence_sweep(&ds.annotations, &ds.detections, a.rho_a, &thresholds);
    if a.json {
        let rows: Vec<_> = series.iter().map(|(t, r)| json!({ "rho_c": t, "opi": r })).collect();
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else {
        writeln!(out, "rho_c,tp_rate,fp_rate,bfd_rate,tp,fp,bfd")?;
        for (t, r) in &series {
            writeln!(
                out,
                "{t:.3},{:.6},{:.6},{:.6},{},{},{}",
                r.tp_rate, r.fp_rate, r.bfd_rate, r.tp_count, r.fp_count, r.bfd_count
            )?;
        }
    }
    Ok(())
}

fn topology(a: TopologyArgs, out: &mut dyn Write) -> CmdResult {
    let doors = load_doors(&a.doors)?;
    let mut observations = load_observations(&a.observations)?;
    if let Some(map_path) = &a.map {
        if !(a.fov > 0.0 && a.fov <= std::f64::consts::TAU) || !(a.max_range > 0.0) {
            return Err(InputError("--fov must lie in (0, 2*pi] and --max-range must be positive".into()));
        }
        let map = load_map(map_path)?;
        for o in observations.iter_mut().filter(|o| o.in_view.is_none()) {
            o.in_view = Some(associate(o.pose, &doors, &map, a.fov, a.max_range));
        }
    }
    let verdicts = majority_vote(&doors, &observations)?;
    let ra = recognition_accuracy(&verdicts)?;
    let inferred = build_topology(&doors, &verdicts, a.fallback);
    let truth = true_topology(&doors);
    let cmp = compare_topologies(&inferred, &truth, &doors, &verdicts)?;
    let [correct, wrong, undecided, undetected, unobserved] = outcome_counts(&verdicts);
    if a.json {
        let report = json!({
            "recognition_accuracy": ra,
            "counts": {
                "correct": correct, "wrong": wrong, "undecided": undecided,
                "undetected": undetected, "unobserved": unobserved, "doors": verdicts.len(),
            },
            "verdicts": verdicts,
            "inferred_edges": inferred.edges,
            "true_edges": truth.edges,
            "comparison": cmp,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(());
    }
    writeln!(out, "doors={} correct={correct} wrong={wrong} undecided={undecided} undetected={undetected} unobserved={unobserved}", verdicts.len())?;
    writeln!(out, "recognition_accuracy={ra:.2}%")?;
    writeln!(out, "edge_precision={:.3} edge_recall={:.3}", cmp.edge_precision, cmp.edge_recall)?;
    for d in &cmp.door_diffs {
        let inferred = d.inferred.map_or("none".to_string(), |s| s.to_string());
        writeln!(
            out,
            "door {} ({} - {}): true={} inferred={} outcome={:?}",
            d.door_id, d.rooms[0], d.rooms[1], d.true_status, inferred, d.outcome
        )?;
    }
    Ok(())
}

fn annotate_serve(a: ServeArgs, out: &mut dyn Write) -> CmdResult {
    let session = AnnotationSession::open(&a.dir, a.period, a.store.as_deref())?;
    let frames = session.frames().len();
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(server::serve(session, addr, |bound| {
        let _ = writeln!(out, "listening on http://{bound} ({frames} frames)");
        let _ = out.flush();
    }))?;
    Ok(())
}

/// Convenience for tests: the store path a session would use for `dir`.
pub fn default_store(dir: &Path) -> PathBuf {
    dir.join(doorsense_core::annot::DEFAULT_STORE_NAME)
}
