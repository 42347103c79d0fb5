//! Annotation sessions: a sampled image sequence with a file-backed box store
//! and carry-forward of boxes to unsaved frames.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetFile, ImageInfo};
use crate::metrics::GroundTruthBox;

pub const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "pgm", "ppm", "bmp"];
pub const DEFAULT_STORE_NAME: &str = "annotations.json";

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no images in {0}")]
    NoImages(PathBuf),
    #[error("unparsable timestamp in file name {0:?} (expected <milliseconds>.<ext>)")]
    BadTimestamp(String),
    #[error("duplicate timestamp {0} ms")]
    DuplicateTimestamp(u64),
    #[error("cannot read image size of {file}: {msg}")]
    ImageSize { file: String, msg: String },
    #[error("invalid sample period {0}")]
    BadPeriod(f64),
    #[error("image not found: {0}")]
    NotFound(String),
    #[error("invalid annotation: {0}")]
    Invalid(String),
    #[error("corrupt store {path}: {msg}")]
    CorruptStore { path: PathBuf, msg: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnnotError + '_ {
    move |source| AnnotError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub image_id: String,
    pub file_name: String,
    pub timestamp_ms: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Saved,
    Carried,
}

/// Persistent form of the store. Saved-empty lists are kept, so they stay
/// distinct from frames that were never saved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreFile {
    /// Number of committed writes over the store's lifetime.
    #[serde(default)]
    revision: u64,
    saved: BTreeMap<String, Vec<GroundTruthBox>>,
}

type Saved = BTreeMap<String, Vec<GroundTruthBox>>;

#[derive(Debug, Clone, Default)]
struct Snapshot {
    revision: u64,
    saved: Saved,
}

/// Result of a committed write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PutAck {
    pub revision: u64,
    pub annotations: Vec<GroundTruthBox>,
}

pub struct AnnotationSession {
    session_id: String,
    image_dir: PathBuf,
    sample_period: f64,
    frames: Vec<Frame>,
    index: HashMap<String, usize>,
    store_path: PathBuf,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    temp_counter: AtomicU64,
}

/// Keeps the first frame, then each next frame at least `period_ms` after the
/// last kept one. Input must be sorted.
pub fn subsample(timestamps_ms: &[u64], period_ms: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, &t) in timestamps_ms.iter().enumerate() {
        if kept.last().is_none_or(|&k| (t - timestamps_ms[k]) as f64 >= period_ms) {
            kept.push(i);
        }
    }
    kept
}

impl AnnotationSession {
    /// Opens the frames of `image_dir`, sampled every `sample_period` seconds.
    /// The store defaults to `annotations.json` inside the directory.
    pub fn open(image_dir: &Path, sample_period: f64, store_path: Option<&Path>) -> Result<Self, AnnotError> {
        if !(sample_period.is_finite() && sample_period >= 0.0) {
            return Err(AnnotError::BadPeriod(sample_period));
        }
        let mut found = Vec::new();
        for entry in fs::read_dir(image_dir).map_err(io_err(image_dir))? {
            let entry = entry.map_err(io_err(image_dir))?;
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let Some(ext) = path.extension().and_then(|e| e.to_str()) else { continue };
            if !IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
                continue;
            }
            let file_name = entry.file_name().to_string_lossy().into_owned();
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let ts: u64 = stem
                .parse()
                .ok()
                .filter(|_| stem.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| AnnotError::BadTimestamp(file_name.clone()))?;
            found.push((ts, stem.to_string(), file_name));
        }
        if found.is_empty() {
            return Err(AnnotError::NoImages(image_dir.to_path_buf()));
        }
        found.sort();
        if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(AnnotError::DuplicateTimestamp(w[0].0));
        }
        let stamps: Vec<u64> = found.iter().map(|f| f.0).collect();
        let mut frames = Vec::new();
        for i in subsample(&stamps, sample_period * 1000.0) {
            let (ts, id, file_name) = &found[i];
            let size = imagesize::size(image_dir.join(file_name))
                .map_err(|e| AnnotError::ImageSize { file: file_name.clone(), msg: e.to_string() })?;
            frames.push(Frame {
                image_id: id.clone(),
                file_name: file_name.clone(),
                timestamp_ms: *ts,
                width: size.width as u32,
                height: size.height as u32,
            });
        }
        let index = frames.iter().enumerate().map(|(i, f)| (f.image_id.clone(), i)).collect();

        let store_path = store_path.map_or_else(|| image_dir.join(DEFAULT_STORE_NAME), Path::to_path_buf);
        let store = match fs::read_to_string(&store_path) {
            Ok(text) => serde_json::from_str::<StoreFile>(&text)
                .map_err(|e| AnnotError::CorruptStore { path: store_path.clone(), msg: e.to_string() })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => StoreFile::default(),
            Err(e) => return Err(io_err(&store_path)(e)),
        };

        let mut h = DefaultHasher::new();
        fs::canonicalize(image_dir).unwrap_or_else(|_| image_dir.to_path_buf()).hash(&mut h);
        sample_period.to_bits().hash(&mut h);
        Ok(Self {
            session_id: format!("{:016x}", h.finish()),
            image_dir: image_dir.to_path_buf(),
            sample_period,
            frames,
            index,
            store_path,
            snapshot: RwLock::new(Arc::new(Snapshot { revision: store.revision, saved: store.saved })),
            writer: Mutex::new(()),
            temp_counter: AtomicU64::new(0),
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn image_dir(&self) -> &Path {
        &self.image_dir
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn store_path(&self) -> &Path {
        &self.store_path
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, image_id: &str) -> Result<&Frame, AnnotError> {
        self.index
            .get(image_id)
            .map(|&i| &self.frames[i])
            .ok_or_else(|| AnnotError::NotFound(image_id.to_string()))
    }

    pub fn image_path(&self, image_id: &str) -> Result<PathBuf, AnnotError> {
        Ok(self.image_dir.join(&self.frame(image_id)?.file_name))
    }

    /// Number of committed writes, including those of earlier processes.
    pub fn revision(&self) -> u64 {
        self.snapshot().revision
    }

    fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Saved boxes of the image, or those of the nearest earlier saved frame
    /// (re-targeted and clamped to this image) marked as carried.
    pub fn get_annotations(&self, image_id: &str) -> Result<(Vec<GroundTruthBox>, Provenance), AnnotError> {
        let pos = *self.index.get(image_id).ok_or_else(|| AnnotError::NotFound(image_id.to_string()))?;
        let snap = self.snapshot();
        let saved = &snap.saved;
        if let Some(boxes) = saved.get(image_id) {
            return Ok((boxes.clone(), Provenance::Saved));
        }
        let frame = &self.frames[pos];
        let carried = self.frames[..pos]
            .iter()
            .rev()
            .find_map(|f| saved.get(&f.image_id))
            .map(|boxes| {
                boxes
                    .iter()
                    .map(|b| GroundTruthBox {
                        image_id: image_id.to_string(),
                        bbox: b.bbox.clamped(frame.width as f64, frame.height as f64),
                        label: b.label,
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok((carried, Provenance::Carried))
    }

    /// Replaces the saved boxes of one image. Returns once the new store is
    /// durably on disk; writes are committed one at a time, in revision order.
    pub fn put_annotations(&self, image_id: &str, boxes: Vec<GroundTruthBox>) -> Result<PutAck, AnnotError> {
        let frame = self.frame(image_id)?;
        let mut clean = Vec::with_capacity(boxes.len());
        for (k, b) in boxes.into_iter().enumerate() {
            if b.image_id != image_id {
                return Err(AnnotError::Invalid(format!(
                    "annotation {k} is for image {:?}, not {image_id:?}",
                    b.image_id
                )));
            }
            clean.push(GroundTruthBox { bbox: b.bbox.clamped(frame.width as f64, frame.height as f64), ..b });
        }

        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = (*self.snapshot()).clone();
        next.revision += 1;
        next.saved.insert(image_id.to_string(), clean.clone());
        self.persist(&next)?;
        let revision = next.revision;
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(PutAck { revision, annotations: clean })
    }

    fn persist(&self, snap: &Snapshot) -> Result<(), AnnotError> {
        let store = StoreFile { revision: snap.revision, saved: snap.saved.clone() };
        let text = serde_json::to_string_pretty(&store).expect("store serializes") + "\n";
        let name = self.store_path.file_name().map_or_else(|| "store".into(), |n| n.to_string_lossy().into_owned());
        let tmp = self.store_path.with_file_name(format!(
            ".{name}.tmp-{}-{}",
            std::process::id(),
            self.temp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let result = (|| {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
            fs::rename(&tmp, &self.store_path).map_err(io_err(&self.store_path))?;
            if let Some(dir) = self.store_path.parent().filter(|p| !p.as_os_str().is_empty()) {
                File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))?;
            }
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }

    /// Every frame plus the saved (never carried) boxes.
    pub fn export_dataset(&self) -> DatasetFile {
        let snap = self.snapshot();
        let saved = &snap.saved;
        DatasetFile {
            images: self
                .frames
                .iter()
                .map(|f| ImageInfo {
                    image_id: f.image_id.clone(),
                    file_name: f.file_name.clone(),
                    width: f.width,
                    height: f.height,
                })
                .collect(),
            annotations: self
                .frames
                .iter()
                .flat_map(|f| saved.get(&f.image_id).into_iter().flatten().cloned())
                .collect(),
            detections: Vec::new(),
        }
    }
}
