//! File formats and dataset preparation.

mod pgm;
mod prep;
mod records;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Detection, GroundTruthBox};

pub use pgm::{
    decode_pgm, encode_pgm, load_map, load_semantic_frame, map_from_pgm, map_to_pgm, parse_sidecar,
    save_map, save_semantic_frame, write_sidecar, Pgm, Sidecar,
};
pub use prep::{
    door_pixel_fraction, keep_frame, propose_boxes, SemanticFrame, DEFAULT_MIN_AREA,
    DOOR_FRACTION_THRESHOLD,
};
pub use records::{
    load_doors, load_mesh_obj, load_nav_graph, load_observations, nav_graph_from_json,
    nav_graph_to_json, parse_doors, parse_observations, save_nav_graph, write_observations,
    NavGraphFile,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("malformed map sidecar: {0}")]
    Sidecar(String),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("mesh: {0}")]
    Mesh(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}

/// Deserializes JSON, reporting failures with the path of the offending value.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, DatasetError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        DatasetError::Schema {
            path: if path == "." { "<root>".into() } else { path },
            msg: e.into_inner().to_string(),
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageInfo {
    pub image_id: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

/// Images plus their ground-truth annotations and detector output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<GroundTruthBox>,
    pub detections: Vec<Detection>,
}

impl DatasetFile {
    /// Checks referential integrity and clamps every box to its image.
    pub fn validated(mut self) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for (k, img) in self.images.iter().enumerate() {
            if !ids.insert(img.image_id.as_str()) {
                return Err(DatasetError::Schema {
                    path: format!("images[{k}].image_id"),
                    msg: format!("duplicate image id {:?}", img.image_id),
                });
            }
        }
        let size = |id: &str| {
            self.images
                .iter()
                .find(|i| i.image_id == id)
                .map(|i| (i.width as f64, i.height as f64))
        };
        let mut clamped_ann = Vec::with_capacity(self.annotations.len());
        for (k, a) in self.annotations.iter().enumerate() {
            let (w, h) = size(&a.image_id).ok_or_else(|| unknown_image("annotations", k, &a.image_id))?;
            clamped_ann.push(GroundTruthBox { bbox: a.bbox.clamped(w, h), ..a.clone() });
        }
        let mut clamped_det = Vec::with_capacity(self.detections.len());
        for (k, d) in self.detections.iter().enumerate() {
            let (w, h) = size(&d.image_id).ok_or_else(|| unknown_image("detections", k, &d.image_id))?;
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(DatasetError::Schema {
                    path: format!("detections[{k}].confidence"),
                    msg: format!("confidence must lie in [0, 1], got {}", d.confidence),
                });
            }
            clamped_det.push(Detection { bbox: d.bbox.clamped(w, h), ..d.clone() });
        }
        self.annotations = clamped_ann;
        self.detections = clamped_det;
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes") + "\n"
    }
}

fn unknown_image(list: &str, k: usize, id: &str) -> DatasetError {
    DatasetError::Schema {
        path: format!("{list}[{k}].image_id"),
        msg: format!("unknown image id {id:?}"),
    }
}

pub fn parse_dataset(text: &str) -> Result<DatasetFile, DatasetError> {
    from_json::<DatasetFile>(text)?.validated()
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile, DatasetError> {
    parse_dataset(&read_text(path)?)
}

pub fn save_dataset(path: &Path, dataset: &DatasetFile) -> Result<(), DatasetError> {
    write_file(path, dataset.to_json().as_bytes())
}
