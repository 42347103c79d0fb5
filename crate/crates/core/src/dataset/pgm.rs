//! Binary PGM (P5) images, occupancy maps stored as PGM plus a sidecar, and
//! semantic frames stored as PGM with one class id per pixel.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::prep::SemanticFrame;
use super::{read_file, read_text, write_file, DatasetError};
use crate::grid::{CellState, GridFrame, GridMap};

const FREE_MIN: u8 = 250;
const OBSTACLE_MAX: u8 = 50;
const FREE_PIXEL: u8 = 254;
const OBSTACLE_PIXEL: u8 = 0;
const UNKNOWN_PIXEL: u8 = 205;

/// 8-bit grayscale raster, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, DatasetError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DatasetError::Pgm(format!("expected {what} at byte {start}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DatasetError::Pgm(format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm, DatasetError> {
    if !bytes.starts_with(b"P5") {
        return Err(DatasetError::Pgm("missing P5 magic number".into()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if !(1..=255).contains(&maxval) {
        return Err(DatasetError::Pgm(format!("maxval {maxval} not supported (8-bit only)")));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(DatasetError::Pgm("missing whitespace after header".into()));
    }
    let data = &bytes[h.pos + 1..];
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| DatasetError::Pgm("image dimensions overflow".into()))?;
    if data.len() != expected {
        return Err(DatasetError::Pgm(format!(
            "dimension mismatch: header says {width}x{height} = {expected} pixels, found {} bytes",
            data.len()
        )));
    }
    if let Some(&v) = data.iter().find(|&&v| v as usize > maxval) {
        return Err(DatasetError::Pgm(format!("pixel value {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm { width, height, maxval: maxval as u8, pixels: data.to_vec() })
}

pub fn encode_pgm(img: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Converts map cells (row 0 at the top) to PGM pixels.
pub fn map_to_pgm(map: &GridMap) -> Pgm {
    Pgm {
        width: map.width(),
        height: map.height(),
        maxval: 255,
        pixels: map
            .cells()
            .iter()
            .map(|s| match s {
                CellState::Free => FREE_PIXEL,
                CellState::Obstacle => OBSTACLE_PIXEL,
                CellState::Unknown => UNKNOWN_PIXEL,
            })
            .collect(),
    }
}

pub fn map_from_pgm(img: &Pgm, resolution: f64, origin: [f64; 2]) -> Result<GridMap, DatasetError> {
    let frame = GridFrame::new(img.width, img.height, resolution, origin[0], origin[1])
        .map_err(|e| DatasetError::Sidecar(e.to_string()))?;
    let cells = img
        .pixels
        .iter()
        .map(|&v| {
            if v >= FREE_MIN {
                CellState::Free
            } else if v <= OBSTACLE_MAX {
                CellState::Obstacle
            } else {
                CellState::Unknown
            }
        })
        .collect();
    GridMap::from_cells(frame, cells).map_err(|e| DatasetError::Pgm(e.to_string()))
}

/// Text metadata next to a map image.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub image: String,
    pub resolution: f64,
    pub origin: [f64; 2],
}

/// Parses `key: value` lines. Keys other than `image`, `resolution` and
/// `origin` are ignored; the origin yaw must be 0.
pub fn parse_sidecar(text: &str) -> Result<Sidecar, DatasetError> {
    let (mut image, mut resolution, mut origin) = (None, None, None);
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| DatasetError::Sidecar(format!("line {}: expected `key: value`", n + 1)))?;
        let value = value.trim();
        match key.trim() {
            "image" => image = Some(value.trim_matches(|c| c == '"' || c == '\'').to_string()),
            "resolution" => {
                let r: f64 = value
                    .parse()
                    .map_err(|_| DatasetError::Sidecar(format!("line {}: bad resolution {value:?}", n + 1)))?;
                if !(r.is_finite() && r > 0.0) {
                    return Err(DatasetError::Sidecar(format!("resolution must be positive, got {r}")));
                }
                resolution = Some(r);
            }
            "origin" => {
                let inner = value
                    .strip_prefix('[')
                    .and_then(|v| v.strip_suffix(']'))
                    .ok_or_else(|| DatasetError::Sidecar(format!("line {}: origin must be [x, y, theta]", n + 1)))?;
                let parts: Vec<f64> = inner
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| DatasetError::Sidecar(format!("line {}: bad origin {value:?}", n + 1)))?;
                match parts.as_slice() {
                    [x, y, t] if x.is_finite() && y.is_finite() => {
                        if *t != 0.0 {
                            return Err(DatasetError::Sidecar(format!("rotated origins are not supported (theta = {t})")));
                        }
                        origin = Some([*x, *y]);
                    }
                    _ => return Err(DatasetError::Sidecar(format!("line {}: origin must be [x, y, theta]", n + 1))),
                }
            }
            _ => {}
        }
    }
    Ok(Sidecar {
        image: image.ok_or_else(|| DatasetError::Sidecar("missing key `image`".into()))?,
        resolution: resolution.ok_or_else(|| DatasetError::Sidecar("missing key `resolution`".into()))?,
        origin: origin.ok_or_else(|| DatasetError::Sidecar("missing key `origin`".into()))?,
    })
}

pub fn write_sidecar(s: &Sidecar) -> String {
    format!(
        "image: {}\nresolution: {:?}\norigin: [{:?}, {:?}, 0.0]\n",
        s.image, s.resolution, s.origin[0], s.origin[1]
    )
}

/// Loads a map from its sidecar; the image path is relative to the sidecar.
pub fn load_map(sidecar_path: &Path) -> Result<GridMap, DatasetError> {
    let meta = parse_sidecar(&read_text(sidecar_path)?)?;
    let img_path = sidecar_path.parent().unwrap_or(Path::new(".")).join(&meta.image);
    let img = decode_pgm(&read_file(&img_path)?)?;
    map_from_pgm(&img, meta.resolution, meta.origin)
}

/// Writes `<stem>.pgm` next to the sidecar and the sidecar itself.
pub fn save_map(sidecar_path: &Path, map: &GridMap) -> Result<PathBuf, DatasetError> {
    let stem = sidecar_path
        .file_stem()
        .ok_or_else(|| DatasetError::Invalid(format!("bad map path {}", sidecar_path.display())))?;
    let image_name = format!("{}.pgm", stem.to_string_lossy());
    let img_path = sidecar_path.with_file_name(&image_name);
    write_file(&img_path, &encode_pgm(&map_to_pgm(map)))?;
    let f = map.frame();
    let meta = Sidecar { image: image_name, resolution: f.resolution, origin: [f.origin_x, f.origin_y] };
    write_file(sidecar_path, write_sidecar(&meta).as_bytes())?;
    Ok(img_path)
}

pub fn load_semantic_frame(path: &Path, door_class_ids: &BTreeSet<u32>) -> Result<SemanticFrame, DatasetError> {
    let img = decode_pgm(&read_file(path)?)?;
    SemanticFrame::new(
        img.width,
        img.height,
        img.pixels.into_iter().map(u32::from).collect(),
        door_class_ids.clone(),
    )
}

pub fn save_semantic_frame(path: &Path, frame: &SemanticFrame) -> Result<(), DatasetError> {
    let pixels = frame
        .class_of
        .iter()
        .map(|&c| u8::try_from(c).map_err(|_| DatasetError::Invalid(format!("class id {c} does not fit in 8 bits"))))
        .collect::<Result<Vec<u8>, _>>()?;
    let img = Pgm { width: frame.width, height: frame.height, maxval: 255, pixels };
    write_file(path, &encode_pgm(&img))
}
