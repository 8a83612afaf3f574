//! Dataset adapters: turn external datasets on disk into sample streams.
//!
//! A dataset is described by an explicit JSON manifest rather than directory
//! globbing, which would make iteration order platform-dependent:
//!
//! ```json
//! {
//!   "class_count": 3,
//!   "entries": [
//!     {"id": "s0", "image": "images/s0.png", "seg_mask": "masks/s0.png", "label": null}
//!   ]
//! }
//! ```
//!
//! Paths are relative to the manifest location. Images are 8-bit grayscale or
//! RGB PNG, or binary PPM (P6) / PGM (P5); pixel value `v` maps to `v / 255`
//! exactly. Segmentation masks are 8-bit grayscale files whose pixel values
//! are class indices.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{Sample, TaskType};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    #[serde(default)]
    pub seg_mask: Option<String>,
    #[serde(default)]
    pub label: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub class_count: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Data(format!(
                "class_count must be at least 2, got {}",
                self.class_count
            )));
        }
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(&entry.id) {
                return Err(Error::Data(format!("duplicate sample id \"{}\"", entry.id)));
            }
        }
        Ok(())
    }
}

/// Converts manifest entries into [`Sample`]s, applying an optional class
/// remapping to segmentation masks and labels.
///
/// Read-only after construction; concurrent iteration is safe as long as each
/// reader holds its own cursor.
#[derive(Debug, Clone)]
pub struct DatasetAdapter {
    root: PathBuf,
    source: String,
    manifest: DatasetManifest,
    remapping: Option<BTreeMap<usize, usize>>,
    task: TaskType,
}

impl DatasetAdapter {
    pub fn new(
        root: PathBuf,
        manifest: DatasetManifest,
        remapping: Option<BTreeMap<usize, usize>>,
        task: TaskType,
    ) -> Result<Self> {
        manifest.validate()?;
        Ok(DatasetAdapter {
            root,
            // Location-independent default; reports must not leak where the
            // tree happens to live.
            source: "dataset".to_string(),
            manifest,
            remapping,
            task,
        })
    }

    /// Tags samples with a dataset label (meta key "source"). The runner uses
    /// the manifest path string from the config, keeping reports identical
    /// wherever the tree is checked out.
    pub fn with_source(mut self, source: &str) -> Self {
        self.source = source.to_string();
        self
    }

    /// Loads the manifest at `path`; entry paths resolve against its parent.
    pub fn from_manifest_path(
        path: &Path,
        remapping: Option<BTreeMap<usize, usize>>,
        task: TaskType,
    ) -> Result<Self> {
        let manifest = DatasetManifest::load(path)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        DatasetAdapter::new(root, manifest, remapping, task)
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    pub fn task(&self) -> TaskType {
        self.task
    }

    /// Number of classes after remapping.
    pub fn class_count(&self) -> usize {
        match &self.remapping {
            None => self.manifest.class_count,
            Some(map) => map.values().max().map(|&m| m + 1).unwrap_or(0).max(2),
        }
    }

    /// Loads the sample at manifest position `index`.
    pub fn load(&self, index: usize) -> Result<Sample> {
        let entry = self.manifest.entries.get(index).ok_or_else(|| {
            Error::Data(format!(
                "sample index {index} out of range ({})",
                self.len()
            ))
        })?;
        let image =
            load_image(&self.root.join(&entry.image)).map_err(|e| annotate(e, &entry.id))?;
        let mut sample = Sample::new(&entry.id, image)?;
        sample.meta.insert("source".into(), self.source.clone());

        if let Some(rel) = &entry.seg_mask {
            let raw = load_index_map(&self.root.join(rel)).map_err(|e| annotate(e, &entry.id))?;
            let remapped = self.remap_mask(raw, &entry.id)?;
            if remapped.dims() != [sample.height(), sample.width()] {
                return Err(Error::Shape(format!(
                    "seg_mask dims {:?} do not match image {}x{} (sample {})",
                    remapped.dims(),
                    sample.height(),
                    sample.width(),
                    entry.id
                )));
            }
            sample.seg_mask = Some(remapped);
        }
        if let Some(label) = entry.label {
            sample.label = Some(self.remap_class(label, &entry.id)?);
        }
        Ok(sample)
    }

    /// Iterates samples in manifest order.
    pub fn iter(&self) -> impl Iterator<Item = Result<Sample>> + '_ {
        (0..self.len()).map(move |i| self.load(i))
    }

    fn remap_class(&self, class: usize, id: &str) -> Result<usize> {
        match &self.remapping {
            None => Ok(class),
            Some(map) => map.get(&class).copied().ok_or_else(|| {
                Error::Data(format!(
                    "class {class} in sample {id} is not covered by the remapping"
                ))
            }),
        }
    }

    fn remap_mask(&self, raw: Tensor, id: &str) -> Result<Tensor> {
        if self.remapping.is_none() {
            return Ok(raw);
        }
        let dims = raw.dims().to_vec();
        let mut data = raw.into_data();
        for v in &mut data {
            *v = self.remap_class(*v as usize, id)? as f32;
        }
        Tensor::new(dims, data)
    }
}

fn annotate(e: Error, id: &str) -> Error {
    match e {
        Error::Io { path, source } => Error::Io {
            path: PathBuf::from(format!("{} (sample {id})", path.display())),
            source,
        },
        Error::Format(msg) => Error::Format(format!("{msg} (sample {id})")),
        other => other,
    }
}

/// Loads an image file as a C(x)H(x)W tensor in `[0, 1]`.
///
/// Grayscale becomes C = 1, RGB becomes C = 3; an 8-bit value `v` maps to
/// `v / 255` exactly. Anything but 8-bit gray/RGB PNG, P5 or P6 is rejected.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (channels, h, w, pixels) = decode_image_bytes(&bytes, path)?;
    // Interleaved rows to planar channels.
    let mut data = vec![0.0f32; channels * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..channels {
                data[c * h * w + y * w + x] = pixels[(y * w + x) * channels + c] as f32 / 255.0;
            }
        }
    }
    Tensor::new(vec![channels, h, w], data)
}

/// Loads an 8-bit grayscale image as an H(x)W map of raw integer values
/// (stored as f32). Used for segmentation masks holding class indices.
pub fn load_index_map(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (channels, h, w, pixels) = decode_image_bytes(&bytes, path)?;
    if channels != 1 {
        return Err(Error::Format(format!(
            "{}: mask must be grayscale, got {channels} channels",
            path.display()
        )));
    }
    let data = pixels.iter().map(|&v| v as f32).collect();
    Tensor::new(vec![h, w], data)
}

/// Decodes PNG / PPM / PGM bytes to (channels, height, width, interleaved u8).
fn decode_image_bytes(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(bytes, path)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes, path)
    } else {
        Err(Error::Format(format!(
            "{}: unsupported image format (want PNG, PPM P6 or PGM P5)",
            path.display()
        )))
    }
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut buf =
        vec![
            0u8;
            reader
                .output_buffer_size()
                .ok_or_else(|| Error::Format(format!("{}: image too large", path.display())))?
        ];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "{}: only 8-bit PNGs are supported, got {:?}",
            path.display(),
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::Format(format!(
                "{}: only grayscale or RGB PNGs are supported, got {other:?}",
                path.display()
            )))
        }
    };
    buf.truncate(info.buffer_size());
    Ok((channels, info.height as usize, info.width as usize, buf))
}

fn decode_pnm(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let channels = if bytes.starts_with(b"P5") { 1 } else { 3 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = read_pnm_int(bytes, &mut pos)
            .ok_or_else(|| Error::Format(format!("{}: malformed PNM header", path.display())))?;
    }
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(Error::Format(format!(
            "{}: only 8-bit PNM (maxval 255) is supported, got {maxval}",
            path.display()
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let expected = w * h * channels;
    let payload = bytes
        .get(pos..pos + expected)
        .ok_or_else(|| Error::Corrupt(format!("{}: PNM payload truncated", path.display())))?;
    Ok((channels, h, w, payload.to_vec()))
}

/// Parses the next ASCII integer in a PNM header, skipping whitespace and
/// `#` comments.
fn read_pnm_int(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return None;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Reads an FRTD tensor file.
pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_frtd_bytes(&bytes).map_err(|e| prefix_path(e, path))
}

/// Writes an FRTD tensor file.
pub fn save_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, tensor.to_frtd_bytes()).map_err(|e| Error::io(path, e))
}

fn prefix_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Corrupt(msg) => Error::Corrupt(format!("{}: {msg}", path.display())),
        other => other,
    }
}
