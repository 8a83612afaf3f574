//! Seeded synthetic dataset generation.
//!
//! Produces small PNG datasets with manifests, a run-ready experiment config,
//! and a logit-replay fixture with known separability. Everything is a pure
//! function of the seed, which is what lets the determinism checks compare
//! whole output trees byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::adapters::save_tensor;
use crate::augment::{AugmentationKind, AugmentationSpec};
use crate::error::{Error, Result};
use crate::model::LogitReplay;
use crate::rng::{derive_stream_seed, Rng};
use crate::runner::{DatasetConfig, ExperimentConfig, MethodConfig, MetricConfig, StrategyConfig};
use crate::sample::TaskType;
use crate::tensor::Tensor;

pub struct SyntheticOptions {
    pub samples: usize,
    pub width: u32,
    pub height: u32,
    pub classes: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            samples: 16,
            width: 32,
            height: 32,
            classes: 3,
        }
    }
}

pub fn write_png_rgb8(path: &Path, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    write_png(path, width, height, png::ColorType::Rgb, pixels)
}

pub fn write_png_gray8(path: &Path, width: u32, height: u32, pixels: &[u8]) -> Result<()> {
    write_png(path, width, height, png::ColorType::Grayscale, pixels)
}

fn write_png(
    path: &Path,
    width: u32,
    height: u32,
    color: png::ColorType,
    pixels: &[u8],
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Writes `samples` RGB images with segmentation masks and labels under
/// `dir`, plus a `manifest.json`. Returns the manifest path.
///
/// Pixels are structured mid-range values (never 0 or 255), so augmentations
/// always produce detectable changes and clamping stays inactive.
pub fn generate_dataset(
    dir: &Path,
    seed: u64,
    opts: &SyntheticOptions,
    id_prefix: &str,
) -> Result<PathBuf> {
    let (w, h) = (opts.width as usize, opts.height as usize);
    let mut entries = Vec::new();
    for i in 0..opts.samples {
        let mut rng = Rng::new(derive_stream_seed(seed, "synth", i as u64));
        let mut rgb = vec![0u8; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    // Structured base pattern plus jitter, kept inside
                    // [64, 192).
                    let base = (x * 3 + y * 5 + i * 7 + c * 11) % 96;
                    let jitter = (rng.next_f64() * 32.0) as usize;
                    rgb[(y * w + x) * 3 + c] = (64 + base + jitter) as u8;
                }
            }
        }
        // Mask classes form horizontal bands shifted per sample.
        let mut mask = vec![0u8; w * h];
        for y in 0..h {
            for x in 0..w {
                mask[y * w + x] = (((y + i) * opts.classes) / h % opts.classes) as u8;
            }
        }
        let id = format!("{id_prefix}{i:02}");
        let image_rel = format!("images/{id}.png");
        let mask_rel = format!("masks/{id}.png");
        write_png_rgb8(&dir.join(&image_rel), opts.width, opts.height, &rgb)?;
        write_png_gray8(&dir.join(&mask_rel), opts.width, opts.height, &mask)?;
        entries.push(serde_json::json!({
            "id": id,
            "image": image_rel,
            "seg_mask": mask_rel,
            "label": i % opts.classes,
        }));
    }
    let manifest = serde_json::json!({
        "class_count": opts.classes,
        "entries": entries,
    });
    let path = dir.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).unwrap() + "\n",
    )
    .map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// A run-ready segmentation config for a dataset generated by
/// [`generate_dataset`]: dark-spot augmentation, all three methods, all four
/// metrics.
pub fn example_config(manifest_rel: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        task: TaskType::Segmentation,
        dataset: DatasetConfig {
            manifest: manifest_rel.to_string(),
            remapping: None,
        },
        strategy: StrategyConfig::Augmentation(
            AugmentationSpec::new(
                AugmentationKind::DarkSpots {
                    n_spots: [1, 3],
                    radius: [3.0, 8.0],
                    darkness: [0.4, 1.0],
                },
                0.75,
            )
            .expect("example spec is valid"),
        ),
        model: "init:123".to_string(),
        methods: vec![
            MethodConfig {
                name: "max_softmax".into(),
                temperature: None,
                epsilon: None,
            },
            MethodConfig {
                name: "energy".into(),
                temperature: None,
                epsilon: None,
            },
            MethodConfig {
                name: "odin".into(),
                temperature: Some(1000.0),
                epsilon: Some(0.01),
            },
        ],
        metrics: vec![
            MetricConfig {
                name: "auroc".into(),
                edges: None,
                bins: None,
            },
            MetricConfig {
                name: "binned_auroc".into(),
                edges: None,
                bins: None,
            },
            MetricConfig {
                name: "pixel_auroc".into(),
                edges: None,
                bins: None,
            },
            MetricConfig {
                name: "histogram".into(),
                edges: None,
                bins: Some(10),
            },
        ],
        batch_size: 4,
        limit: None,
        dump_scores: false,
    }
}

pub fn write_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::Internal(format!("serializing config: {e}")))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Classification logit-replay fixture with manufactured separability.
///
/// In-distribution samples get symmetric confident logits `[a, a]` around 3,
/// the OoD dataset gets `[b, b]` around 1. Max-softmax sees 0.5 everywhere
/// (pure ties); the energy confidence separates the populations perfectly.
/// Returns the path of a run-ready config.
pub fn generate_separability_fixture(dir: &Path, n_id: usize, n_ood: usize) -> Result<PathBuf> {
    let opts = SyntheticOptions {
        samples: n_id,
        width: 8,
        height: 8,
        classes: 2,
    };
    generate_dataset(&dir.join("id"), 7, &opts, "id_")?;
    let ood_opts = SyntheticOptions {
        samples: n_ood,
        ..opts
    };
    generate_dataset(&dir.join("ood"), 8, &ood_opts, "ood_")?;

    let mut files = BTreeMap::new();
    for i in 0..n_id {
        let id = format!("id_{i:02}");
        let a = 3.0 + 0.01 * i as f32;
        let rel = format!("logits/{id}.frtd");
        save_tensor(&dir.join(&rel), &Tensor::new(vec![2], vec![a, a])?)?;
        files.insert(id, rel);
    }
    for i in 0..n_ood {
        let id = format!("ood_{i:02}");
        let b = 1.0 + 0.01 * i as f32;
        let rel = format!("logits/{id}.frtd");
        save_tensor(&dir.join(&rel), &Tensor::new(vec![2], vec![b, b])?)?;
        files.insert(id, rel);
    }
    LogitReplay::write_manifest(
        &dir.join("replay.json"),
        TaskType::Classification,
        2,
        &files,
    )?;

    let config = ExperimentConfig {
        seed: 1,
        task: TaskType::Classification,
        dataset: DatasetConfig {
            manifest: "id/manifest.json".into(),
            remapping: None,
        },
        strategy: StrategyConfig::OodDataset(DatasetConfig {
            manifest: "ood/manifest.json".into(),
            remapping: None,
        }),
        model: "replay:replay.json".into(),
        methods: vec![
            MethodConfig {
                name: "max_softmax".into(),
                temperature: None,
                epsilon: None,
            },
            MethodConfig {
                name: "energy".into(),
                temperature: None,
                epsilon: None,
            },
        ],
        metrics: vec![
            MetricConfig {
                name: "auroc".into(),
                edges: None,
                bins: None,
            },
            MetricConfig {
                name: "binned_auroc".into(),
                edges: None,
                bins: None,
            },
        ],
        batch_size: 4,
        limit: None,
        dump_scores: false,
    };
    let config_path = dir.join("config.json");
    write_config(&config_path, &config)?;
    Ok(config_path)
}
