//! Model abstraction: logits from images, plus input gradients where the
//! backing implementation supports them.
//!
//! Two implementations ship with the crate: [`MicroNet`], a small
//! differentiable conv net whose input gradient is computed by hand-rolled
//! backpropagation, and [`LogitReplay`], which serves precomputed logits from
//! FRTD files so externally-produced network outputs can be evaluated
//! post hoc (no gradients).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{load_tensor, save_tensor};
use crate::error::{Error, Result};
use crate::math::softmax;
use crate::rng::{derive_stream_seed, Rng};
use crate::sample::{Sample, TaskType};
use crate::tensor::Tensor;

/// Width of the hidden conv layer.
pub const HIDDEN: usize = 8;

/// Logits for one sample: dims `[K]` for classification, `[K, H, W]` for
/// segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub logits: Tensor,
}

/// Predicted-class targets for the perturbation loss.
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoLabels {
    Class(usize),
    /// Row-major H(x)W per-pixel class indices.
    Map {
        h: usize,
        w: usize,
        indices: Vec<usize>,
    },
}

pub trait Model: Send + Sync {
    fn task(&self) -> TaskType;
    fn class_count(&self) -> usize;

    /// Deterministic logits for one sample.
    fn forward(&self, sample: &Sample) -> Result<ModelOutput>;

    fn supports_input_gradient(&self) -> bool {
        false
    }

    /// Gradient of the mean cross-entropy `-log S_y(x; T)` against the
    /// pseudo-labels, taken with respect to the input image. Same shape as
    /// the image. Optional capability.
    fn input_gradient(
        &self,
        _sample: &Sample,
        _labels: &PseudoLabels,
        _temperature: f32,
    ) -> Result<Tensor> {
        Err(Error::Unsupported(
            "this model does not provide input gradients".into(),
        ))
    }
}

/// Two-layer conv net: 3x3 conv (padding 1) to [`HIDDEN`] channels, ReLU,
/// then a per-pixel affine to `K` logits. Classification uses the same trunk
/// followed by global average pooling before the affine head, which makes the
/// classification logits exactly the spatial mean of the segmentation logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroNet {
    task: TaskType,
    channels: usize,
    classes: usize,
    conv_w: Tensor, // [HIDDEN, C, 3, 3]
    conv_b: Tensor, // [HIDDEN]
    head_w: Tensor, // [K, HIDDEN]
    head_b: Tensor, // [K]
}

impl MicroNet {
    /// Seeded init: each layer draws i.i.d. uniform weights in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from its own derived stream
    /// (weights row-major, then biases).
    pub fn init(seed: u64, channels: usize, classes: usize, task: TaskType) -> Result<Self> {
        if channels < 1 {
            return Err(Error::InvalidArgument("channels must be >= 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument("classes must be >= 2".into()));
        }
        let conv_fan_in = channels * 9;
        let mut layer0 = Rng::new(derive_stream_seed(seed, "w", 0));
        let conv_w = uniform_tensor(
            &[HIDDEN, channels, 3, 3],
            1.0 / (conv_fan_in as f64).sqrt(),
            &mut layer0,
        );
        let conv_b = uniform_tensor(&[HIDDEN], 1.0 / (conv_fan_in as f64).sqrt(), &mut layer0);

        let mut layer1 = Rng::new(derive_stream_seed(seed, "w", 1));
        let head_w = uniform_tensor(
            &[classes, HIDDEN],
            1.0 / (HIDDEN as f64).sqrt(),
            &mut layer1,
        );
        let head_b = uniform_tensor(&[classes], 1.0 / (HIDDEN as f64).sqrt(), &mut layer1);

        MicroNet::from_parts(task, conv_w, conv_b, head_w, head_b)
    }

    /// Assembles a net from explicit weight tensors, validating shapes.
    pub fn from_parts(
        task: TaskType,
        conv_w: Tensor,
        conv_b: Tensor,
        head_w: Tensor,
        head_b: Tensor,
    ) -> Result<Self> {
        let dims = conv_w.dims();
        if dims.len() != 4 || dims[0] != HIDDEN || dims[2] != 3 || dims[3] != 3 {
            return Err(Error::Shape(format!(
                "conv weights must be [{HIDDEN}, C, 3, 3], got {dims:?}"
            )));
        }
        let channels = dims[1];
        if conv_b.dims() != [HIDDEN] {
            return Err(Error::Shape(format!(
                "conv bias must be [{HIDDEN}], got {:?}",
                conv_b.dims()
            )));
        }
        let hdims = head_w.dims();
        if hdims.len() != 2 || hdims[1] != HIDDEN {
            return Err(Error::Shape(format!(
                "head weights must be [K, {HIDDEN}], got {hdims:?}"
            )));
        }
        let classes = hdims[0];
        if classes < 2 {
            return Err(Error::Shape("head must have at least 2 classes".into()));
        }
        if head_b.dims() != [classes] {
            return Err(Error::Shape(format!(
                "head bias must be [{classes}], got {:?}",
                head_b.dims()
            )));
        }
        Ok(MicroNet {
            task,
            channels,
            classes,
            conv_w,
            conv_b,
            head_w,
            head_b,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Conv layer weights, `[HIDDEN, C, 3, 3]`.
    pub fn conv_weight(&self) -> &Tensor {
        &self.conv_w
    }

    pub fn conv_bias(&self) -> &Tensor {
        &self.conv_b
    }

    /// Head weights, `[K, HIDDEN]`.
    pub fn head_weight(&self) -> &Tensor {
        &self.head_w
    }

    pub fn head_bias(&self) -> &Tensor {
        &self.head_b
    }

    /// Hidden-layer pre-activations for an image, `[HIDDEN, H, W]`. Exposed
    /// so derivative oracles can check their smoothness preconditions.
    pub fn pre_activations(&self, image: &Tensor) -> Tensor {
        self.trunk(image)
    }

    /// Pre-activations of the hidden layer, `[HIDDEN, H, W]`.
    fn trunk(&self, image: &Tensor) -> Tensor {
        let (c, h, w) = (image.dims()[0], image.dims()[1], image.dims()[2]);
        let img = image.data();
        let wts = self.conv_w.data();
        let mut pre = vec![0.0f32; HIDDEN * h * w];
        for m in 0..HIDDEN {
            let bias = self.conv_b.data()[m];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias;
                    for ch in 0..c {
                        let w_base = ((m * c) + ch) * 9;
                        for ky in 0..3usize {
                            let iy = y as isize + ky as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3usize {
                                let ix = x as isize + kx as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                acc += wts[w_base + ky * 3 + kx]
                                    * img[ch * h * w + iy as usize * w + ix as usize];
                            }
                        }
                    }
                    pre[m * h * w + y * w + x] = acc;
                }
            }
        }
        Tensor::new(vec![HIDDEN, h, w], pre).expect("trunk dims")
    }

    fn check_input(&self, sample: &Sample) -> Result<()> {
        if sample.channels() != self.channels {
            return Err(Error::Shape(format!(
                "model expects {} input channels, sample {} has {}",
                self.channels,
                sample.id(),
                sample.channels()
            )));
        }
        Ok(())
    }

    /// Saves the weight bundle: `manifest.json` plus one FRTD file per layer.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let layers = [
            ("conv.weight", &self.conv_w),
            ("conv.bias", &self.conv_b),
            ("head.weight", &self.head_w),
            ("head.bias", &self.head_b),
        ];
        let mut manifest = BundleManifest {
            task: self.task,
            channels: self.channels,
            classes: self.classes,
            layers: Vec::new(),
        };
        for (name, tensor) in layers {
            let file = format!("{name}.frtd");
            save_tensor(&dir.join(&file), tensor)?;
            manifest.layers.push(BundleLayer {
                name: name.to_string(),
                file,
                dims: tensor.dims().to_vec(),
            });
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("serializing bundle manifest: {e}")))?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Loads a weight bundle written by [`MicroNet::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: BundleManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let mut tensors: BTreeMap<String, Tensor> = BTreeMap::new();
        for layer in &manifest.layers {
            let tensor = load_tensor(&dir.join(&layer.file))?;
            if tensor.dims() != layer.dims.as_slice() {
                return Err(Error::Format(format!(
                    "bundle layer {} has dims {:?}, manifest says {:?}",
                    layer.name,
                    tensor.dims(),
                    layer.dims
                )));
            }
            tensors.insert(layer.name.clone(), tensor);
        }
        let mut take = |name: &str| {
            tensors
                .remove(name)
                .ok_or_else(|| Error::Format(format!("bundle is missing layer {name}")))
        };
        let net = MicroNet::from_parts(
            manifest.task,
            take("conv.weight")?,
            take("conv.bias")?,
            take("head.weight")?,
            take("head.bias")?,
        )?;
        if net.channels != manifest.channels || net.classes != manifest.classes {
            return Err(Error::Format(format!(
                "bundle manifest says C={} K={}, weights imply C={} K={}",
                manifest.channels, manifest.classes, net.channels, net.classes
            )));
        }
        Ok(net)
    }
}

fn uniform_tensor(dims: &[usize], bound: f64, rng: &mut Rng) -> Tensor {
    let len: usize = dims.iter().product();
    let data = (0..len)
        .map(|_| ((rng.next_f64() * 2.0 - 1.0) * bound) as f32)
        .collect();
    Tensor::new(dims.to_vec(), data).expect("uniform tensor dims")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleManifest {
    task: TaskType,
    channels: usize,
    classes: usize,
    layers: Vec<BundleLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleLayer {
    name: String,
    file: String,
    dims: Vec<usize>,
}

impl Model for MicroNet {
    fn task(&self) -> TaskType {
        self.task
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn forward(&self, sample: &Sample) -> Result<ModelOutput> {
        self.check_input(sample)?;
        let (h, w) = (sample.height(), sample.width());
        let pre = self.trunk(&sample.image);
        let hw = h * w;
        let head_w = self.head_w.data();
        let head_b = self.head_b.data();
        let logits = match self.task {
            TaskType::Segmentation => {
                let mut z = vec![0.0f32; self.classes * hw];
                for k in 0..self.classes {
                    for p in 0..hw {
                        let mut acc = head_b[k];
                        for m in 0..HIDDEN {
                            acc += head_w[k * HIDDEN + m] * pre.data()[m * hw + p].max(0.0);
                        }
                        z[k * hw + p] = acc;
                    }
                }
                Tensor::new(vec![self.classes, h, w], z)?
            }
            TaskType::Classification => {
                let mut pooled = [0.0f32; HIDDEN];
                for (m, slot) in pooled.iter_mut().enumerate() {
                    let mut acc = 0.0f32;
                    for p in 0..hw {
                        acc += pre.data()[m * hw + p].max(0.0);
                    }
                    *slot = acc / hw as f32;
                }
                let z = (0..self.classes)
                    .map(|k| {
                        let mut acc = head_b[k];
                        for m in 0..HIDDEN {
                            acc += head_w[k * HIDDEN + m] * pooled[m];
                        }
                        acc
                    })
                    .collect();
                Tensor::new(vec![self.classes], z)?
            }
        };
        Ok(ModelOutput { logits })
    }

    fn supports_input_gradient(&self) -> bool {
        true
    }

    fn input_gradient(
        &self,
        sample: &Sample,
        labels: &PseudoLabels,
        temperature: f32,
    ) -> Result<Tensor> {
        self.check_input(sample)?;
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        let (c, h, w) = (self.channels, sample.height(), sample.width());
        let hw = h * w;
        let pre = self.trunk(&sample.image);
        let head_w = self.head_w.data();
        let head_b = self.head_b.data();
        let k_count = self.classes;

        // d(loss)/d(hidden activation), shape [HIDDEN, H, W].
        let mut d_act = vec![0.0f32; HIDDEN * hw];
        match (self.task, labels) {
            (
                TaskType::Segmentation,
                PseudoLabels::Map {
                    h: lh,
                    w: lw,
                    indices,
                },
            ) => {
                if *lh != h || *lw != w || indices.len() != hw {
                    return Err(Error::Shape(format!(
                        "pseudo-label map {lh}x{lw} does not match image {h}x{w}"
                    )));
                }
                // Mean per-pixel cross-entropy, so the loss scale does not
                // grow with the image.
                let scale = 1.0 / (temperature as f64 * hw as f64);
                let mut col = vec![0.0f32; k_count];
                for p in 0..hw {
                    let target = indices[p];
                    if target >= k_count {
                        return Err(Error::Data(format!(
                            "pseudo-label {target} out of range (K={k_count})"
                        )));
                    }
                    for k in 0..k_count {
                        let mut acc = head_b[k];
                        for m in 0..HIDDEN {
                            acc += head_w[k * HIDDEN + m] * pre.data()[m * hw + p].max(0.0);
                        }
                        col[k] = acc;
                    }
                    let probs = softmax(&col, temperature)?;
                    for k in 0..k_count {
                        let delta = if k == target { 1.0 } else { 0.0 };
                        let dz = ((probs[k] as f64 - delta) * scale) as f32;
                        for m in 0..HIDDEN {
                            d_act[m * hw + p] += dz * head_w[k * HIDDEN + m];
                        }
                    }
                }
            }
            (TaskType::Classification, PseudoLabels::Class(target)) => {
                if *target >= k_count {
                    return Err(Error::Data(format!(
                        "pseudo-label {target} out of range (K={k_count})"
                    )));
                }
                let logits = self.forward(sample)?.logits;
                let probs = softmax(logits.data(), temperature)?;
                // dL/d(pooled_m) spread uniformly over the pooled positions.
                let mut d_pool = [0.0f32; HIDDEN];
                for k in 0..k_count {
                    let delta = if k == *target { 1.0 } else { 0.0 };
                    let dz = (probs[k] as f64 - delta) as f32 / temperature;
                    for m in 0..HIDDEN {
                        d_pool[m] += dz * head_w[k * HIDDEN + m];
                    }
                }
                for m in 0..HIDDEN {
                    let per_pos = d_pool[m] / hw as f32;
                    for p in 0..hw {
                        d_act[m * hw + p] = per_pos;
                    }
                }
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "pseudo-label kind does not match the model task".into(),
                ))
            }
        }

        // Through the ReLU (subgradient 0 at 0), then scatter through the
        // conv with the same index arithmetic as the forward pass.
        let wts = self.conv_w.data();
        let mut grad = vec![0.0f32; c * hw];
        for m in 0..HIDDEN {
            for y in 0..h {
                for x in 0..w {
                    let p = y * w + x;
                    if pre.data()[m * hw + p] <= 0.0 {
                        continue;
                    }
                    let g = d_act[m * hw + p];
                    if g == 0.0 {
                        continue;
                    }
                    for ch in 0..c {
                        let w_base = ((m * c) + ch) * 9;
                        for ky in 0..3usize {
                            let iy = y as isize + ky as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3usize {
                                let ix = x as isize + kx as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                grad[ch * hw + iy as usize * w + ix as usize] +=
                                    wts[w_base + ky * 3 + kx] * g;
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![c, h, w], grad)
    }
}

/// Serves precomputed logits keyed by sample id; gradients unsupported.
///
/// Manifest JSON:
/// `{"task": "...", "class_count": K, "logits": {"<id>": "rel/path.frtd"}}`.
#[derive(Debug, Clone)]
pub struct LogitReplay {
    root: PathBuf,
    task: TaskType,
    classes: usize,
    files: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplayManifest {
    task: TaskType,
    class_count: usize,
    logits: BTreeMap<String, String>,
}

impl LogitReplay {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let bytes = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: ReplayManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        if manifest.class_count < 2 {
            return Err(Error::Data("replay class_count must be >= 2".into()));
        }
        Ok(LogitReplay {
            root: manifest_path
                .parent()
                .unwrap_or(Path::new("."))
                .to_path_buf(),
            task: manifest.task,
            classes: manifest.class_count,
            files: manifest.logits,
        })
    }

    /// Writes a replay manifest for a set of id -> relative path pairs.
    pub fn write_manifest(
        path: &Path,
        task: TaskType,
        class_count: usize,
        logits: &BTreeMap<String, String>,
    ) -> Result<()> {
        let manifest = ReplayManifest {
            task,
            class_count,
            logits: logits.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("serializing replay manifest: {e}")))?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

impl Model for LogitReplay {
    fn task(&self) -> TaskType {
        self.task
    }

    fn class_count(&self) -> usize {
        self.classes
    }

    fn forward(&self, sample: &Sample) -> Result<ModelOutput> {
        let id = sample.id();
        let rel = self.files.get(id).ok_or_else(|| {
            Error::Data(format!("no replay logits recorded for sample id \"{id}\""))
        })?;
        let logits = load_tensor(&self.root.join(rel))?;
        let ok = match self.task {
            TaskType::Classification => logits.dims() == [self.classes],
            TaskType::Segmentation => {
                logits.dims() == [self.classes, sample.height(), sample.width()]
            }
        };
        if !ok {
            return Err(Error::Shape(format!(
                "replay logits for \"{id}\" have dims {:?}, expected {} K={} for a {}x{} image",
                logits.dims(),
                self.task,
                self.classes,
                sample.height(),
                sample.width()
            )));
        }
        if !logits.all_finite() {
            return Err(Error::Data(format!(
                "replay logits for \"{id}\" contain non-finite values"
            )));
        }
        Ok(ModelOutput { logits })
    }
}
