//! Post-hoc OoD scoring methods.
//!
//! Every method speaks the same confidence polarity: **higher score = more
//! in-distribution**. The metric layer relies on that to orient AuROC one
//! way for all methods. Scores are per image for classification and per
//! pixel (an H(x)W map) for segmentation.

use crate::error::{Error, Result};
use crate::math::{argmax, logsumexp, max_softmax};
use crate::model::{Model, PseudoLabels};
use crate::parallel::parallel_map;
use crate::sample::Sample;
use crate::tensor::Tensor;

/// Method output: one scalar per image or one H(x)W score map.
#[derive(Debug, Clone, PartialEq)]
pub enum OodScore {
    Scalar(f32),
    Map(Tensor),
}

impl OodScore {
    /// Image-level reduction: the scalar itself, or the mean of the map
    /// (accumulated in f64).
    pub fn image_level(&self) -> f64 {
        match self {
            OodScore::Scalar(v) => *v as f64,
            OodScore::Map(map) => map.sum_f64() / map.len() as f64,
        }
    }

    /// The score map as a tensor: scalars become `[1]`.
    pub fn to_tensor(&self) -> Tensor {
        match self {
            OodScore::Scalar(v) => Tensor::new(vec![1], vec![*v]).expect("scalar tensor"),
            OodScore::Map(map) => map.clone(),
        }
    }
}

/// The extension contract for scoring methods: implement
/// `calculate_ood_score` for a batch and the harness does the rest.
pub trait OodMethod: Send + Sync {
    fn name(&self) -> &str;

    /// Scores every sample of the batch, in batch order.
    fn calculate_ood_score(&self, batch: &[Sample], model: &dyn Model) -> Result<Vec<OodScore>>;
}

/// Registered method names, as printed by `oodbench list methods`.
pub fn method_registry() -> &'static [&'static str] {
    &["max_softmax", "energy", "odin"]
}

/// Maximum softmax probability per position.
pub fn msp_score(logits: &Tensor, temperature: f32) -> Result<OodScore> {
    per_position(logits, |col| {
        max_softmax(col, temperature).map(|v| v as f64)
    })
}

/// Energy confidence per position: `T * logsumexp(logits / T)`, the negated
/// energy score, so that higher remains more in-distribution.
pub fn energy_score(logits: &Tensor, temperature: f32) -> Result<OodScore> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    let t = temperature as f64;
    per_position(logits, |col| {
        let scaled: Vec<f32> = col.iter().map(|&v| (v as f64 / t) as f32).collect();
        Ok(t * logsumexp(&scaled)?)
    })
}

/// ODIN: nudge the input a step `epsilon` along the direction that increases
/// the predicted class' softmax score, then take the temperature-scaled MSP
/// of the perturbed input. With `epsilon = 0` this reduces exactly to
/// [`msp_score`] of the unperturbed forward pass.
pub fn odin_score(
    sample: &Sample,
    model: &dyn Model,
    temperature: f32,
    epsilon: f32,
) -> Result<OodScore> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be non-negative and finite, got {epsilon}"
        )));
    }
    let out = model.forward(sample)?;
    let labels = argmax_label(&out.logits)?;
    let grad = model.input_gradient(sample, &labels, temperature)?;
    if grad.dims() != sample.image.dims() {
        return Err(Error::Internal(format!(
            "input gradient dims {:?} do not match image {:?}",
            grad.dims(),
            sample.image.dims()
        )));
    }

    let mut perturbed = sample.clone();
    {
        let data = perturbed.image.data_mut();
        for (v, &g) in data.iter_mut().zip(grad.data()) {
            // grad is the NLL gradient, so -sign(grad) is the direction that
            // raises the predicted class' softmax score.
            let step = epsilon * sign(g);
            *v = (*v - step).clamp(0.0, 1.0);
        }
    }
    let out = model.forward(&perturbed)?;
    msp_score(&out.logits, temperature)
}

fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-position argmax of the logits; ties break toward the lowest class.
pub fn argmax_label(logits: &Tensor) -> Result<PseudoLabels> {
    match logits.rank() {
        1 => Ok(PseudoLabels::Class(argmax(logits.data()))),
        3 => {
            let (k, h, w) = (logits.dims()[0], logits.dims()[1], logits.dims()[2]);
            let hw = h * w;
            let mut col = vec![0.0f32; k];
            let indices = (0..hw)
                .map(|p| {
                    for (kk, slot) in col.iter_mut().enumerate() {
                        *slot = logits.data()[kk * hw + p];
                    }
                    argmax(&col)
                })
                .collect();
            Ok(PseudoLabels::Map { h, w, indices })
        }
        _ => Err(Error::Shape(format!(
            "logits must be [K] or [K,H,W], got {:?}",
            logits.dims()
        ))),
    }
}

/// Applies a K-vector reduction at every spatial position.
fn per_position(logits: &Tensor, f: impl Fn(&[f32]) -> Result<f64>) -> Result<OodScore> {
    match logits.rank() {
        1 => Ok(OodScore::Scalar(f(logits.data())? as f32)),
        3 => {
            let (k, h, w) = (logits.dims()[0], logits.dims()[1], logits.dims()[2]);
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "need at least 2 classes, got {k}"
                )));
            }
            let hw = h * w;
            let mut col = vec![0.0f32; k];
            let mut map = vec![0.0f32; hw];
            for (p, slot) in map.iter_mut().enumerate() {
                for (kk, c) in col.iter_mut().enumerate() {
                    *c = logits.data()[kk * hw + p];
                }
                *slot = f(&col)? as f32;
            }
            Ok(OodScore::Map(Tensor::new(vec![h, w], map)?))
        }
        _ => Err(Error::Shape(format!(
            "logits must be [K] or [K,H,W], got {:?}",
            logits.dims()
        ))),
    }
}

/// Max-softmax baseline.
pub struct MaxSoftmax {
    pub temperature: f32,
}

impl Default for MaxSoftmax {
    fn default() -> Self {
        MaxSoftmax { temperature: 1.0 }
    }
}

impl OodMethod for MaxSoftmax {
    fn name(&self) -> &str {
        "max_softmax"
    }

    fn calculate_ood_score(&self, batch: &[Sample], model: &dyn Model) -> Result<Vec<OodScore>> {
        parallel_map(batch, |s| {
            msp_score(&model.forward(s)?.logits, self.temperature)
        })
        .into_iter()
        .collect()
    }
}

/// Energy-based confidence over the whole logit vector.
pub struct EnergyBased {
    pub temperature: f32,
}

impl Default for EnergyBased {
    fn default() -> Self {
        EnergyBased { temperature: 1.0 }
    }
}

impl OodMethod for EnergyBased {
    fn name(&self) -> &str {
        "energy"
    }

    fn calculate_ood_score(&self, batch: &[Sample], model: &dyn Model) -> Result<Vec<OodScore>> {
        parallel_map(batch, |s| {
            energy_score(&model.forward(s)?.logits, self.temperature)
        })
        .into_iter()
        .collect()
    }
}

/// ODIN with conventional defaults `T = 1000`, `epsilon = 0.01`.
pub struct Odin {
    pub temperature: f32,
    pub epsilon: f32,
}

impl Default for Odin {
    fn default() -> Self {
        Odin {
            temperature: 1000.0,
            epsilon: 0.01,
        }
    }
}

impl OodMethod for Odin {
    fn name(&self) -> &str {
        "odin"
    }

    fn calculate_ood_score(&self, batch: &[Sample], model: &dyn Model) -> Result<Vec<OodScore>> {
        parallel_map(batch, |s| {
            odin_score(s, model, self.temperature, self.epsilon)
        })
        .into_iter()
        .collect()
    }
}
