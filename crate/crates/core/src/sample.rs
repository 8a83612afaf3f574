//! The sample type flowing through the pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Classification,
    Segmentation,
}

impl std::fmt::Display for TaskType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskType::Classification => write!(f, "classification"),
            TaskType::Segmentation => write!(f, "segmentation"),
        }
    }
}

/// One image with optional ground truth, an OoD mask and free-form metadata.
///
/// The image is C(x)H(x)W with values in `[0, 1]`. `ood_mask` is H(x)W and holds
/// exactly 0 or 1, with 1 marking out-of-distribution pixels; a fresh sample
/// starts all in-distribution. Samples are immutable by convention once they
/// leave the strategy stage, so they can be shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Tensor,
    /// H(x)W map of ground-truth class indices, stored as f32.
    pub seg_mask: Option<Tensor>,
    /// H(x)W map in {0, 1}; 1 = OoD pixel.
    pub ood_mask: Tensor,
    pub label: Option<usize>,
    pub meta: BTreeMap<String, String>,
}

impl Sample {
    /// Builds a sample around a C(x)H(x)W image with an all-zero OoD mask.
    pub fn new(id: &str, image: Tensor) -> Result<Self> {
        if image.rank() != 3 {
            return Err(Error::Shape(format!(
                "image must be CxHxW, got dims {:?}",
                image.dims()
            )));
        }
        if image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Data(format!(
                "image values must lie in [0,1] (sample {id})"
            )));
        }
        let (h, w) = (image.dims()[1], image.dims()[2]);
        let mut meta = BTreeMap::new();
        meta.insert("id".to_string(), id.to_string());
        Ok(Sample {
            image,
            seg_mask: None,
            ood_mask: Tensor::zeros(&[h, w]),
            label: None,
            meta,
        })
    }

    pub fn id(&self) -> &str {
        self.meta.get("id").map(String::as_str).unwrap_or("")
    }

    pub fn channels(&self) -> usize {
        self.image.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.image.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.image.dims()[2]
    }

    /// Replaces the OoD mask, enforcing shape and 0/1 values.
    pub fn set_ood_mask(&mut self, mask: Tensor) -> Result<()> {
        check_mask(&mask, self.height(), self.width())?;
        self.ood_mask = mask;
        Ok(())
    }

    /// Re-checks every structural invariant. Cheap enough for test code and
    /// load boundaries.
    pub fn validate(&self) -> Result<()> {
        if self.image.rank() != 3 {
            return Err(Error::Shape("image must be CxHxW".into()));
        }
        if self.image.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Data(format!(
                "image values out of [0,1] (sample {})",
                self.id()
            )));
        }
        check_mask(&self.ood_mask, self.height(), self.width())?;
        if let Some(seg) = &self.seg_mask {
            if seg.dims() != [self.height(), self.width()] {
                return Err(Error::Shape(format!(
                    "seg_mask dims {:?} do not match image {}x{}",
                    seg.dims(),
                    self.height(),
                    self.width()
                )));
            }
        }
        Ok(())
    }
}

fn check_mask(mask: &Tensor, h: usize, w: usize) -> Result<()> {
    if mask.dims() != [h, w] {
        return Err(Error::Shape(format!(
            "ood_mask dims {:?} do not match image {h}x{w}",
            mask.dims()
        )));
    }
    if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("ood_mask values must be exactly 0 or 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sample_starts_in_distribution() {
        let img = Tensor::filled(&[3, 4, 5], 0.5);
        let s = Sample::new("a", img).unwrap();
        assert_eq!(s.ood_mask.dims(), &[4, 5]);
        assert_eq!(s.ood_mask.sum_f64(), 0.0);
        assert_eq!(s.id(), "a");
        s.validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_image() {
        let img = Tensor::filled(&[1, 2, 2], 1.5);
        assert!(Sample::new("a", img).is_err());
    }

    #[test]
    fn rejects_wrong_rank() {
        let img = Tensor::filled(&[2, 2], 0.5);
        assert!(Sample::new("a", img).is_err());
    }

    #[test]
    fn mask_must_be_binary_and_shaped() {
        let img = Tensor::filled(&[1, 2, 2], 0.5);
        let mut s = Sample::new("a", img).unwrap();
        assert!(s.set_ood_mask(Tensor::filled(&[2, 2], 0.5)).is_err());
        assert!(s.set_ood_mask(Tensor::filled(&[2, 3], 1.0)).is_err());
        assert!(s.set_ood_mask(Tensor::filled(&[2, 2], 1.0)).is_ok());
    }

    #[test]
    fn task_type_serializes_snake_case() {
        assert_eq!(
            serde_json::to_string(&TaskType::Segmentation).unwrap(),
            "\"segmentation\""
        );
        let t: TaskType = serde_json::from_str("\"classification\"").unwrap();
        assert_eq!(t, TaskType::Classification);
    }
}
