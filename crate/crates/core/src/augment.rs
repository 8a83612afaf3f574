//! Mask-producing augmentations: corrupt an in-distribution sample and mark
//! exactly the corrupted pixels in its OoD mask.
//!
//! The engine never trusts an augmentation's own geometry for the mask.
//! After the kind-specific image edit, the changed-pixel set is computed by
//! comparing against the original image, so the mask is correct even when an
//! edit happens to leave pixels unchanged (zero-valued pixels under a dark
//! spot, an overlay matching the background, ...).
//!
//! Parameter sampling order is fixed per kind and is part of the public
//! contract; reordering draws would silently change every seeded experiment.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sample::Sample;
use crate::tensor::Tensor;

/// Augmentation kind plus its parameter ranges.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationKind {
    /// Multiplies disk-shaped regions by `1 - darkness`.
    DarkSpots {
        n_spots: [u32; 2],
        radius: [f32; 2],
        darkness: [f32; 2],
    },
    /// Fills one axis-aligned square with a constant value across channels.
    /// `size` is the side length as a fraction of `min(H, W)`.
    PatchOverlay { size: [f32; 2], value: [f32; 2] },
    /// Adds Gaussian noise inside one square region covering `coverage` of
    /// the area (relative to the short image side).
    GaussianNoisePatch { sigma: [f32; 2], coverage: [f32; 2] },
}

impl AugmentationKind {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentationKind::DarkSpots { .. } => "dark_spots",
            AugmentationKind::PatchOverlay { .. } => "patch_overlay",
            AugmentationKind::GaussianNoisePatch { .. } => "gaussian_noise_patch",
        }
    }

    /// Registered kind names, as printed by `oodbench list augmentations`.
    pub fn registry() -> &'static [&'static str] {
        &["dark_spots", "patch_overlay", "gaussian_noise_patch"]
    }
}

/// A sampled augmentation: applied with probability `p`, parameters drawn
/// uniformly from the kind's ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    pub p: f64,
    pub kind: AugmentationKind,
}

impl AugmentationSpec {
    pub fn new(kind: AugmentationKind, p: f64) -> Result<Self> {
        let spec = AugmentationSpec { p, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "augmentation probability must be in [0,1], got {}",
                self.p
            )));
        }
        let range_ok = |r: [f32; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
        match &self.kind {
            AugmentationKind::DarkSpots {
                n_spots,
                radius,
                darkness,
            } => {
                if n_spots[0] > n_spots[1] {
                    return Err(Error::Config("dark_spots: empty n_spots range".into()));
                }
                if !range_ok(*radius) || radius[0] < 1.0 {
                    return Err(Error::Config(
                        "dark_spots: radius range must satisfy 1 <= lo <= hi".into(),
                    ));
                }
                if !range_ok(*darkness) || darkness[0] < 0.0 || darkness[1] > 1.0 {
                    return Err(Error::Config(
                        "dark_spots: darkness range must lie within [0,1]".into(),
                    ));
                }
            }
            AugmentationKind::PatchOverlay { size, value } => {
                if !range_ok(*size) || size[0] <= 0.0 || size[1] > 1.0 {
                    return Err(Error::Config(
                        "patch_overlay: size range must lie within (0,1]".into(),
                    ));
                }
                if !range_ok(*value) || value[0] < 0.0 || value[1] > 1.0 {
                    return Err(Error::Config(
                        "patch_overlay: value range must lie within [0,1]".into(),
                    ));
                }
            }
            AugmentationKind::GaussianNoisePatch { sigma, coverage } => {
                if !range_ok(*sigma) || sigma[0] <= 0.0 || sigma[1] > 1.0 {
                    return Err(Error::Config(
                        "gaussian_noise_patch: sigma range must lie within (0,1]".into(),
                    ));
                }
                if !range_ok(*coverage) || coverage[0] <= 0.0 || coverage[1] > 1.0 {
                    return Err(Error::Config(
                        "gaussian_noise_patch: coverage range must lie within (0,1]".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

// The config surface is flat ({"kind": ..., "p": ..., <ranges>}), which rules
// out derived tagged-enum serde if unknown keys must stay hard errors; both
// directions are spelled out by hand instead.
impl Serialize for AugmentationSpec {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let n = match &self.kind {
            AugmentationKind::DarkSpots { .. } => 5,
            _ => 4,
        };
        let mut map = serializer.serialize_map(Some(n))?;
        map.serialize_entry("kind", self.kind.name())?;
        map.serialize_entry("p", &self.p)?;
        match &self.kind {
            AugmentationKind::DarkSpots {
                n_spots,
                radius,
                darkness,
            } => {
                map.serialize_entry("n_spots", n_spots)?;
                map.serialize_entry("radius", radius)?;
                map.serialize_entry("darkness", darkness)?;
            }
            AugmentationKind::PatchOverlay { size, value } => {
                map.serialize_entry("size", size)?;
                map.serialize_entry("value", value)?;
            }
            AugmentationKind::GaussianNoisePatch { sigma, coverage } => {
                map.serialize_entry("sigma", sigma)?;
                map.serialize_entry("coverage", coverage)?;
            }
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AugmentationSpec {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        parse_spec(&value).map_err(D::Error::custom)
    }
}

fn parse_spec(value: &serde_json::Value) -> Result<AugmentationSpec> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("augmentation must be an object".into()))?;
    let kind_name = obj
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("augmentation needs a string \"kind\"".into()))?;
    let p = match obj.get("p") {
        None => 1.0,
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Config("augmentation \"p\" must be a number".into()))?,
    };

    let range_f32 = |key: &str| -> Result<[f32; 2]> {
        let arr = obj
            .get(key)
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Config(format!("{kind_name}: missing range \"{key}\"")))?;
        if arr.len() != 2 || !arr.iter().all(|v| v.is_number()) {
            return Err(Error::Config(format!(
                "{kind_name}: \"{key}\" must be a [lo, hi] number pair"
            )));
        }
        Ok([
            arr[0].as_f64().unwrap() as f32,
            arr[1].as_f64().unwrap() as f32,
        ])
    };
    let range_u32 = |key: &str| -> Result<[u32; 2]> {
        let arr = obj
            .get(key)
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Config(format!("{kind_name}: missing range \"{key}\"")))?;
        if arr.len() != 2 || !arr.iter().all(|v| v.is_u64()) {
            return Err(Error::Config(format!(
                "{kind_name}: \"{key}\" must be a [lo, hi] pair of non-negative integers"
            )));
        }
        Ok([
            arr[0].as_u64().unwrap() as u32,
            arr[1].as_u64().unwrap() as u32,
        ])
    };

    let (kind, allowed): (AugmentationKind, &[&str]) = match kind_name {
        "dark_spots" => (
            AugmentationKind::DarkSpots {
                n_spots: range_u32("n_spots")?,
                radius: range_f32("radius")?,
                darkness: range_f32("darkness")?,
            },
            &["kind", "p", "n_spots", "radius", "darkness"],
        ),
        "patch_overlay" => (
            AugmentationKind::PatchOverlay {
                size: range_f32("size")?,
                value: range_f32("value")?,
            },
            &["kind", "p", "size", "value"],
        ),
        "gaussian_noise_patch" => (
            AugmentationKind::GaussianNoisePatch {
                sigma: range_f32("sigma")?,
                coverage: range_f32("coverage")?,
            },
            &["kind", "p", "sigma", "coverage"],
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown augmentation kind \"{other}\" (known: {})",
                AugmentationKind::registry().join(", ")
            )))
        }
    };
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!("{kind_name}: unknown key \"{key}\"")));
        }
    }
    AugmentationSpec::new(kind, p)
}

/// Record of one concrete application, stored in sample metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedAugmentation {
    pub name: String,
    pub params: Vec<(String, String)>,
    /// Pixels newly marked OoD by this application (resulting mask sum minus
    /// the prior mask sum).
    pub affected_pixels: usize,
}

impl AppliedAugmentation {
    fn write_meta(&self, meta: &mut BTreeMap<String, String>) {
        meta.insert("augmentation".into(), self.name.clone());
        let params = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        meta.insert("augmentation.params".into(), params);
        meta.insert(
            "augmentation.affected".into(),
            self.affected_pixels.to_string(),
        );
    }

    /// Reads the record back out of sample metadata.
    pub fn from_meta(sample: &Sample) -> Option<Self> {
        let name = sample.meta.get("augmentation")?.clone();
        let affected_pixels = sample.meta.get("augmentation.affected")?.parse().ok()?;
        let params = sample
            .meta
            .get("augmentation.params")?
            .split(';')
            .filter(|s| !s.is_empty())
            .filter_map(|kv| {
                let (k, v) = kv.split_once('=')?;
                Some((k.to_string(), v.to_string()))
            })
            .collect();
        Some(AppliedAugmentation {
            name,
            params,
            affected_pixels,
        })
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Applies `spec` to `sample`: one uniform draw decides whether anything
/// happens at all (probability `p`), then the kind-specific augmentation
/// runs with parameters drawn from its ranges.
///
/// A probability miss returns the sample bit-identical. The result is a pure
/// function of `(spec, sample, rng state)`.
pub fn apply(spec: &AugmentationSpec, sample: &Sample, rng: &mut Rng) -> Sample {
    if rng.next_f64() >= spec.p {
        return sample.clone();
    }
    match &spec.kind {
        AugmentationKind::DarkSpots {
            n_spots,
            radius,
            darkness,
        } => apply_dark_spots(sample, *n_spots, *radius, *darkness, rng),
        AugmentationKind::PatchOverlay { size, value } => {
            apply_patch_overlay(sample, *size, *value, rng)
        }
        AugmentationKind::GaussianNoisePatch { sigma, coverage } => {
            apply_gaussian_noise_patch(sample, *sigma, *coverage, rng)
        }
    }
}

/// Dark disk artifacts: every pixel inside a sampled disk is multiplied by
/// `1 - darkness` in all channels.
///
/// Sampling order: spot count `n`, then per spot `(cy, cx, r, d)`.
pub fn apply_dark_spots(
    sample: &Sample,
    n_spots: [u32; 2],
    radius: [f32; 2],
    darkness: [f32; 2],
    rng: &mut Rng,
) -> Sample {
    let (h, w) = (sample.height(), sample.width());
    let mut image = sample.image.clone();
    let n = rng.next_int_inclusive(n_spots[0], n_spots[1]);
    let mut params = vec![("n".to_string(), n.to_string())];
    for s in 0..n {
        let cy = rng.next_index(h);
        let cx = rng.next_index(w);
        let r = rng.next_range_f32(radius[0], radius[1]);
        let d = rng.next_range_f32(darkness[0], darkness[1]);
        stamp_dark_spot(&mut image, cy, cx, r, d);
        params.push((format!("spot{s}.cy"), cy.to_string()));
        params.push((format!("spot{s}.cx"), cx.to_string()));
        params.push((format!("spot{s}.r"), r.to_string()));
        params.push((format!("spot{s}.d"), d.to_string()));
    }
    finish(sample, image, "dark_spots", params)
}

fn stamp_dark_spot(image: &mut Tensor, cy: usize, cx: usize, r: f32, d: f32) {
    let dims = image.dims().to_vec();
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    let r_ceil = r.ceil() as i64;
    let r_sq = (r as f64) * (r as f64);
    let factor = 1.0 - d;
    let data = image.data_mut();
    let y_lo = (cy as i64 - r_ceil).max(0) as usize;
    let y_hi = ((cy as i64 + r_ceil) as usize).min(h - 1);
    let x_lo = (cx as i64 - r_ceil).max(0) as usize;
    let x_hi = ((cx as i64 + r_ceil) as usize).min(w - 1);
    for y in y_lo..=y_hi {
        let dy = y as i64 - cy as i64;
        for x in x_lo..=x_hi {
            let dx = x as i64 - cx as i64;
            if (dy * dy + dx * dx) as f64 <= r_sq {
                for ch in 0..c {
                    data[ch * h * w + y * w + x] *= factor;
                }
            }
        }
    }
}

/// One constant-valued square placed fully inside the image.
///
/// Sampling order: `size`, `value`, `top`, `left`. The side length is
/// `ceil(size * min(H, W))`.
pub fn apply_patch_overlay(
    sample: &Sample,
    size: [f32; 2],
    value: [f32; 2],
    rng: &mut Rng,
) -> Sample {
    let (c, h, w) = (sample.channels(), sample.height(), sample.width());
    let short = h.min(w);
    let frac = rng.next_range_f32(size[0], size[1]);
    let side = ((frac as f64 * short as f64).ceil() as usize).clamp(1, short);
    let v = rng.next_range_f32(value[0], value[1]);
    let top = rng.next_index(h - side + 1);
    let left = rng.next_index(w - side + 1);

    let mut image = sample.image.clone();
    let data = image.data_mut();
    for y in top..top + side {
        for x in left..left + side {
            for ch in 0..c {
                data[ch * h * w + y * w + x] = v;
            }
        }
    }
    let params = vec![
        ("side".to_string(), side.to_string()),
        ("value".to_string(), v.to_string()),
        ("top".to_string(), top.to_string()),
        ("left".to_string(), left.to_string()),
    ];
    finish(sample, image, "patch_overlay", params)
}

/// Additive Gaussian noise inside one square region.
///
/// The region's side is `ceil(sqrt(coverage) * min(H, W))`, so `coverage`
/// is the covered area fraction on square images. Sampling order: `sigma`,
/// `coverage`, `top`, `left`, then one normal deviate per pixel per channel
/// in row-major order with channels innermost.
pub fn apply_gaussian_noise_patch(
    sample: &Sample,
    sigma: [f32; 2],
    coverage: [f32; 2],
    rng: &mut Rng,
) -> Sample {
    let (c, h, w) = (sample.channels(), sample.height(), sample.width());
    let short = h.min(w);
    let sigma_v = rng.next_range_f32(sigma[0], sigma[1]);
    let cov = rng.next_range_f32(coverage[0], coverage[1]);
    let side = (((cov as f64).sqrt() * short as f64).ceil() as usize).clamp(1, short);
    let top = rng.next_index(h - side + 1);
    let left = rng.next_index(w - side + 1);

    let mut image = sample.image.clone();
    let data = image.data_mut();
    for y in top..top + side {
        for x in left..left + side {
            for ch in 0..c {
                let z = rng.next_gaussian() as f32;
                let idx = ch * h * w + y * w + x;
                data[idx] = (data[idx] + sigma_v * z).clamp(0.0, 1.0);
            }
        }
    }
    let params = vec![
        ("sigma".to_string(), sigma_v.to_string()),
        ("side".to_string(), side.to_string()),
        ("top".to_string(), top.to_string()),
        ("left".to_string(), left.to_string()),
    ];
    finish(sample, image, "gaussian_noise_patch", params)
}

/// Fraction of OoD pixels, accumulated in f64.
pub fn ood_fraction(sample: &Sample) -> f64 {
    let mask = &sample.ood_mask;
    mask.sum_f64() / mask.len() as f64
}

/// Clamps the edited image, derives the mask update from the changed-pixel
/// set and records the application in metadata.
fn finish(
    original: &Sample,
    mut image: Tensor,
    name: &str,
    params: Vec<(String, String)>,
) -> Sample {
    for v in image.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let (h, w) = (original.height(), original.width());
    let c = original.channels();
    let mut out = original.clone();
    let mut affected = 0usize;
    {
        let mask = out.ood_mask.data_mut();
        let old = original.image.data();
        let new = image.data();
        for y in 0..h {
            for x in 0..w {
                let changed = (0..c).any(|ch| {
                    let idx = ch * h * w + y * w + x;
                    new[idx] != old[idx]
                });
                if changed {
                    let m = &mut mask[y * w + x];
                    if *m == 0.0 {
                        *m = 1.0;
                        affected += 1;
                    }
                }
            }
        }
    }
    out.image = image;
    AppliedAugmentation {
        name: name.to_string(),
        params,
        affected_pixels: affected,
    }
    .write_meta(&mut out.meta);
    out
}
