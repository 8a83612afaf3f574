//! AuROC-based evaluation of scored samples.
//!
//! AuROC here is the probability that a random in-distribution item outscores
//! a random OoD item, ties counted half (the Mann-Whitney convention;
//! max-softmax produces exact ties on symmetric logits, so the half credit is
//! load-bearing). Computed by rank sums in O(n log n), with the pair counts
//! held in exact integer half-units so the result equals the O(n^2) pairwise
//! definition bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::OodScore;
use crate::tensor::Tensor;

/// One scored sample, carrying everything the metric layer needs.
#[derive(Debug, Clone)]
pub struct ScoredRecord {
    pub id: String,
    pub ood_fraction: f64,
    pub score: OodScore,
    /// H(x)W OoD mask; required for pixel-level AuROC.
    pub ood_mask: Option<Tensor>,
}

impl ScoredRecord {
    /// A sample counts as OoD when any of its pixels do.
    pub fn is_ood(&self) -> bool {
        self.ood_fraction > 0.0
    }

    pub fn image_score(&self) -> f64 {
        self.score.image_level()
    }
}

/// One metric value with its support counts. `value` is `None` when a
/// population is empty (undefined is distinguishable from AuROC 0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCell {
    pub value: Option<f64>,
    pub n_in: usize,
    pub n_ood: usize,
}

/// Binned AuROC entry over the OoD-fraction interval `(lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinResult {
    pub lo: f64,
    pub hi: f64,
    pub cell: BinCell,
}

/// Per-population score histograms over a shared equal-width binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts_in: Vec<u64>,
    pub counts_ood: Vec<u64>,
}

/// Probability that an in-distribution score exceeds an OoD score, ties
/// counted half. `None` when either side is empty.
pub fn auroc(scores_in: &[f64], scores_ood: &[f64]) -> Option<f64> {
    if scores_in.is_empty() || scores_ood.is_empty() {
        return None;
    }
    let n_in = scores_in.len();
    let n_ood = scores_ood.len();
    // Pool and sort ascending; group = true marks in-distribution.
    let mut pooled: Vec<(f64, bool)> = scores_in
        .iter()
        .map(|&s| (s, true))
        .chain(scores_ood.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of in-distribution ranks in half-units (ties get the average rank
    // of their group, which is a half-integer; doubling keeps it integral).
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged: (i + j + 1) / 2; doubled: i+j+1.
        let twice_rank = (i + j + 1) as u128;
        for item in &pooled[i..j] {
            if item.1 {
                twice_rank_sum += twice_rank;
            }
        }
        i = j;
    }
    // U statistic in half-units: 2U = 2R_in - n_in (n_in + 1).
    let twice_u = twice_rank_sum - (n_in as u128 * (n_in as u128 + 1));
    let denom = 2 * n_in as u128 * n_ood as u128;
    debug_assert!(twice_u <= denom);
    Some(twice_u as f64 / denom as f64)
}

/// Image-level AuROC over all records: in-population = `ood_fraction == 0`.
pub fn auroc_all(records: &[ScoredRecord]) -> BinCell {
    let (scores_in, scores_ood): (Vec<f64>, Vec<f64>) = split_scores(records);
    BinCell {
        value: auroc(&scores_in, &scores_ood),
        n_in: scores_in.len(),
        n_ood: scores_ood.len(),
    }
}

fn split_scores(records: &[ScoredRecord]) -> (Vec<f64>, Vec<f64>) {
    let mut scores_in = Vec::new();
    let mut scores_ood = Vec::new();
    for r in records {
        if r.is_ood() {
            scores_ood.push(r.image_score());
        } else {
            scores_in.push(r.image_score());
        }
    }
    (scores_in, scores_ood)
}

/// Pixel-pooled AuROC for segmentation: every pixel of every record joins
/// one global population according to its mask bit.
pub fn pixel_auroc(records: &[ScoredRecord]) -> Result<BinCell> {
    let mut scores_in = Vec::new();
    let mut scores_ood = Vec::new();
    for r in records {
        let map = match &r.score {
            OodScore::Map(map) => map,
            OodScore::Scalar(_) => {
                return Err(Error::Shape(format!(
                    "pixel AuROC needs per-pixel score maps, sample {} has a scalar",
                    r.id
                )))
            }
        };
        let mask = r
            .ood_mask
            .as_ref()
            .ok_or_else(|| Error::Shape(format!("sample {} has no OoD mask", r.id)))?;
        if mask.dims() != map.dims() {
            return Err(Error::Shape(format!(
                "sample {}: mask dims {:?} do not match score map {:?}",
                r.id,
                mask.dims(),
                map.dims()
            )));
        }
        for (&s, &m) in map.iter().zip(mask.iter()) {
            if m == 1.0 {
                scores_ood.push(s as f64);
            } else {
                scores_in.push(s as f64);
            }
        }
    }
    Ok(BinCell {
        value: auroc(&scores_in, &scores_ood),
        n_in: scores_in.len(),
        n_ood: scores_ood.len(),
    })
}

/// Ten right-closed decile bins, the default binning.
pub fn default_bin_edges() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

/// AuROC per OoD-fraction bin.
///
/// The in-population is always the untouched samples (`ood_fraction == 0`,
/// image-level scores); each bin `(lo, hi]` draws its OoD population from the
/// samples whose fraction falls inside it. Empty bins come back with support
/// 0 and no value.
pub fn binned_auroc(records: &[ScoredRecord], edges: &[f64]) -> Result<Vec<BinResult>> {
    if edges.is_empty() {
        return Err(Error::InvalidArgument("no bin edges".into()));
    }
    for pair in edges.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::InvalidArgument(format!(
                "bin edges must be strictly increasing, got {edges:?}"
            )));
        }
    }
    if edges.iter().any(|&e| e <= 0.0 || e > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bin edges must lie within (0, 1], got {edges:?}"
        )));
    }
    let (scores_in, _) = split_scores(records);
    let mut results = Vec::with_capacity(edges.len());
    let mut lo = 0.0;
    for &hi in edges {
        let bin_scores: Vec<f64> = records
            .iter()
            .filter(|r| r.ood_fraction > lo && r.ood_fraction <= hi)
            .map(|r| r.image_score())
            .collect();
        results.push(BinResult {
            lo,
            hi,
            cell: BinCell {
                value: auroc(&scores_in, &bin_scores),
                n_in: scores_in.len(),
                n_ood: bin_scores.len(),
            },
        });
        lo = hi;
    }
    Ok(results)
}

/// Equal-width histograms of image-level scores, one count vector per
/// population. Degenerate score ranges put everything into the first bin.
pub fn score_histogram(records: &[ScoredRecord], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least 1 bin".into(),
        ));
    }
    let scores: Vec<(f64, bool)> = records
        .iter()
        .map(|r| (r.image_score(), r.is_ood()))
        .collect();
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(s, _)| {
            (lo.min(s), hi.max(s))
        });
    let mut hist = Histogram {
        lo: if lo.is_finite() { lo } else { 0.0 },
        hi: if hi.is_finite() { hi } else { 0.0 },
        counts_in: vec![0; n_bins],
        counts_ood: vec![0; n_bins],
    };
    let width = (hist.hi - hist.lo) / n_bins as f64;
    for (s, is_ood) in scores {
        let idx = if width > 0.0 {
            (((s - hist.lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        if is_ood {
            hist.counts_ood[idx] += 1;
        } else {
            hist.counts_in[idx] += 1;
        }
    }
    Ok(hist)
}

/// Registered metric names, as printed by `oodbench list metrics`.
pub fn metric_registry() -> &'static [&'static str] {
    &["auroc", "binned_auroc", "pixel_auroc", "histogram"]
}
