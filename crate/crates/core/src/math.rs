//! Overflow-safe softmax and logsumexp.
//!
//! Both subtract the maximum before exponentiating, so arbitrarily large
//! inputs stay finite. Intermediate sums run in f64.

use crate::error::{Error, Result};

/// `log sum exp(v_i)` over a non-empty slice, accumulated in f64.
pub fn logsumexp(values: &[f32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("logsumexp of empty input".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "logsumexp of non-finite input".into(),
        ));
    }
    let max = values
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let sum: f64 = values.iter().map(|&v| (v as f64 - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Temperature-scaled softmax over a K-vector of logits, K >= 2.
pub fn softmax(logits: &[f32], temperature: f32) -> Result<Vec<f32>> {
    if logits.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "softmax needs at least 2 logits, got {}",
            logits.len()
        )));
    }
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("softmax of non-finite logit".into()));
    }
    let t = temperature as f64;
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64 / t));
    let exps: Vec<f64> = logits.iter().map(|&v| (v as f64 / t - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.iter().map(|&e| (e / sum) as f32).collect())
}

/// Largest softmax probability without materializing the full distribution.
pub fn max_softmax(logits: &[f32], temperature: f32) -> Result<f32> {
    let probs = softmax(logits, temperature)?;
    Ok(probs.iter().fold(f32::NEG_INFINITY, |m, &p| m.max(p)))
}

/// Index of the maximum element; ties break toward the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
