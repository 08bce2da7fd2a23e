//! Token informativeness estimators computed from attention maps.

use crate::error::{Error, Result};
use crate::numerics::{check_row_stochastic, matmul, row_neg_entropy, Matrix};

/// Below this entropy spread every token gets the neutral score 0.5.
const DEGENERATE_SPREAD: f64 = 1e-9;

/// Column mean of an `N x N` attention map.
pub fn attentiveness(head_mean_probs: &Matrix) -> Result<Vec<f32>> {
    require_square("attentiveness", head_mean_probs)?;
    check_row_stochastic(head_mean_probs)?;
    Ok(column_mean(head_mean_probs))
}

fn column_mean(m: &Matrix) -> Vec<f32> {
    let mut acc = vec![0.0f64; m.cols()];
    for row in m.row_iter() {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v as f64;
        }
    }
    let n = m.rows() as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

fn require_square(op: &'static str, m: &Matrix) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!("expected a square map, got {}x{}", m.rows(), m.cols()),
        });
    }
    Ok(())
}

/// Attention rollout from layer `from_layer` (zero-based) to the last layer.
///
/// The flow matrix is `A^L A^{L-1} ... A^l`, later layers multiplied on the left, and the
/// column mean of that product is returned. With `from_layer` equal to the last layer this
/// is exactly [`attentiveness`] of that layer.
pub fn attention_rollout(per_layer_probs: &[Matrix], from_layer: usize) -> Result<Vec<f32>> {
    let last = per_layer_probs.len().checked_sub(1).ok_or_else(|| {
        Error::InvalidArgument("attention rollout needs at least one layer".into())
    })?;
    if from_layer > last {
        return Err(Error::InvalidArgument(format!(
            "from_layer {from_layer} past last layer {last}"
        )));
    }
    let n = per_layer_probs[0].rows();
    for m in per_layer_probs {
        require_square("attention_rollout", m)?;
        if m.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "attention_rollout",
                detail: format!("maps of size {n} and {}", m.rows()),
            });
        }
    }
    if from_layer == last {
        return attentiveness(&per_layer_probs[last]);
    }
    let mut flow = per_layer_probs[last].clone();
    for layer in (from_layer..last).rev() {
        flow = matmul(&flow, &per_layer_probs[layer])?;
    }
    Ok(column_mean(&flow))
}

/// Min-max normalised negative entropies, with the 0.5 fallback for a degenerate spread.
pub fn sharpness_from_neg_entropy(neg_entropy: &[f64]) -> Vec<f32> {
    let (min, max) = neg_entropy
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
            (lo.min(h), hi.max(h))
        });
    let spread = max - min;
    if neg_entropy.is_empty() || spread.is_nan() || spread < DEGENERATE_SPREAD {
        return vec![0.5; neg_entropy.len()];
    }
    neg_entropy
        .iter()
        .map(|&h| ((h - min) / spread) as f32)
        .collect()
}

/// Sharpness saliency `s`: tokens with peaked (low-entropy) attention rows score high.
pub fn sharpness_saliency(head_mean_probs: &Matrix) -> Result<Vec<f32>> {
    Ok(sharpness_from_neg_entropy(&row_neg_entropy(
        head_mean_probs,
    )?))
}

/// Background-drop mask `M_i = [s_i > mean(s)]` and the mean itself.
pub fn background_mask(raw: &[f32]) -> (Vec<bool>, f64) {
    if raw.is_empty() {
        return (Vec::new(), 0.0);
    }
    let mean = raw.iter().map(|&s| s as f64).sum::<f64>() / raw.len() as f64;
    (raw.iter().map(|&s| s as f64 > mean).collect(), mean)
}

/// Masked saliency: `M_i (s_i - mean)` rescaled so its maximum is one.
///
/// An all-zero mask yields all ones, which turns the saliency-aware mass update into the
/// plain ToMe mass.
pub fn masked_saliency(raw: &[f32], mask: &[bool], mean: f64) -> Vec<f32> {
    debug_assert_eq!(raw.len(), mask.len());
    let lifted: Vec<f64> = raw
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { s as f64 - mean } else { 0.0 })
        .collect();
    let peak = lifted.iter().copied().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return vec![1.0; raw.len()];
    }
    lifted.into_iter().map(|v| (v / peak) as f32).collect()
}

/// Raw, mask, masked and mean saliency of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyScores {
    pub raw: Vec<f32>,
    pub mask: Vec<bool>,
    pub masked: Vec<f32>,
    pub mean_raw: f64,
}

impl SaliencyScores {
    pub fn from_attention(head_mean_probs: &Matrix) -> Result<Self> {
        Ok(Self::from_raw(sharpness_saliency(head_mean_probs)?))
    }

    pub fn from_raw(raw: Vec<f32>) -> Self {
        let (mask, mean_raw) = background_mask(&raw);
        let masked = masked_saliency(&raw, &mask, mean_raw);
        Self {
            raw,
            mask,
            masked,
            mean_raw,
        }
    }
}

/// Share of the total score falling in each frame group.
pub fn frame_score_ratio(scores: &[f32], frame_of: &[usize], groups: usize) -> Result<Vec<f64>> {
    if scores.len() != frame_of.len() {
        return Err(Error::DimensionMismatch {
            op: "frame_score_ratio",
            detail: format!("{} scores, {} frame labels", scores.len(), frame_of.len()),
        });
    }
    if let Some(&g) = frame_of.iter().find(|&&g| g >= groups) {
        return Err(Error::InvalidArgument(format!(
            "frame label {g} out of range for {groups} groups"
        )));
    }
    if scores.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "frame scores must be finite and non-negative".into(),
        ));
    }
    let mut sums = vec![0.0f64; groups];
    for (&s, &g) in scores.iter().zip(frame_of) {
        sums[g] += s as f64;
    }
    let total: f64 = sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all frame scores are zero".into()));
    }
    Ok(sums.into_iter().map(|s| s / total).collect())
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
