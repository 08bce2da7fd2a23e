//! Analytical FLOPs of a transformer stack under a per-layer token trajectory.
//!
//! Per layer with `n` tokens and width `C`:
//!
//! - attention: `4 n C^2` for the Q/K/V/output projections plus `2 n^2 C` for the score
//!   and value products;
//! - MLP: `2 * mlp_ratio * n C^2` (`8 n C^2` at ratio 4).
//!
//! Layer norms, softmax and the embedding are not counted. A layer that reduces tokens pays
//! attention at its incoming count and MLP at the reduced count.

use crate::error::{Error, Result};
use crate::model::MergeSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostConfig {
    pub initial_tokens: usize,
    pub width: usize,
    pub layers: usize,
    pub mlp_ratio: usize,
}

impl CostConfig {
    pub fn new(initial_tokens: usize, width: usize, layers: usize) -> Self {
        Self {
            initial_tokens,
            width,
            layers,
            mlp_ratio: 4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.initial_tokens == 0 || self.width == 0 || self.layers == 0 || self.mlp_ratio == 0 {
            return Err(Error::InvalidArgument(format!(
                "cost config fields must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

pub fn attention_flops(n: usize, cfg: &CostConfig) -> u64 {
    let (n, c) = (n as u64, cfg.width as u64);
    4 * n * c * c + 2 * n * n * c
}

pub fn mlp_flops(n: usize, cfg: &CostConfig) -> u64 {
    let (n, c) = (n as u64, cfg.width as u64);
    2 * cfg.mlp_ratio as u64 * n * c * c
}

/// FLOPs of one unreduced layer with `n` tokens.
pub fn layer_flops(n: usize, cfg: &CostConfig) -> u64 {
    attention_flops(n, cfg) + mlp_flops(n, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub per_layer_flops: Vec<u64>,
    pub total_flops: u64,
    /// Tokens entering each layer.
    pub token_trajectory: Vec<usize>,
}

pub fn schedule_flops(cfg: &CostConfig, schedule: &MergeSchedule) -> Result<CostReport> {
    cfg.validate()?;
    schedule.validate(cfg.initial_tokens, cfg.layers)?;
    let token_trajectory = schedule.trajectory(cfg.initial_tokens, cfg.layers);
    let per_layer_flops: Vec<u64> = token_trajectory
        .iter()
        .enumerate()
        .map(|(l, &n)| attention_flops(n, cfg) + mlp_flops(n - schedule.at(l), cfg))
        .collect();
    Ok(CostReport {
        total_flops: per_layer_flops.iter().sum(),
        per_layer_flops,
        token_trajectory,
    })
}
