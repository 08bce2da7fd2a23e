//! CSV rendering of run metrics.
//!
//! Floats are written with Rust's shortest round-trip formatting, so identical values always
//! render to identical bytes.

use std::fmt::Write as _;

/// Bumped whenever a CSV layout or the manifest keys change.
pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: &str = "run_id,mode,layer,token_count,flops,mean_saliency,wall_ms";
pub const FRAME_RATIO_HEADER: &str =
    "frame_index,ratio_attentiveness,ratio_rollout,ratio_masked_saliency";
pub const LAYER_FRAME_RATIO_HEADER: &str = "layer,frame_index,ratio_masked_saliency";
pub const MASS_HEATMAP_HEADER: &str = "tube_index,frame_group,row,col,mass_per_tube";

/// One layer of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub mode: String,
    /// One-based layer index.
    pub layer: usize,
    /// Tokens entering the layer.
    pub token_count: usize,
    pub flops: u64,
    /// Mean masked saliency over the tokens entering the layer.
    pub mean_saliency: f64,
    /// Share of masked saliency per frame group, spread over original tubes.
    pub frame_ratio: Vec<f64>,
    pub wall_ms: f64,
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run_id, r.mode, r.layer, r.token_count, r.flops, r.mean_saliency, r.wall_ms
        );
    }
    out
}

pub fn layer_frame_ratio_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(LAYER_FRAME_RATIO_HEADER);
    out.push('\n');
    for r in rows {
        for (g, v) in r.frame_ratio.iter().enumerate() {
            let _ = writeln!(out, "{},{g},{v}", r.layer);
        }
    }
    out
}

/// Per-frame-group score shares under the three scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRatios {
    pub attentiveness: Vec<f64>,
    pub rollout: Vec<f64>,
    pub masked_saliency: Vec<f64>,
}

pub fn frame_ratio_csv(r: &FrameRatios) -> String {
    let mut out = String::new();
    out.push_str(FRAME_RATIO_HEADER);
    out.push('\n');
    for g in 0..r.attentiveness.len() {
        let _ = writeln!(
            out,
            "{g},{},{},{}",
            r.attentiveness[g], r.rollout[g], r.masked_saliency[g]
        );
    }
    out
}

/// Drops one named column from a header-first CSV.
pub fn without_column(csv: &str, column: &str) -> Option<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next()?.split(',').collect();
    let idx = header.iter().position(|h| *h == column)?;
    let mut out = String::new();
    for line in csv.lines() {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, v)| v)
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    Some(out)
}
