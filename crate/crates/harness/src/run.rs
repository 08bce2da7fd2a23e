//! Executing a configured run and writing its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vidtldr_core::costmodel::{schedule_flops, CostConfig, CostReport};
use vidtldr_core::merging::{PruneReducer, PruneScore, ToMeReducer, VidTldrReducer};
use vidtldr_core::model::{
    embed_clip, forward_tokens, ForwardOptions, ForwardTrace, MergeSchedule, ModelWeights,
    NoReduction, Reducer, TokenState, MLP_RATIO,
};
use vidtldr_core::numerics::Matrix;
use vidtldr_core::saliency::{attention_rollout, attentiveness, frame_score_ratio, SaliencyScores};

use crate::config::{Mode, RunConfig};
use crate::error::{HarnessError, Result};
use crate::metrics::{
    frame_ratio_csv, layer_frame_ratio_csv, metrics_csv, FrameRatios, MetricsRow,
    MASS_HEATMAP_HEADER, SCHEMA_VERSION,
};
use crate::synth::{synth_clip, SynthClip};
use crate::tensor_io::{dump_tensor, Tensor};

pub const METRICS_FILE: &str = "metrics.csv";
pub const FRAME_RATIO_FILE: &str = "frame_ratio.csv";
pub const LAYER_FRAME_RATIO_FILE: &str = "layer_frame_ratio.csv";
pub const MASS_HEATMAP_FILE: &str = "mass_heatmap.csv";
pub const SALIENCY_FILE: &str = "saliency.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const FINAL_TOKENS_FILE: &str = "final_tokens.vtdr";
pub const POOLED_FILE: &str = "pooled_output.vtdr";

/// Clip and weights of a config; both depend only on the seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub clip: SynthClip,
    pub weights: ModelWeights,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    Ok(Prepared {
        clip: synth_clip(&cfg.spec, cfg.seed, cfg.pattern)?,
        weights: ModelWeights::init(&cfg.spec, cfg.seed, &cfg.init)?,
    })
}

fn cost_config(cfg: &RunConfig) -> CostConfig {
    let mut c = CostConfig::new(cfg.spec.num_tokens(), cfg.spec.embed_dim, cfg.spec.layers);
    c.mlp_ratio = MLP_RATIO;
    c
}

/// FLOPs of the configured schedule.
pub fn cost_report(cfg: &RunConfig) -> Result<CostReport> {
    Ok(schedule_flops(&cost_config(cfg), &cfg.schedule)?)
}

fn forward(
    cfg: &RunConfig,
    prep: &Prepared,
    reducer: &dyn Reducer,
    schedule: &MergeSchedule,
) -> Result<ForwardTrace> {
    let state = embed_clip(&prep.clip.clip, &cfg.spec, &prep.weights)?;
    let opts = ForwardOptions {
        keep_layer_tokens: cfg.dump_tokens,
        ..ForwardOptions::default()
    };
    Ok(forward_tokens(
        state,
        &prep.weights,
        reducer,
        schedule,
        opts,
    )?)
}

/// Unreduced forward pass; its maps all have the full token count.
pub fn baseline_trace(cfg: &RunConfig, prep: &Prepared) -> Result<ForwardTrace> {
    forward(
        cfg,
        prep,
        &NoReduction,
        &MergeSchedule::zeros(cfg.spec.layers),
    )
}

fn head_means(trace: &ForwardTrace) -> Vec<Matrix> {
    trace
        .maps
        .iter()
        .map(|m| m.head_mean_probs.clone())
        .collect()
}

/// Rollout scores over the original tubes for every starting layer.
pub fn rollout_per_layer(baseline: &ForwardTrace) -> Result<Vec<Vec<f32>>> {
    let probs = head_means(baseline);
    (0..probs.len())
        .map(|l| Ok(attention_rollout(&probs, l)?))
        .collect()
}

pub fn make_reducer(mode: Mode, baseline: Option<&ForwardTrace>) -> Result<Box<dyn Reducer>> {
    Ok(match mode {
        Mode::Baseline => Box::new(NoReduction),
        Mode::Tome => Box::new(ToMeReducer),
        Mode::Vidtldr => Box::new(VidTldrReducer::default()),
        Mode::PruneAttentiveness => Box::new(PruneReducer::new(PruneScore::Attentiveness)),
        Mode::PruneSharpness => Box::new(PruneReducer::new(PruneScore::Sharpness)),
        Mode::PruneRollout => {
            let base = baseline.ok_or_else(|| {
                vidtldr_core::Error::InvalidArgument("prune-rollout needs a baseline pass".into())
            })?;
            Box::new(PruneReducer::new(PruneScore::Rollout(rollout_per_layer(
                base,
            )?)))
        }
    })
}

/// Layer-1 frame-group shares of attentiveness, rollout and masked saliency.
pub fn frame_ratios(cfg: &RunConfig, baseline: &ForwardTrace) -> Result<FrameRatios> {
    let groups = cfg.spec.frame_groups();
    let frame_of = cfg.spec.frame_of();
    let first = &baseline.maps[0].head_mean_probs;
    let scores = SaliencyScores::from_attention(first)?;
    let rollout = attention_rollout(&head_means(baseline), 0)?;
    Ok(FrameRatios {
        attentiveness: frame_score_ratio(&attentiveness(first)?, &frame_of, groups)?,
        rollout: frame_score_ratio(&rollout, &frame_of, groups)?,
        masked_saliency: frame_score_ratio(&scores.masked, &frame_of, groups)?,
    })
}

/// Copies each token's score to every tube it absorbed.
fn spread_to_tubes(scores: &[f32], provenance: &[Vec<usize>], tubes: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; tubes];
    for (s, group) in scores.iter().zip(provenance) {
        for &t in group {
            out[t] = *s;
        }
    }
    out
}

/// Mean of the original tube features each token stands for, weighted by group size.
pub fn pooled_output(state: &TokenState) -> Vec<f32> {
    let c = state.features.cols();
    let mut acc = vec![0.0f64; c];
    for (row, group) in state.features.row_iter().zip(&state.provenance) {
        let w = group.len() as f64;
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += w * x as f64;
        }
    }
    let n = state.original_len().max(1) as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

/// Mass of the token covering each original tube, divided by that token's group size.
pub fn mass_per_tube(state: &TokenState) -> Vec<f64> {
    let mut out = vec![0.0f64; state.original_len()];
    for (m, group) in state.mass.iter().zip(&state.provenance) {
        for &t in group {
            out[t] = m / group.len() as f64;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub config: RunConfig,
    pub rows: Vec<MetricsRow>,
    pub cost: CostReport,
    pub trace: ForwardTrace,
    /// Layer-1 saliency of the unreduced pass.
    pub layer1: SaliencyScores,
    pub frame_ratios: FrameRatios,
    pub foreground: Vec<bool>,
    pub pooled: Vec<f32>,
}

impl RunSummary {
    pub fn total_flops(&self) -> u64 {
        self.cost.total_flops
    }
}

/// Runs the config in memory without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate().map_err(|msg| HarnessError::InvalidConfig {
        path: PathBuf::from("<config>"),
        msg,
    })?;
    let prep = prepare(cfg)?;
    let baseline = baseline_trace(cfg, &prep)?;
    let trace = if cfg.mode == Mode::Baseline {
        baseline.clone()
    } else {
        let reducer = make_reducer(cfg.mode, Some(&baseline))?;
        forward(cfg, &prep, reducer.as_ref(), &cfg.schedule)?
    };
    let cost = cost_report(cfg)?;
    if cost.token_trajectory != trace.token_counts {
        return Err(vidtldr_core::Error::InvalidArgument(format!(
            "forward trajectory {:?} disagrees with cost model {:?}",
            trace.token_counts, cost.token_trajectory
        ))
        .into());
    }

    let tubes = cfg.spec.num_tokens();
    let groups = cfg.spec.frame_groups();
    let frame_of = cfg.spec.frame_of();
    let mut rows = Vec::with_capacity(cfg.spec.layers);
    for l in 0..cfg.spec.layers {
        let scores = SaliencyScores::from_attention(&trace.maps[l].head_mean_probs)?;
        let mean_saliency =
            scores.masked.iter().map(|&s| s as f64).sum::<f64>() / scores.masked.len() as f64;
        let per_tube = spread_to_tubes(&scores.masked, &trace.layer_provenance[l], tubes);
        rows.push(MetricsRow {
            run_id: cfg.run_id.clone(),
            mode: cfg.mode.to_string(),
            layer: l + 1,
            token_count: trace.token_counts[l],
            flops: cost.per_layer_flops[l],
            mean_saliency,
            frame_ratio: frame_score_ratio(&per_tube, &frame_of, groups)?,
            wall_ms: trace.layer_time[l].as_secs_f64() * 1e3,
        });
    }

    Ok(RunSummary {
        config: cfg.clone(),
        rows,
        layer1: SaliencyScores::from_attention(&baseline.maps[0].head_mean_probs)?,
        frame_ratios: frame_ratios(cfg, &baseline)?,
        foreground: prep.clip.foreground,
        pooled: pooled_output(&trace.state),
        cost,
        trace,
    })
}

/// Runs the config and writes every artifact into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let summary = execute(cfg)?;
    write_artifacts(&summary)?;
    Ok(summary)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub fn manifest_text(s: &RunSummary) -> String {
    let cfg = &s.config;
    let spec = &cfg.spec;
    let join =
        |v: &[usize], sep: &str| v.iter().map(usize::to_string).collect::<Vec<_>>().join(sep);
    let mut out = String::new();
    let _ = writeln!(out, "schema_version = {SCHEMA_VERSION}");
    let _ = writeln!(out, "run.id = {}", cfg.run_id);
    let _ = writeln!(out, "run.mode = {}", cfg.mode);
    let _ = writeln!(out, "run.seed = {}", cfg.seed);
    let _ = writeln!(
        out,
        "run.schedule = {}",
        join(cfg.schedule.reductions(), ",")
    );
    let _ = writeln!(out, "clip.frames = {}", spec.frames);
    let _ = writeln!(out, "clip.height = {}", spec.height);
    let _ = writeln!(out, "clip.width = {}", spec.width);
    let _ = writeln!(out, "clip.tube_frames = {}", spec.tube_frames);
    let _ = writeln!(out, "clip.patch = {}", spec.patch);
    let _ = writeln!(out, "clip.channels = {}", spec.in_channels);
    let _ = writeln!(out, "clip.pattern = {}", cfg.pattern);
    let _ = writeln!(out, "model.width = {}", spec.embed_dim);
    let _ = writeln!(out, "model.heads = {}", spec.heads);
    let _ = writeln!(out, "model.layers = {}", spec.layers);
    let _ = writeln!(out, "model.init_std = {}", cfg.init.std);
    let _ = writeln!(out, "model.qk_std = {}", cfg.init.qk_std);
    let _ = writeln!(out, "model.tie_qk = {}", cfg.init.tie_query_key);
    let _ = writeln!(out, "token_counts = {}", join(&s.trace.token_counts, ";"));
    let _ = writeln!(out, "final_tokens = {}", s.trace.final_count());
    let _ = writeln!(out, "total_flops = {}", s.cost.total_flops);
    out
}

fn mass_heatmap_csv(s: &RunSummary) -> String {
    let spec = &s.config.spec;
    let mut out = String::new();
    out.push_str(MASS_HEATMAP_HEADER);
    out.push('\n');
    for (t, m) in mass_per_tube(&s.trace.state).iter().enumerate() {
        let (g, r, c) = spec.tube_coords(t);
        let _ = writeln!(out, "{t},{g},{r},{c},{m}");
    }
    out
}

pub fn write_artifacts(s: &RunSummary) -> Result<()> {
    let dir = &s.config.out_dir;
    create_dir(dir)?;
    write(&dir.join(METRICS_FILE), &metrics_csv(&s.rows))?;
    write(
        &dir.join(LAYER_FRAME_RATIO_FILE),
        &layer_frame_ratio_csv(&s.rows),
    )?;
    write(
        &dir.join(FRAME_RATIO_FILE),
        &frame_ratio_csv(&s.frame_ratios),
    )?;
    write(&dir.join(MASS_HEATMAP_FILE), &mass_heatmap_csv(s))?;
    write(&dir.join(MANIFEST_FILE), &manifest_text(s))?;
    dump_tensor(
        &dir.join(FINAL_TOKENS_FILE),
        &Tensor::from(&s.trace.state.features),
    )?;
    dump_tensor(&dir.join(POOLED_FILE), &Tensor::vector(s.pooled.clone()))?;
    if s.config.dump_attention {
        for (l, maps) in s.trace.maps.iter().enumerate() {
            let t = Tensor::stack(&maps.probs).map_err(|msg| HarnessError::Format {
                path: dir.clone(),
                msg,
            })?;
            dump_tensor(&dir.join(format!("attention_layer{}.vtdr", l + 1)), &t)?;
        }
    }
    if s.config.dump_tokens {
        for (l, m) in s.trace.layer_tokens.iter().enumerate() {
            dump_tensor(
                &dir.join(format!("tokens_layer{}.vtdr", l + 1)),
                &Tensor::from(m),
            )?;
        }
    }
    Ok(())
}

/// Per-tube layer-1 scores of the unreduced pass.
pub fn saliency_csv(cfg: &RunConfig) -> Result<String> {
    let prep = prepare(cfg)?;
    let baseline = baseline_trace(cfg, &prep)?;
    let first = &baseline.maps[0].head_mean_probs;
    let scores = SaliencyScores::from_attention(first)?;
    let att = attentiveness(first)?;
    let roll = attention_rollout(&head_means(&baseline), 0)?;
    let mut out = String::from(
        "tube_index,frame_group,row,col,foreground,attentiveness,rollout,sharpness,mask,masked_saliency\n",
    );
    for t in 0..cfg.spec.num_tokens() {
        let (g, r, c) = cfg.spec.tube_coords(t);
        let _ = writeln!(
            out,
            "{t},{g},{r},{c},{},{},{},{},{},{}",
            u8::from(prep.clip.foreground[t]),
            att[t],
            roll[t],
            scores.raw[t],
            u8::from(scores.mask[t]),
            scores.masked[t]
        );
    }
    Ok(out)
}

/// Writes `saliency.csv` into the output directory and returns its path.
pub fn dump_saliency(cfg: &RunConfig) -> Result<PathBuf> {
    let csv = saliency_csv(cfg)?;
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join(SALIENCY_FILE);
    write(&path, &csv)?;
    Ok(path)
}

/// Writes `frame_ratio.csv` into the output directory and returns the ratios.
pub fn temporal_bias(cfg: &RunConfig) -> Result<FrameRatios> {
    let prep = prepare(cfg)?;
    let baseline = baseline_trace(cfg, &prep)?;
    let ratios = frame_ratios(cfg, &baseline)?;
    create_dir(&cfg.out_dir)?;
    write(
        &cfg.out_dir.join(FRAME_RATIO_FILE),
        &frame_ratio_csv(&ratios),
    )?;
    Ok(ratios)
}

/// Per-layer FLOPs table of the configured schedule next to the unreduced model.
pub fn flops_table(cfg: &RunConfig) -> Result<String> {
    let rep = cost_report(cfg)?;
    let base = schedule_flops(&cost_config(cfg), &MergeSchedule::zeros(cfg.spec.layers))?;
    let mut out = String::from("layer,tokens_in,tokens_out,flops,baseline_flops\n");
    for l in 0..cfg.spec.layers {
        let n = rep.token_trajectory[l];
        let _ = writeln!(
            out,
            "{},{n},{},{},{}",
            l + 1,
            n - cfg.schedule.at(l),
            rep.per_layer_flops[l],
            base.per_layer_flops[l]
        );
    }
    let _ = writeln!(
        out,
        "total,{},{},{},{}",
        cfg.spec.num_tokens(),
        cfg.spec.num_tokens() - cfg.schedule.total(),
        rep.total_flops,
        base.total_flops
    );
    Ok(out)
}
