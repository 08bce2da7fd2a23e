//! Toy spatio-temporal video transformer.
//!
//! A clip of `T` frames is cut into `t x P x P` tubes, each tube is flattened and projected
//! to a `C`-wide token, and the tokens run through pre-norm attention/MLP blocks. Between the
//! attention residual and the MLP of every layer a [`Reducer`] may remove tokens.
//!
//! Tube order is frame-group major, then patch row, then patch column. A flattened tube
//! vector is ordered `(frame within tube, channel, y, x)`.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::numerics::{matmul, softmax_into, Matrix, SeededRng};
use crate::MASS_FLOOR;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Geometry of a clip and the transformer that consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipSpec {
    /// `T`
    pub frames: usize,
    /// `H`
    pub height: usize,
    /// `W`
    pub width: usize,
    /// `t`, frames per tube.
    pub tube_frames: usize,
    /// `P`, spatial tube side.
    pub patch: usize,
    /// Pixel channels of the raw clip.
    pub in_channels: usize,
    /// `C`, token width.
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self {
            frames: 8,
            height: 64,
            width: 64,
            tube_frames: 2,
            patch: 16,
            in_channels: 3,
            embed_dim: 64,
            heads: 4,
            layers: 8,
        }
    }
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.tube_frames == 0 || self.patch == 0 || self.heads == 0 {
            return bad("tube_frames, patch and heads must be positive".into());
        }
        if !self.frames.is_multiple_of(self.tube_frames) {
            return bad(format!(
                "frames {} not divisible by tube_frames {}",
                self.frames, self.tube_frames
            ));
        }
        if !self.height.is_multiple_of(self.patch) || !self.width.is_multiple_of(self.patch) {
            return bad(format!(
                "{}x{} not divisible by patch {}",
                self.height, self.width, self.patch
            ));
        }
        if self.num_tokens() == 0 {
            return bad("clip yields zero tokens".into());
        }
        if self.in_channels == 0 || self.embed_dim == 0 || self.layers == 0 {
            return bad("in_channels, embed_dim and layers must be positive".into());
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return bad(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            ));
        }
        Ok(())
    }

    /// Number of tube slots along time, `T / t`.
    pub fn frame_groups(&self) -> usize {
        self.frames / self.tube_frames
    }

    pub fn grid_h(&self) -> usize {
        self.height / self.patch
    }

    pub fn grid_w(&self) -> usize {
        self.width / self.patch
    }

    pub fn tubes_per_group(&self) -> usize {
        self.grid_h() * self.grid_w()
    }

    /// `N = (T/t)(H/P)(W/P)`.
    pub fn num_tokens(&self) -> usize {
        self.frame_groups() * self.tubes_per_group()
    }

    /// Length of a flattened tube, the embedding's input width.
    pub fn tube_len(&self) -> usize {
        self.tube_frames * self.patch * self.patch * self.in_channels
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }

    pub fn tube_index(&self, group: usize, row: usize, col: usize) -> usize {
        (group * self.grid_h() + row) * self.grid_w() + col
    }

    /// Inverse of [`ClipSpec::tube_index`]: `(group, row, col)`.
    pub fn tube_coords(&self, index: usize) -> (usize, usize, usize) {
        let col = index % self.grid_w();
        let row = (index / self.grid_w()) % self.grid_h();
        (index / self.tubes_per_group(), row, col)
    }

    /// Frame-group index of every original tube.
    pub fn frame_of(&self) -> Vec<usize> {
        (0..self.num_tokens())
            .map(|n| n / self.tubes_per_group())
            .collect()
    }
}

/// Raw clip voxels laid out `[frame][channel][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f32>,
}

impl Clip {
    pub fn new(
        frames: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let want = frames * channels * height * width;
        if data.len() != want {
            return Err(Error::dims(
                "Clip::new",
                format!("expected {want} voxels, got {}", data.len()),
            ));
        }
        Ok(Self {
            frames,
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(spec: &ClipSpec) -> Self {
        Self {
            frames: spec.frames,
            channels: spec.in_channels,
            height: spec.height,
            width: spec.width,
            data: vec![0.0; spec.frames * spec.in_channels * spec.height * spec.width],
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, f: usize, c: usize, y: usize, x: usize) -> usize {
        ((f * self.channels + c) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, f: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.offset(f, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, f: usize, c: usize, y: usize, x: usize, v: f32) {
        let o = self.offset(f, c, y, x);
        self.data[o] = v;
    }

    fn check_against(&self, spec: &ClipSpec) -> Result<()> {
        if (self.frames, self.channels, self.height, self.width)
            != (spec.frames, spec.in_channels, spec.height, spec.width)
        {
            return Err(Error::dims(
                "embed_clip",
                format!(
                    "clip is {}x{}x{}x{}, spec wants {}x{}x{}x{}",
                    self.frames,
                    self.channels,
                    self.height,
                    self.width,
                    spec.frames,
                    spec.in_channels,
                    spec.height,
                    spec.width
                ),
            ));
        }
        Ok(())
    }

    /// Flattened voxels of one tube, ordered `(frame, channel, y, x)`.
    pub fn tube_vector(&self, spec: &ClipSpec, index: usize) -> Vec<f32> {
        let (g, row, col) = spec.tube_coords(index);
        let mut out = Vec::with_capacity(spec.tube_len());
        for dt in 0..spec.tube_frames {
            let f = g * spec.tube_frames + dt;
            for c in 0..self.channels {
                for y in row * spec.patch..(row + 1) * spec.patch {
                    for x in col * spec.patch..(col + 1) * spec.patch {
                        out.push(self.get(f, c, y, x));
                    }
                }
            }
        }
        out
    }
}

/// Live tokens of one clip plus the bookkeeping the reducers need.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenState {
    /// `N_l x C`.
    pub features: Matrix,
    /// Positive per-token mass.
    pub mass: Vec<f64>,
    /// Original tube indices absorbed by each live token, sorted ascending.
    pub provenance: Vec<Vec<usize>>,
    /// Frame-group index of every *original* tube.
    pub frame_of: Vec<usize>,
}

impl TokenState {
    /// Fresh state: unit mass and singleton provenance for each row of `features`.
    pub fn from_features(features: Matrix, frame_of: Vec<usize>) -> Result<Self> {
        if frame_of.len() != features.rows() {
            return Err(Error::dims(
                "TokenState::from_features",
                format!(
                    "{} tokens but {} frame labels",
                    features.rows(),
                    frame_of.len()
                ),
            ));
        }
        let n = features.rows();
        Ok(Self {
            features,
            mass: vec![1.0; n],
            provenance: (0..n).map(|i| vec![i]).collect(),
            frame_of,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn original_len(&self) -> usize {
        self.frame_of.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Checks shape agreement, positive masses and that provenance partitions the tubes.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        if self.mass.len() != n || self.provenance.len() != n {
            return Err(Error::dims(
                "TokenState",
                format!(
                    "{n} tokens, {} masses, {} provenance sets",
                    self.mass.len(),
                    self.provenance.len()
                ),
            ));
        }
        if let Some(i) = self.mass.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "token {i} has non-positive mass {}",
                self.mass[i]
            )));
        }
        let mut seen = vec![false; self.original_len()];
        for set in &self.provenance {
            for &t in set {
                if t >= seen.len() || seen[t] {
                    return Err(Error::InvalidArgument(format!(
                        "tube {t} missing from range or claimed twice"
                    )));
                }
                seen[t] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(
                "provenance does not cover every tube".into(),
            ));
        }
        Ok(())
    }
}

/// Attention of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMaps {
    /// Per head, `N_l x N_l` pre-softmax scores including the log-mass bias.
    pub logits: Vec<Matrix>,
    /// Per head, row-stochastic `N_l x N_l`.
    pub probs: Vec<Matrix>,
    /// Mean of `probs` over heads.
    pub head_mean_probs: Matrix,
}

/// Weights of one transformer block.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_scale: Vec<f32>,
    pub ln1_shift: Vec<f32>,
    pub query: Matrix,
    pub key: Matrix,
    pub value: Matrix,
    pub output: Matrix,
    pub ln2_scale: Vec<f32>,
    pub ln2_shift: Vec<f32>,
    /// `C x 4C`
    pub mlp_in: Matrix,
    pub mlp_in_bias: Vec<f32>,
    /// `4C x C`
    pub mlp_out: Matrix,
    pub mlp_out_bias: Vec<f32>,
    pub heads: usize,
}

impl LayerWeights {
    pub fn zeros(dim: usize, heads: usize, mlp_ratio: usize) -> Self {
        let hidden = dim * mlp_ratio;
        Self {
            ln1_scale: vec![1.0; dim],
            ln1_shift: vec![0.0; dim],
            query: Matrix::zeros(dim, dim),
            key: Matrix::zeros(dim, dim),
            value: Matrix::zeros(dim, dim),
            output: Matrix::zeros(dim, dim),
            ln2_scale: vec![1.0; dim],
            ln2_shift: vec![0.0; dim],
            mlp_in: Matrix::zeros(dim, hidden),
            mlp_in_bias: vec![0.0; hidden],
            mlp_out: Matrix::zeros(hidden, dim),
            mlp_out_bias: vec![0.0; dim],
            heads,
        }
    }

    pub fn dim(&self) -> usize {
        self.query.rows()
    }
}

/// How [`ModelWeights::init`] draws parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Std of embedding, value, output and MLP matrices.
    pub std: f32,
    /// Std of the query projection (and of the key projection when untied).
    pub qk_std: f32,
    /// Use the query projection as key projection, making `QK^T` positive semi-definite.
    pub tie_query_key: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            std: 0.02,
            qk_std: 0.085,
            tie_query_key: true,
        }
    }
}

pub const MLP_RATIO: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    /// `tube_len x C`
    pub embed: Matrix,
    pub embed_bias: Vec<f32>,
    pub layers: Vec<LayerWeights>,
}

impl ModelWeights {
    /// Seeded Gaussian initialisation; layer norms start at identity, biases at zero.
    pub fn init(spec: &ClipSpec, seed: u64, init: &InitConfig) -> Result<Self> {
        spec.validate()?;
        let mut rng = SeededRng::new(seed);
        let c = spec.embed_dim;
        let embed = rng.gaussian_matrix(spec.tube_len(), c, init.std);
        let layers = (0..spec.layers)
            .map(|_| {
                let mut lw = LayerWeights::zeros(c, spec.heads, MLP_RATIO);
                lw.query = rng.gaussian_matrix(c, c, init.qk_std);
                lw.key = if init.tie_query_key {
                    lw.query.clone()
                } else {
                    rng.gaussian_matrix(c, c, init.qk_std)
                };
                lw.value = rng.gaussian_matrix(c, c, init.std);
                lw.output = rng.gaussian_matrix(c, c, init.std);
                lw.mlp_in = rng.gaussian_matrix(c, c * MLP_RATIO, init.std);
                lw.mlp_out = rng.gaussian_matrix(c * MLP_RATIO, c, init.std);
                lw
            })
            .collect();
        Ok(Self {
            embed,
            embed_bias: vec![0.0; c],
            layers,
        })
    }

    /// All-zero projections, identity layer norms.
    pub fn zeros(spec: &ClipSpec) -> Self {
        Self {
            embed: Matrix::zeros(spec.tube_len(), spec.embed_dim),
            embed_bias: vec![0.0; spec.embed_dim],
            layers: (0..spec.layers)
                .map(|_| LayerWeights::zeros(spec.embed_dim, spec.heads, MLP_RATIO))
                .collect(),
        }
    }

    fn check_against(&self, spec: &ClipSpec) -> Result<()> {
        if self.embed.shape() != (spec.tube_len(), spec.embed_dim)
            || self.embed_bias.len() != spec.embed_dim
            || self.layers.len() != spec.layers
            || self
                .layers
                .iter()
                .any(|l| l.dim() != spec.embed_dim || l.heads != spec.heads)
        {
            return Err(Error::dims(
                "ModelWeights",
                "weights do not match the clip spec",
            ));
        }
        Ok(())
    }
}

/// Projects every tube to a token. Tokens start with unit mass and singleton provenance.
pub fn embed_clip(clip: &Clip, spec: &ClipSpec, weights: &ModelWeights) -> Result<TokenState> {
    spec.validate()?;
    clip.check_against(spec)?;
    weights.check_against(spec)?;
    let n = spec.num_tokens();
    let mut tubes = Vec::with_capacity(n * spec.tube_len());
    for i in 0..n {
        tubes.extend(clip.tube_vector(spec, i));
    }
    let tubes = Matrix::new(n, spec.tube_len(), tubes)?;
    let mut features = matmul(&tubes, &weights.embed)?;
    for r in 0..n {
        for (v, b) in features.row_mut(r).iter_mut().zip(&weights.embed_bias) {
            *v += b;
        }
    }
    TokenState::from_features(features, spec.frame_of())
}

pub fn layer_norm(x: &Matrix, scale: &[f32], shift: &[f32]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    let c = x.cols() as f64;
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().map(|&v| v as f64).sum::<f64>() / c;
        let var = row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / c;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for (j, o) in out.row_mut(r).iter_mut().enumerate() {
            *o = ((row[j] as f64 - mean) * inv * scale[j] as f64 + shift[j] as f64) as f32;
        }
    }
    out
}

/// Result of one attention block.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// State after the residual add; mass and provenance are unchanged.
    pub state: TokenState,
    pub maps: AttentionMaps,
    /// Head-concatenated keys `N_l x C`, used for token matching.
    pub keys: Matrix,
}

/// Pre-norm multi-head self-attention with residual.
///
/// With `use_proportional`, `log(max(m_j, MASS_FLOOR))` is added to every logit in key
/// column `j` before the softmax.
pub fn attention_forward(
    state: TokenState,
    weights: &LayerWeights,
    use_proportional: bool,
) -> Result<AttentionOutput> {
    let n = state.len();
    let dim = weights.dim();
    if state.features.cols() != dim {
        return Err(Error::dims(
            "attention_forward",
            format!(
                "tokens have width {}, layer wants {dim}",
                state.features.cols()
            ),
        ));
    }
    let heads = weights.heads;
    let head_dim = dim / heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let normed = layer_norm(&state.features, &weights.ln1_scale, &weights.ln1_shift);
    let q = matmul(&normed, &weights.query)?;
    let k = matmul(&normed, &weights.key)?;
    let v = matmul(&normed, &weights.value)?;

    let bias: Vec<f64> = if use_proportional {
        state.mass.iter().map(|&m| m.max(MASS_FLOOR).ln()).collect()
    } else {
        vec![0.0; n]
    };

    let mut logits = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    let mut concat = Matrix::zeros(n, dim);
    let mut mean = vec![0.0f64; n * n];
    for h in 0..heads {
        let qh = q.column_block(h * head_dim, head_dim);
        let kh = k.column_block(h * head_dim, head_dim);
        let vh = v.column_block(h * head_dim, head_dim);
        let mut lg = matmul(&qh, &kh.transpose())?;
        for i in 0..n {
            for (j, x) in lg.row_mut(i).iter_mut().enumerate() {
                *x = (*x as f64 * scale + bias[j]) as f32;
            }
        }
        let mut p = Matrix::zeros(n, n);
        for i in 0..n {
            softmax_into(lg.row(i), p.row_mut(i));
        }
        let out = matmul(&p, &vh)?;
        for i in 0..n {
            concat.row_mut(i)[h * head_dim..(h + 1) * head_dim].copy_from_slice(out.row(i));
        }
        for (acc, &x) in mean.iter_mut().zip(p.data()) {
            *acc += x as f64;
        }
        logits.push(lg);
        probs.push(p);
    }
    let head_mean_probs = Matrix::new(
        n,
        n,
        mean.into_iter()
            .map(|x| (x / heads as f64) as f32)
            .collect(),
    )?;

    let projected = matmul(&concat, &weights.output)?;
    let mut state = state;
    for (x, y) in state.features.data_mut().iter_mut().zip(projected.data()) {
        *x += y;
    }
    Ok(AttentionOutput {
        state,
        maps: AttentionMaps {
            logits,
            probs,
            head_mean_probs,
        },
        keys: k,
    })
}

/// GELU, tanh approximation.
pub fn gelu(x: f32) -> f32 {
    let x = x as f64;
    let inner = (2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x);
    (0.5 * x * (1.0 + inner.tanh())) as f32
}

/// Pre-norm residual MLP: `x + W2 gelu(W1 ln(x) + b1) + b2`.
pub fn mlp_forward(state: TokenState, weights: &LayerWeights) -> Result<TokenState> {
    let normed = layer_norm(&state.features, &weights.ln2_scale, &weights.ln2_shift);
    let mut hidden = matmul(&normed, &weights.mlp_in)?;
    for r in 0..hidden.rows() {
        for (h, b) in hidden.row_mut(r).iter_mut().zip(&weights.mlp_in_bias) {
            *h = gelu(*h + b);
        }
    }
    let out = matmul(&hidden, &weights.mlp_out)?;
    let mut state = state;
    let dim = out.cols();
    for (i, x) in state.features.data_mut().iter_mut().enumerate() {
        *x += out.data()[i] + weights.mlp_out_bias[i % dim];
    }
    Ok(state)
}

/// Tokens removed at each layer; layers past the end remove nothing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeSchedule {
    reductions: Vec<usize>,
}

impl MergeSchedule {
    pub fn new(reductions: Vec<usize>) -> Self {
        Self { reductions }
    }

    pub fn zeros(layers: usize) -> Self {
        Self {
            reductions: vec![0; layers],
        }
    }

    /// `total` tokens removed at layer `layer` only.
    pub fn single(layers: usize, layer: usize, total: usize) -> Self {
        let mut reductions = vec![0; layers];
        reductions[layer] = total;
        Self { reductions }
    }

    pub fn reductions(&self) -> &[usize] {
        &self.reductions
    }

    pub fn at(&self, layer: usize) -> usize {
        self.reductions.get(layer).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.reductions.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }

    /// Fails if the schedule is longer than `layers` or would leave fewer than one token.
    pub fn validate(&self, tokens: usize, layers: usize) -> Result<()> {
        if self.reductions.len() > layers {
            return Err(Error::InfeasibleSchedule(format!(
                "{} entries for {layers} layers",
                self.reductions.len()
            )));
        }
        if self.total() >= tokens {
            return Err(Error::InfeasibleSchedule(format!(
                "removes {} of {tokens} tokens",
                self.total()
            )));
        }
        Ok(())
    }

    /// Tokens entering each of the `layers` layers.
    pub fn trajectory(&self, tokens: usize, layers: usize) -> Vec<usize> {
        let mut n = tokens;
        (0..layers)
            .map(|l| {
                let entering = n;
                n = n.saturating_sub(self.at(l));
                entering
            })
            .collect()
    }
}

/// Everything a reducer may inspect at the reduction point of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerContext<'a> {
    /// Zero-based layer index.
    pub layer: usize,
    pub maps: &'a AttentionMaps,
    pub keys: &'a Matrix,
}

/// Token-reduction strategy applied between attention and MLP.
pub trait Reducer {
    fn name(&self) -> &str;

    /// Removes exactly `r` tokens from `state`.
    fn reduce(&self, state: TokenState, ctx: &LayerContext<'_>, r: usize) -> Result<TokenState>;
}

/// Leaves the tokens untouched; any non-zero request is an error.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReduction;

impl Reducer for NoReduction {
    fn name(&self) -> &str {
        "baseline"
    }

    fn reduce(&self, state: TokenState, _ctx: &LayerContext<'_>, r: usize) -> Result<TokenState> {
        if r != 0 {
            return Err(Error::InvalidArgument(format!(
                "baseline cannot remove {r} tokens"
            )));
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForwardOptions {
    pub proportional_attention: bool,
    /// Keep a copy of the tokens leaving every layer.
    pub keep_layer_tokens: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            proportional_attention: true,
            keep_layer_tokens: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub state: TokenState,
    pub maps: Vec<AttentionMaps>,
    /// Tokens entering each layer.
    pub token_counts: Vec<usize>,
    /// Provenance of the tokens entering each layer.
    pub layer_provenance: Vec<Vec<Vec<usize>>>,
    /// Tokens leaving each layer, when requested.
    pub layer_tokens: Vec<Matrix>,
    pub layer_time: Vec<Duration>,
}

impl ForwardTrace {
    pub fn final_count(&self) -> usize {
        self.state.len()
    }
}

/// Embeds `clip` and runs every layer, reducing `schedule.at(l)` tokens after attention.
pub fn forward_clip(
    clip: &Clip,
    spec: &ClipSpec,
    weights: &ModelWeights,
    reducer: &dyn Reducer,
    schedule: &MergeSchedule,
) -> Result<ForwardTrace> {
    let state = embed_clip(clip, spec, weights)?;
    forward_tokens(state, weights, reducer, schedule, ForwardOptions::default())
}

/// Runs the transformer stack on already embedded tokens.
pub fn forward_tokens(
    state: TokenState,
    weights: &ModelWeights,
    reducer: &dyn Reducer,
    schedule: &MergeSchedule,
    opts: ForwardOptions,
) -> Result<ForwardTrace> {
    let layers = weights.layers.len();
    schedule.validate(state.len(), layers)?;
    let mut state = state;
    let mut trace = ForwardTrace {
        state: state.clone(),
        maps: Vec::with_capacity(layers),
        token_counts: Vec::with_capacity(layers),
        layer_provenance: Vec::with_capacity(layers),
        layer_tokens: Vec::new(),
        layer_time: Vec::with_capacity(layers),
    };
    for (l, lw) in weights.layers.iter().enumerate() {
        let started = Instant::now();
        trace.token_counts.push(state.len());
        trace.layer_provenance.push(state.provenance.clone());
        let AttentionOutput {
            state: attended,
            maps,
            keys,
        } = attention_forward(state, lw, opts.proportional_attention)?;
        let r = schedule.at(l);
        let reduced = if r > 0 {
            let before = attended.len();
            let ctx = LayerContext {
                layer: l,
                maps: &maps,
                keys: &keys,
            };
            let out = reducer.reduce(attended, &ctx, r)?;
            if out.len() != before - r {
                return Err(Error::InvalidArgument(format!(
                    "reducer {} left {} tokens at layer {l}, expected {}",
                    reducer.name(),
                    out.len(),
                    before - r
                )));
            }
            out
        } else {
            attended
        };
        state = mlp_forward(reduced, lw)?;
        trace.layer_time.push(started.elapsed());
        if opts.keep_layer_tokens {
            trace.layer_tokens.push(state.features.clone());
        }
        trace.maps.push(maps);
    }
    trace.state = state;
    Ok(trace)
}
