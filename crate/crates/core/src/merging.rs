//! Bipartite soft matching and the token reducers built on it.
//!
//! Tokens alternate into a destination set (even positions) and a source set (odd
//! positions). Each source token is scored by its best cosine similarity to any destination
//! key; the `r` highest-scoring sources are folded into their best destination. Surviving
//! tokens keep their original relative order.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{LayerContext, Reducer, TokenState};
use crate::numerics::{cosine_sim, Matrix};
use crate::saliency::{attentiveness, sharpness_saliency, SaliencyScores};
use crate::MASS_FLOOR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
}

impl Bipartition {
    pub fn len(&self) -> usize {
        self.src.len() + self.dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `true` for source tokens, indexed by token.
    pub fn src_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.len()];
        for &s in &self.src {
            flags[s] = true;
        }
        flags
    }

    fn check(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.src.iter().chain(&self.dst) {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "bipartition index {i} invalid for {n} tokens"
                )));
            }
            seen[i] = true;
        }
        if self.len() != n {
            return Err(Error::InvalidArgument(format!(
                "bipartition covers {} of {n} tokens",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Even positions go to `dst`, odd positions to `src`.
pub fn bipartition(n: usize) -> Result<Bipartition> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "bipartition needs at least 2 tokens, got {n}"
        )));
    }
    Ok(Bipartition {
        src: (1..n).step_by(2).collect(),
        dst: (0..n).step_by(2).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub src: usize,
    pub dst: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// The `r` chosen edges, best first.
    pub merges: Vec<Merge>,
    /// Members of each output token, ascending; groups ordered by their surviving token.
    pub groups: Vec<Vec<usize>>,
    /// Output index of every input token.
    pub survivors: Vec<usize>,
}

impl MatchResult {
    /// Matching that merges nothing.
    pub fn identity(n: usize) -> Self {
        Self {
            merges: Vec::new(),
            groups: (0..n).map(|i| vec![i]).collect(),
            survivors: (0..n).collect(),
        }
    }

    pub fn output_len(&self) -> usize {
        self.groups.len()
    }
}

/// Best destination for every source token: `(src, dst, similarity)` in `part.src` order.
///
/// Ties on similarity keep the lower destination index.
pub fn best_destinations(keys: &Matrix, part: &Bipartition) -> Vec<Merge> {
    part.src
        .iter()
        .map(|&s| {
            let mut best = Merge {
                src: s,
                dst: usize::MAX,
                similarity: f64::NEG_INFINITY,
            };
            for &d in &part.dst {
                let sim = cosine_sim(keys.row(s), keys.row(d));
                if sim > best.similarity || (sim == best.similarity && d < best.dst) {
                    best.dst = d;
                    best.similarity = sim;
                }
            }
            best
        })
        .collect()
}

/// Merges the `r` source tokens with the highest best-destination similarity.
///
/// Ties are broken by the lower source index.
pub fn soft_match(keys: &Matrix, part: &Bipartition, r: usize) -> Result<MatchResult> {
    let n = keys.rows();
    part.check(n)?;
    if r > part.src.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot merge {r} tokens with only {} sources",
            part.src.len()
        )));
    }
    let mut candidates = best_destinations(keys, part);
    candidates.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then(a.src.cmp(&b.src))
    });
    candidates.truncate(r);

    let mut absorbed_into = vec![usize::MAX; n];
    for m in &candidates {
        absorbed_into[m.src] = m.dst;
    }
    let mut survivors = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n - r);
    for t in 0..n {
        if absorbed_into[t] == usize::MAX {
            survivors[t] = groups.len();
            groups.push(vec![t]);
        }
    }
    for t in 0..n {
        let d = absorbed_into[t];
        if d != usize::MAX {
            survivors[t] = survivors[d];
            groups[survivors[d]].push(t);
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(MatchResult {
        merges: candidates,
        groups,
        survivors,
    })
}

/// Mass-weighted mean of every group using `masses` (one per input token).
///
/// Singleton groups copy their feature unchanged. The output mass of a group is the sum
/// of its members' `masses`.
pub fn merge_groups(
    state: &TokenState,
    matched: &MatchResult,
    masses: &[f64],
) -> Result<TokenState> {
    let n = state.len();
    if masses.len() != n || matched.survivors.len() != n {
        return Err(Error::DimensionMismatch {
            op: "merge_groups",
            detail: format!(
                "{n} tokens, {} masses, {} survivor entries",
                masses.len(),
                matched.survivors.len()
            ),
        });
    }
    let dim = state.features.cols();
    let mut features = Matrix::zeros(matched.groups.len(), dim);
    let mut mass = Vec::with_capacity(matched.groups.len());
    let mut provenance = Vec::with_capacity(matched.groups.len());
    let mut acc = vec![0.0f64; dim];
    for (g, members) in matched.groups.iter().enumerate() {
        let group_mass: f64 = members.iter().map(|&j| masses[j]).sum();
        if let [only] = members[..] {
            features
                .row_mut(g)
                .copy_from_slice(state.features.row(only));
        } else {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &j in members {
                for (a, &x) in acc.iter_mut().zip(state.features.row(j)) {
                    *a += masses[j] * x as f64;
                }
            }
            for (o, a) in features.row_mut(g).iter_mut().zip(&acc) {
                *o = (a / group_mass) as f32;
            }
        }
        mass.push(group_mass);
        let mut tubes: Vec<usize> = members
            .iter()
            .flat_map(|&j| state.provenance[j].iter().copied())
            .collect();
        tubes.sort_unstable();
        provenance.push(tubes);
    }
    Ok(TokenState {
        features,
        mass,
        provenance,
        frame_of: state.frame_of.clone(),
    })
}

/// ToMe merge: groups averaged with the current masses, masses summed.
pub fn tome_merge(state: &TokenState, matched: &MatchResult) -> Result<TokenState> {
    merge_groups(state, matched, &state.mass)
}

/// Saliency-aware mass: source masses scaled by the masked saliency, destinations kept.
///
/// Every source token is scaled, merged or not, and the result is floored at
/// [`MASS_FLOOR`].
pub fn vidtldr_mass_update(
    state: &TokenState,
    part: &Bipartition,
    masked: &[f32],
) -> Result<Vec<f64>> {
    let n = state.len();
    part.check(n)?;
    if masked.len() != n {
        return Err(Error::DimensionMismatch {
            op: "vidtldr_mass_update",
            detail: format!("{} scores for {n} tokens", masked.len()),
        });
    }
    let mut updated = state.mass.clone();
    for &s in &part.src {
        updated[s] = (masked[s] as f64 * state.mass[s]).max(MASS_FLOOR);
    }
    Ok(updated)
}

/// Saliency-aware merge with the updated masses.
pub fn vidtldr_merge(
    state: &TokenState,
    matched: &MatchResult,
    updated_mass: &[f64],
) -> Result<TokenState> {
    merge_groups(state, matched, updated_mass)
}

/// Drops the `r` lowest-scoring tokens; equal scores drop the lower index first.
pub fn prune_lowest(state: &TokenState, scores: &[f32], r: usize) -> Result<TokenState> {
    let n = state.len();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            op: "prune_lowest",
            detail: format!("{} scores for {n} tokens", scores.len()),
        });
    }
    if r >= n {
        return Err(Error::InvalidArgument(format!(
            "cannot prune {r} of {n} tokens"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; n];
    for &i in &order[..r] {
        keep[i] = false;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    Ok(TokenState {
        features: state.features.select_rows(&kept),
        mass: kept.iter().map(|&i| state.mass[i]).collect(),
        provenance: kept.iter().map(|&i| state.provenance[i].clone()).collect(),
        frame_of: state.frame_of.clone(),
    })
}

/// Plain ToMe: match on keys, merge with the current masses.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToMeReducer;

impl Reducer for ToMeReducer {
    fn name(&self) -> &str {
        "tome"
    }

    fn reduce(&self, state: TokenState, ctx: &LayerContext<'_>, r: usize) -> Result<TokenState> {
        let part = bipartition(state.len())?;
        let matched = soft_match(ctx.keys, &part, r)?;
        tome_merge(&state, &matched)
    }
}

/// Saliency-aware merging.
#[derive(Debug, Clone, Copy, Default)]
pub struct VidTldrReducer {
    /// Replace the masked saliency with ones; the reducer then matches ToMe exactly.
    pub unit_saliency: bool,
}

impl Reducer for VidTldrReducer {
    fn name(&self) -> &str {
        "vidtldr"
    }

    fn reduce(&self, state: TokenState, ctx: &LayerContext<'_>, r: usize) -> Result<TokenState> {
        let part = bipartition(state.len())?;
        let matched = soft_match(ctx.keys, &part, r)?;
        let masked = if self.unit_saliency {
            vec![1.0; state.len()]
        } else {
            SaliencyScores::from_attention(&ctx.maps.head_mean_probs)?.masked
        };
        let updated = vidtldr_mass_update(&state, &part, &masked)?;
        vidtldr_merge(&state, &matched, &updated)
    }
}

/// Which score [`PruneReducer`] ranks tokens by.
#[derive(Debug, Clone, PartialEq)]
pub enum PruneScore {
    Attentiveness,
    Sharpness,
    /// Per-layer rollout scores over the original tubes, from a no-reduction pass.
    Rollout(Vec<Vec<f32>>),
}

/// Drops the lowest-scoring tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneReducer {
    pub score: PruneScore,
}

impl PruneReducer {
    pub fn new(score: PruneScore) -> Self {
        Self { score }
    }

    fn scores(&self, state: &TokenState, ctx: &LayerContext<'_>) -> Result<Vec<f32>> {
        match &self.score {
            PruneScore::Attentiveness => attentiveness(&ctx.maps.head_mean_probs),
            PruneScore::Sharpness => sharpness_saliency(&ctx.maps.head_mean_probs),
            PruneScore::Rollout(per_layer) => {
                let tube_scores = per_layer.get(ctx.layer).ok_or_else(|| {
                    Error::InvalidArgument(format!("no rollout scores for layer {}", ctx.layer))
                })?;
                state
                    .provenance
                    .iter()
                    .map(|tubes| {
                        let mut sum = 0.0f64;
                        for &t in tubes {
                            sum += *tube_scores.get(t).ok_or_else(|| {
                                Error::InvalidArgument(format!("no rollout score for tube {t}"))
                            })? as f64;
                        }
                        Ok((sum / tubes.len() as f64) as f32)
                    })
                    .collect()
            }
        }
    }
}

impl Reducer for PruneReducer {
    fn name(&self) -> &str {
        match self.score {
            PruneScore::Attentiveness => "prune-attentiveness",
            PruneScore::Sharpness => "prune-sharpness",
            PruneScore::Rollout(_) => "prune-rollout",
        }
    }

    fn reduce(&self, state: TokenState, ctx: &LayerContext<'_>, r: usize) -> Result<TokenState> {
        let scores = self.scores(&state, ctx)?;
        prune_lowest(&state, &scores, r)
    }
}
