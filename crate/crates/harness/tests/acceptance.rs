//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::cell::RefCell;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use vidtldr_core::costmodel::{schedule_flops, CostConfig};
use vidtldr_core::merging::{
    bipartition, soft_match, tome_merge, vidtldr_mass_update, vidtldr_merge, ToMeReducer,
    VidTldrReducer,
};
use vidtldr_core::model::{
    attention_forward, embed_clip, forward_tokens, Clip, ClipSpec, ForwardOptions, InitConfig,
    LayerContext, MergeSchedule, ModelWeights, NoReduction, Reducer, TokenState,
};
use vidtldr_core::numerics::{row_softmax, Matrix, SeededRng};
use vidtldr_core::saliency::{
    attentiveness, frame_score_ratio, sharpness_saliency, std_dev, SaliencyScores,
};
use vidtldr_core::MASS_FLOOR;
use vidtldr_harness::config::Mode;
use vidtldr_harness::metrics::without_column;
use vidtldr_harness::run::make_reducer;
use vidtldr_harness::synth::{synth_clip, Pattern};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    err.to_string()
}

// ---------------------------------------------------------------------------------------
// shared random fixtures

fn small_spec(rng: &mut SeededRng) -> ClipSpec {
    let tube_frames = 1 + rng.below(2);
    let heads = [1, 2, 4][rng.below(3)];
    ClipSpec {
        frames: tube_frames * (1 + rng.below(3)),
        height: 4 * (2 + rng.below(3)),
        width: 4 * (2 + rng.below(3)),
        tube_frames,
        patch: 4,
        in_channels: 1 + rng.below(3),
        embed_dim: 4 * heads * (1 + rng.below(2)),
        heads,
        layers: 4 + rng.below(3),
    }
}

fn gaussian_clip(spec: &ClipSpec, rng: &mut SeededRng) -> Clip {
    let mut clip = Clip::zeros(spec);
    for v in clip.data_mut() {
        *v = rng.normal();
    }
    clip
}

struct Setup {
    spec: ClipSpec,
    weights: ModelWeights,
    tokens: TokenState,
}

fn random_setup(rng: &mut SeededRng) -> Result<Setup, String> {
    let spec = small_spec(rng);
    let weights =
        ModelWeights::init(&spec, rng.below(1 << 30) as u64, &InitConfig::default()).map_err(e)?;
    let clip = gaussian_clip(&spec, rng);
    let tokens = embed_clip(&clip, &spec, &weights).map_err(e)?;
    Ok(Setup {
        spec,
        weights,
        tokens,
    })
}

/// Random schedule over the first four layers; merges take at most half, prunes leave one.
fn random_schedule(n0: usize, merging: bool, rng: &mut SeededRng) -> MergeSchedule {
    let mut n = n0;
    let mut r = Vec::with_capacity(4);
    for _ in 0..4 {
        let cap = if merging { n / 2 } else { n.saturating_sub(1) };
        let take = rng.below(cap + 1);
        r.push(take);
        n -= take;
    }
    MergeSchedule::new(r)
}

fn forward(
    setup: &Setup,
    reducer: &dyn Reducer,
    schedule: &MergeSchedule,
) -> Result<TokenState, String> {
    forward_tokens(
        setup.tokens.clone(),
        &setup.weights,
        reducer,
        schedule,
        ForwardOptions::default(),
    )
    .map(|t| t.state)
    .map_err(e)
}

// ---------------------------------------------------------------------------------------
// 1. cost model against the published GFLOPs column

fn c1_cost_model() -> Outcome {
    const BASE: f64 = 303.3;
    const COLUMN: [f64; 7] = [237.6, 243.1, 248.6, 254.0, 259.5, 265.0, 270.5];
    let cfg = CostConfig::new(2352, 768, 12);
    let g = |s: &MergeSchedule| -> Result<f64, String> {
        Ok(schedule_flops(&cfg, s).map_err(e)?.total_flops as f64 / 1e9)
    };
    let base = g(&MergeSchedule::zeros(12))?;
    let mut worst_rel = (base - BASE).abs() / BASE;
    let mut ours = Vec::new();
    for (l, want) in COLUMN.iter().enumerate() {
        let v = g(&MergeSchedule::single(12, l, 400))?;
        worst_rel = worst_rel.max((v - want).abs() / want);
        ours.push(v);
    }
    let worst_delta = (1..7)
        .map(|i| ((ours[i] - ours[i - 1]) - (COLUMN[i] - COLUMN[i - 1])).abs())
        .fold(0.0f64, f64::max);
    check(
        worst_rel <= 0.02 && worst_delta <= 0.2,
        format!(
            "base {base:.2} G, column {:?} G, worst rel err {:.3}%, worst delta err {worst_delta:.3} G",
            ours.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            worst_rel * 100.0
        ),
    )
}

// 2. later reductions always cost more

fn c2_layer_ordering() -> Outcome {
    let mut rng = SeededRng::new(2);
    for case in 0..200 {
        let n0 = 2 + rng.below(4000);
        let c = 1 + rng.below(1024);
        let layers = 2 + rng.below(23);
        let r = 1 + rng.below(n0 - 1);
        let cfg = CostConfig::new(n0, c, layers);
        let mut prev = None;
        for l in 0..layers {
            let f = schedule_flops(&cfg, &MergeSchedule::single(layers, l, r))
                .map_err(e)?
                .total_flops;
            if let Some(p) = prev {
                if f <= p {
                    return Err(format!(
                        "case {case}: N0={n0} C={c} L={layers} r={r}: layer {l} costs {f} <= {p}"
                    ));
                }
            }
            prev = Some(f);
        }
    }
    Ok("200 configurations strictly increasing".into())
}

// 3. matching and merging against brute force

fn oracle_cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `(src, dst)` pairs of the exhaustive matching: all pairwise scores, then rank counting.
fn oracle_matching(keys: &Matrix, r: usize) -> Vec<(usize, usize)> {
    let n = keys.rows();
    let sim: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| oracle_cosine(keys.row(i), keys.row(j)))
                .collect()
        })
        .collect();
    let best: Vec<(usize, usize, f64)> = (1..n)
        .step_by(2)
        .map(|s| {
            let mut d_best = 0;
            for d in (0..n).step_by(2) {
                if sim[s][d] > sim[s][d_best] {
                    d_best = d;
                }
            }
            (s, d_best, sim[s][d_best])
        })
        .collect();
    best.iter()
        .filter(|&&(s, _, v)| {
            let beaten_by = best
                .iter()
                .filter(|&&(s2, _, v2)| v2 > v || (v2 == v && s2 < s))
                .count();
            beaten_by < r
        })
        .map(|&(s, d, _)| (s, d))
        .collect()
}

/// Output rows and masses of merging `pairs` with `masses`, survivors in index order.
fn oracle_merge(
    features: &Matrix,
    masses: &[f64],
    pairs: &[(usize, usize)],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = features.rows();
    let mut rows = Vec::new();
    let mut out_mass = Vec::new();
    for t in 0..n {
        if pairs.iter().any(|&(s, _)| s == t) {
            continue;
        }
        let members: Vec<usize> = std::iter::once(t)
            .chain(pairs.iter().filter(|&&(_, d)| d == t).map(|&(s, _)| s))
            .collect();
        let total: f64 = members.iter().map(|&j| masses[j]).sum();
        let row = (0..features.cols())
            .map(|c| {
                members
                    .iter()
                    .map(|&j| masses[j] * features.get(j, c) as f64)
                    .sum::<f64>()
                    / total
            })
            .collect();
        rows.push(row);
        out_mass.push(total);
    }
    (rows, out_mass)
}

fn max_diff(state: &TokenState, rows: &[Vec<f64>], masses: &[f64]) -> Result<f64, String> {
    if state.len() != rows.len() {
        return Err(format!("{} tokens, oracle has {}", state.len(), rows.len()));
    }
    let mut worst = 0.0f64;
    for (i, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((state.features.get(i, c) as f64 - v).abs());
        }
        worst = worst.max((state.mass[i] - masses[i]).abs());
    }
    Ok(worst)
}

fn c3_merge_oracle() -> Outcome {
    let mut rng = SeededRng::new(3);
    let mut worst = 0.0f64;
    let mut tie_cases = 0;
    for case in 0..500 {
        let n = 2 + rng.below(15);
        let dim = 1 + rng.below(6);
        let mut keys = rng.gaussian_matrix(n, dim, 1.0);
        // exact duplicates and zero keys exercise the tie rules
        if case % 3 == 0 && n >= 3 {
            let (a, b) = (rng.below(n), rng.below(n));
            let row = keys.row(a).to_vec();
            keys.row_mut(b).copy_from_slice(&row);
            tie_cases += 1;
        }
        if case % 7 == 0 {
            keys.row_mut(rng.below(n)).iter_mut().for_each(|x| *x = 0.0);
        }
        let part = bipartition(n).map_err(e)?;
        let r = rng.below(part.src.len() + 1);
        let matched = soft_match(&keys, &part, r).map_err(e)?;
        let mut got: Vec<(usize, usize)> = matched.merges.iter().map(|m| (m.src, m.dst)).collect();
        got.sort_unstable();
        let want = oracle_matching(&keys, r);
        if got != want {
            return Err(format!(
                "case {case}: n={n} r={r}: matched {got:?}, oracle {want:?}"
            ));
        }

        let width = 1 + rng.below(6);
        let features = rng.gaussian_matrix(n, width, 1.0);
        let mut state = TokenState::from_features(features.clone(), vec![0; n]).map_err(e)?;
        state.mass = (0..n).map(|_| 0.25 + 3.0 * rng.uniform() as f64).collect();
        let (rows, masses) = oracle_merge(&features, &state.mass, &want);
        worst = worst.max(max_diff(
            &tome_merge(&state, &matched).map_err(e)?,
            &rows,
            &masses,
        )?);

        let saliency: Vec<f32> = (0..n)
            .map(|_| {
                if rng.below(4) == 0 {
                    0.0
                } else {
                    rng.uniform()
                }
            })
            .collect();
        let tilde: Vec<f64> = (0..n)
            .map(|i| {
                if i % 2 == 1 {
                    (saliency[i] as f64 * state.mass[i]).max(MASS_FLOOR)
                } else {
                    state.mass[i]
                }
            })
            .collect();
        let updated = vidtldr_mass_update(&state, &part, &saliency).map_err(e)?;
        let (rows, masses) = oracle_merge(&features, &tilde, &want);
        worst = worst.max(max_diff(
            &vidtldr_merge(&state, &matched, &updated).map_err(e)?,
            &rows,
            &masses,
        )?);
    }
    check(
        worst <= 1e-6,
        format!("500 instances ({tie_cases} with duplicate keys), max merge error {worst:.2e}"),
    )
}

// 4. unit saliency reduces the saliency-aware merge to ToMe

fn c4_degeneration() -> Outcome {
    let mut rng = SeededRng::new(4);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let setup = random_setup(&mut rng)?;
        let schedule = random_schedule(setup.spec.num_tokens(), true, &mut rng);
        let unit = VidTldrReducer {
            unit_saliency: true,
        };
        let a = forward(&setup, &unit, &schedule)?;
        let b = forward(&setup, &ToMeReducer, &schedule)?;
        if a.len() != b.len() || a.provenance != b.provenance {
            return Err(format!("case {case}: token groups differ"));
        }
        for (x, y) in a.features.data().iter().zip(b.features.data()) {
            worst = worst.max((x - y).abs() as f64);
        }
        for (x, y) in a.mass.iter().zip(&b.mass) {
            worst = worst.max((x - y).abs());
        }
    }
    check(
        worst <= 1e-7,
        format!("100 forwards, max difference {worst:.2e}"),
    )
}

// 5. mass bookkeeping across merges

/// Wraps a reducer and records the mass error of every merge it performs.
struct MassAudit<R> {
    inner: R,
    saliency_weighted: bool,
    worst: RefCell<f64>,
    merges: RefCell<usize>,
}

impl<R: Reducer> Reducer for MassAudit<R> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn reduce(
        &self,
        state: TokenState,
        ctx: &LayerContext<'_>,
        r: usize,
    ) -> vidtldr_core::Result<TokenState> {
        let expected: f64 = if self.saliency_weighted {
            let masked = SaliencyScores::from_attention(&ctx.maps.head_mean_probs)?.masked;
            state
                .mass
                .iter()
                .enumerate()
                .map(|(i, &m)| {
                    if i % 2 == 1 {
                        (masked[i] as f64 * m).max(MASS_FLOOR)
                    } else {
                        m
                    }
                })
                .sum()
        } else {
            state.total_mass()
        };
        let out = self.inner.reduce(state, ctx, r)?;
        let err = (out.total_mass() - expected).abs();
        let mut worst = self.worst.borrow_mut();
        *worst = worst.max(err);
        *self.merges.borrow_mut() += 1;
        Ok(out)
    }
}

fn c5_mass_conservation() -> Outcome {
    let mut rng = SeededRng::new(5);
    let tome = MassAudit {
        inner: ToMeReducer,
        saliency_weighted: false,
        worst: RefCell::new(0.0),
        merges: RefCell::new(0),
    };
    let vt = MassAudit {
        inner: VidTldrReducer::default(),
        saliency_weighted: true,
        worst: RefCell::new(0.0),
        merges: RefCell::new(0),
    };
    let mut final_err = 0.0f64;
    for _ in 0..100 {
        let setup = random_setup(&mut rng)?;
        let n0 = setup.spec.num_tokens();
        let schedule = random_schedule(n0, true, &mut rng);
        let out = forward(&setup, &tome, &schedule)?;
        final_err = final_err.max((out.total_mass() - n0 as f64).abs());
        forward(&setup, &vt, &schedule)?;
    }
    let (tw, vw) = (*tome.worst.borrow(), *vt.worst.borrow());
    check(
        tw <= 1e-5 && vw <= 1e-5 && final_err <= 1e-5,
        format!(
            "{} ToMe merges (max err {tw:.1e}, final total err {final_err:.1e}), {} saliency-aware merges (max err {vw:.1e})",
            tome.merges.borrow(),
            vt.merges.borrow()
        ),
    )
}

// 6. sharpness saliency extremes and permutation equivariance

fn c6_saliency_extremes() -> Outcome {
    let mut rng = SeededRng::new(6);
    let mut worst_perm = 0.0f64;
    for case in 0..100 {
        let n = 3 + rng.below(14);
        let mut rows: Vec<Vec<f32>> = row_softmax(&rng.gaussian_matrix(n, n, 1.0))
            .row_iter()
            .map(<[f32]>::to_vec)
            .collect();
        let (hot, flat) = (rng.below(n), rng.below(n - 1));
        let flat = if flat >= hot { flat + 1 } else { flat };
        rows[hot] = vec![0.0; n];
        rows[hot][rng.below(n)] = 1.0;
        rows[flat] = vec![1.0 / n as f32; n];
        let a = Matrix::from_rows(&rows).map_err(e)?;
        let s = sharpness_saliency(&a).map_err(e)?;
        if s[hot] != 1.0 || s[flat] != 0.0 {
            return Err(format!(
                "case {case}: one-hot {} uniform {}",
                s[hot], s[flat]
            ));
        }

        // relabel tokens: permute rows and columns together
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.below(i + 1));
        }
        let mut b = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                b.set(i, j, a.get(perm[i], perm[j]));
            }
        }
        let sp = sharpness_saliency(&b).map_err(e)?;
        for i in 0..n {
            worst_perm = worst_perm.max((sp[i] - s[perm[i]]).abs() as f64);
        }
    }
    check(
        worst_perm <= 1e-6,
        format!("extremes exact in 100 maps, max permutation deviation {worst_perm:.1e}"),
    )
}

// 7. proportional attention with uniform mass

fn c7_proportional_identity() -> Outcome {
    let mut rng = SeededRng::new(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mut spec = small_spec(&mut rng);
        spec.layers = 1;
        let init = InitConfig {
            std: 0.02 + 0.3 * rng.uniform(),
            qk_std: 0.05 + 0.5 * rng.uniform(),
            tie_query_key: rng.below(2) == 0,
        };
        let weights = ModelWeights::init(&spec, rng.below(1 << 30) as u64, &init).map_err(e)?;
        let mut tokens = embed_clip(&gaussian_clip(&spec, &mut rng), &spec, &weights).map_err(e)?;
        let mass = if rng.below(2) == 0 {
            1.0
        } else {
            0.5 + 4.0 * rng.uniform() as f64
        };
        tokens.mass = vec![mass; tokens.len()];
        let prop = attention_forward(tokens.clone(), &weights.layers[0], true).map_err(e)?;
        let plain = attention_forward(tokens, &weights.layers[0], false).map_err(e)?;
        for (p, q) in prop.maps.probs.iter().zip(&plain.maps.probs) {
            for (x, y) in p.data().iter().zip(q.data()) {
                worst = worst.max((x - y).abs() as f64);
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("100 layers, max probability difference {worst:.2e}"),
    )
}

// 8 and 9: layer-1 behaviour on synthetic clips

fn layer_one(spec: &ClipSpec, seed: u64, pattern: Pattern) -> Result<(Matrix, Vec<bool>), String> {
    let weights = ModelWeights::init(spec, seed, &InitConfig::default()).map_err(e)?;
    let clip = synth_clip(spec, seed, pattern).map_err(e)?;
    let tokens = embed_clip(&clip.clip, spec, &weights).map_err(e)?;
    let out = attention_forward(tokens, &weights.layers[0], true).map_err(e)?;
    Ok((out.maps.head_mean_probs, clip.foreground))
}

fn c8_foreground() -> Outcome {
    let spec = ClipSpec::default();
    let mut wins = 0;
    for seed in 0..50 {
        let (a, fg) = layer_one(&spec, seed, Pattern::MovingBlob)?;
        let masked = SaliencyScores::from_attention(&a).map_err(e)?.masked;
        let mean = |want: bool| {
            let v: Vec<f64> = masked
                .iter()
                .zip(&fg)
                .filter(|(_, &f)| f == want)
                .map(|(&s, _)| s as f64)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        if mean(true) > mean(false) {
            wins += 1;
        }
    }
    check(
        wins >= 45,
        format!("blob above background in {wins}/50 clips (need 45)"),
    )
}

fn c9_temporal_bias() -> Outcome {
    let spec = ClipSpec::default();
    let (frame_of, groups) = (spec.frame_of(), spec.frame_groups());
    let mut wins = 0;
    for seed in 0..50 {
        let (a, _) = layer_one(&spec, seed, Pattern::FrontLoaded)?;
        let masked = SaliencyScores::from_attention(&a).map_err(e)?.masked;
        let att = attentiveness(&a).map_err(e)?;
        let s_std = std_dev(&frame_score_ratio(&masked, &frame_of, groups).map_err(e)?);
        let a_std = std_dev(&frame_score_ratio(&att, &frame_of, groups).map_err(e)?);
        if s_std < a_std {
            wins += 1;
        }
    }
    check(
        wins >= 40,
        format!("flatter frame profile in {wins}/50 clips (need 40)"),
    )
}

// 10. two CLI executions produce identical artifacts

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(e)?
        .map(|entry| {
            let path = entry.map_err(e)?.path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, fs::read(&path).map_err(e)?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn cli_run(cwd: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_vidtldr"))
        .args(["run", "det.cfg"])
        .current_dir(cwd)
        .output()
        .map_err(e)?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let files = snapshot(&cwd.join("det"))?;
    fs::remove_dir_all(cwd.join("det")).map_err(e)?;
    Ok(files)
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e)?;
    fs::write(
        tmp.path().join("det.cfg"),
        "run.mode = vidtldr\nrun.schedule = 8,8,8,8\nrun.seed = 11\nout.dir = det\n\
         dump.attention = true\ndump.tokens = true\n",
    )
    .map_err(e)?;
    let first = cli_run(tmp.path())?;
    let second = cli_run(tmp.path())?;
    if first.len() != second.len() {
        return Err("different file sets".into());
    }
    let mut tensors = 0;
    for ((name, a), (name_b, b)) in first.iter().zip(&second) {
        if name != name_b {
            return Err(format!("file {name} vs {name_b}"));
        }
        let same = if name == "metrics.csv" {
            let strip = |bytes: &[u8]| without_column(&String::from_utf8_lossy(bytes), "wall_ms");
            strip(a).is_some() && strip(a) == strip(b)
        } else {
            a == b
        };
        if !same {
            return Err(format!("{name} differs between runs"));
        }
        tensors += usize::from(name.ends_with(".vtdr"));
    }
    Ok(format!(
        "{} artifacts identical ({tensors} tensor dumps, metrics without wall_ms)",
        first.len()
    ))
}

// 11. final token count for random feasible schedules

fn c11_shape_contract() -> Outcome {
    let mut rng = SeededRng::new(11);
    let modes = [
        Mode::Tome,
        Mode::Vidtldr,
        Mode::PruneAttentiveness,
        Mode::PruneRollout,
        Mode::PruneSharpness,
    ];
    for case in 0..100 {
        let setup = random_setup(&mut rng)?;
        let mode = modes[case % modes.len()];
        let n0 = setup.spec.num_tokens();
        let schedule = random_schedule(n0, mode.merges(), &mut rng);
        let base = forward_tokens(
            setup.tokens.clone(),
            &setup.weights,
            &NoReduction,
            &MergeSchedule::zeros(setup.spec.layers),
            ForwardOptions::default(),
        )
        .map_err(e)?;
        let reducer = make_reducer(mode, Some(&base)).map_err(e)?;
        let out = forward(&setup, reducer.as_ref(), &schedule)?;
        if out.len() != n0 - schedule.total() {
            return Err(format!(
                "case {case}: {mode} with {:?} on {n0} tokens left {}",
                schedule.reductions(),
                out.len()
            ));
        }
        // pruned tubes leave the provenance, so only merges must still partition them
        if mode.merges() {
            out.check_invariants().map_err(e)?;
        }
    }
    Ok("100 schedules, all modes".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 cost-model fidelity", c1_cost_model),
        ("2 later reduction costs more", c2_layer_ordering),
        ("3 merge-oracle equivalence", c3_merge_oracle),
        ("4 unit-saliency degeneration", c4_degeneration),
        ("5 mass conservation", c5_mass_conservation),
        ("6 saliency extremes", c6_saliency_extremes),
        (
            "7 proportional-attention identity",
            c7_proportional_identity,
        ),
        ("8 foreground discrimination", c8_foreground),
        ("9 temporal-bias mitigation", c9_temporal_bias),
        ("10 determinism", c10_determinism),
        ("11 pipeline shape contract", c11_shape_contract),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {}/11 passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
