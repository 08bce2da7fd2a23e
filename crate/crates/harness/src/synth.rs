//! Synthetic clips with known foreground.
//!
//! - `noise`: i.i.d. standard normal voxels.
//! - `moving-blob`: noise background plus a bright square object, tube aligned, that moves
//!   one patch per frame group and bounces off the borders. Tubes covered by the object are
//!   the ground-truth foreground.
//! - `front-loaded`: the moving blob plus a scene texture shared by every background tube
//!   whose strength halves with each frame group, so most of the clip's content sits in the
//!   first frames.

use std::fmt;
use std::str::FromStr;

use vidtldr_core::model::{Clip, ClipSpec};
use vidtldr_core::numerics::SeededRng;
use vidtldr_core::Result;

const BLOB_AMPLITUDE: f32 = 3.0;
const BLOB_NOISE: f32 = 0.1;
const SCENE_AMPLITUDE: f32 = 5.0;
const SCENE_DECAY: f32 = 0.5;

const CLIP_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Noise,
    MovingBlob,
    FrontLoaded,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::Noise => "noise",
            Pattern::MovingBlob => "moving-blob",
            Pattern::FrontLoaded => "front-loaded",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "noise" => Ok(Pattern::Noise),
            "moving-blob" => Ok(Pattern::MovingBlob),
            "front-loaded" => Ok(Pattern::FrontLoaded),
            other => Err(format!("unknown clip pattern '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub clip: Clip,
    /// Ground-truth foreground flag per tube.
    pub foreground: Vec<bool>,
}

pub fn synth_clip(spec: &ClipSpec, seed: u64, pattern: Pattern) -> Result<SynthClip> {
    spec.validate()?;
    let mut rng = SeededRng::new(seed).substream(CLIP_STREAM);
    let mut clip = Clip::zeros(spec);
    for v in clip.data_mut() {
        *v = rng.normal();
    }
    let mut foreground = vec![false; spec.num_tokens()];
    if pattern == Pattern::Noise {
        return Ok(SynthClip { clip, foreground });
    }

    let (gh, gw) = (spec.grid_h(), spec.grid_w());
    let side = (gh.min(gw) / 2).max(1);
    let mut colour: Vec<f32> = (0..spec.in_channels).map(|_| rng.normal()).collect();
    let norm = colour.iter().map(|c| c * c).sum::<f32>().sqrt().max(1e-6);
    colour.iter_mut().for_each(|c| *c *= BLOB_AMPLITUDE / norm);

    let scene: Vec<f32> = if pattern == Pattern::FrontLoaded {
        rng.gaussian_vec(spec.tube_len(), 1.0)
    } else {
        Vec::new()
    };

    let mut row = rng.below(gh - side + 1) as isize;
    let mut col = rng.below(gw - side + 1) as isize;
    let mut drow = rng.below(3) as isize - 1;
    let mut dcol = rng.below(3) as isize - 1;

    for g in 0..spec.frame_groups() {
        if !scene.is_empty() {
            let weight = SCENE_AMPLITUDE * SCENE_DECAY.powi(g as i32);
            for r in 0..gh {
                for c in 0..gw {
                    add_tube(&mut clip, spec, g, r, c, |k| weight * scene[k]);
                }
            }
        }
        for r in row as usize..row as usize + side {
            for c in col as usize..col as usize + side {
                foreground[spec.tube_index(g, r, c)] = true;
            }
        }
        let p = spec.patch;
        for dt in 0..spec.tube_frames {
            let f = g * spec.tube_frames + dt;
            for (ch, &value) in colour.iter().enumerate() {
                for y in row as usize * p..(row as usize + side) * p {
                    for x in col as usize * p..(col as usize + side) * p {
                        clip.set(f, ch, y, x, value + BLOB_NOISE * rng.normal());
                    }
                }
            }
        }
        (row, drow) = bounce(row, drow, gh - side);
        (col, dcol) = bounce(col, dcol, gw - side);
    }
    Ok(SynthClip { clip, foreground })
}

fn bounce(pos: isize, vel: isize, max: usize) -> (isize, isize) {
    let next = pos + vel;
    if next < 0 || next > max as isize {
        let vel = -vel;
        ((pos + vel).clamp(0, max as isize), vel)
    } else {
        (next, vel)
    }
}

/// Adds `value(k)` to every voxel of one tube, `k` running in tube-vector order.
fn add_tube(
    clip: &mut Clip,
    spec: &ClipSpec,
    group: usize,
    row: usize,
    col: usize,
    value: impl Fn(usize) -> f32,
) {
    let p = spec.patch;
    let mut k = 0;
    for dt in 0..spec.tube_frames {
        let f = group * spec.tube_frames + dt;
        for ch in 0..spec.in_channels {
            for y in row * p..(row + 1) * p {
                for x in col * p..(col + 1) * p {
                    let v = clip.get(f, ch, y, x) + value(k);
                    clip.set(f, ch, y, x, v);
                    k += 1;
                }
            }
        }
    }
}
