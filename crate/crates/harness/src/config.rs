//! Run configuration: flat `key = value` text.
//!
//! `#` starts a comment; blank lines are ignored. Unknown or repeated keys are errors.
//! Every key is optional; see the README for the defaults.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vidtldr_core::model::{ClipSpec, InitConfig, MergeSchedule};

use crate::error::{HarnessError, Result};
use crate::synth::Pattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Baseline,
    Tome,
    Vidtldr,
    PruneAttentiveness,
    PruneRollout,
    PruneSharpness,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Baseline,
        Mode::Tome,
        Mode::Vidtldr,
        Mode::PruneAttentiveness,
        Mode::PruneRollout,
        Mode::PruneSharpness,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Tome => "tome",
            Mode::Vidtldr => "vidtldr",
            Mode::PruneAttentiveness => "prune-attentiveness",
            Mode::PruneRollout => "prune-rollout",
            Mode::PruneSharpness => "prune-sharpness",
        }
    }

    /// Merging modes can remove at most half the tokens of a layer.
    pub fn merges(&self) -> bool {
        matches!(self, Mode::Tome | Mode::Vidtldr)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ClipSpec,
    pub pattern: Pattern,
    pub init: InitConfig,
    pub seed: u64,
    pub mode: Mode,
    pub schedule: MergeSchedule,
    pub run_id: String,
    pub out_dir: PathBuf,
    pub dump_attention: bool,
    pub dump_tokens: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = ClipSpec::default();
        Self {
            spec,
            pattern: Pattern::MovingBlob,
            init: InitConfig::default(),
            seed: 0,
            mode: Mode::Baseline,
            schedule: MergeSchedule::zeros(spec.layers),
            run_id: "run".into(),
            out_dir: PathBuf::from("out"),
            dump_attention: false,
            dump_tokens: false,
        }
    }
}

impl RunConfig {
    /// Checks the clip geometry, the mode/schedule pairing and schedule feasibility.
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.spec.validate().map_err(|e| e.to_string())?;
        if self.mode == Mode::Baseline && !self.schedule.is_zero() {
            return Err("baseline mode requires an all-zero schedule".into());
        }
        let n = self.spec.num_tokens();
        self.schedule
            .validate(n, self.spec.layers)
            .map_err(|e| e.to_string())?;
        if self.mode.merges() {
            for (l, &entering) in self
                .schedule
                .trajectory(n, self.spec.layers)
                .iter()
                .enumerate()
            {
                let r = self.schedule.at(l);
                if r > entering / 2 {
                    return Err(format!(
                        "infeasible schedule: layer {} merges {r} of {entering} tokens (at most {})",
                        l + 1,
                        entering / 2
                    ));
                }
            }
        }
        if self.run_id.is_empty() || self.run_id.contains([',', '\n', '\r', '"']) {
            return Err(format!(
                "run.id '{}' must be non-empty without commas",
                self.run_id
            ));
        }
        if !(self.init.std > 0.0 && self.init.qk_std > 0.0) {
            return Err("model.init_std and model.qk_std must be positive".into());
        }
        Ok(())
    }
}

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits flat `key = value` text into entries, rejecting malformed and repeated keys.
pub fn parse_flat(text: &str, path: &Path) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "empty key".into(),
            });
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(HarnessError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("key '{key}' already set on line {}", prev.line),
            });
        }
        entries.push(Entry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn parse_schedule(value: &str) -> std::result::Result<Vec<usize>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad schedule entry '{}'", v.trim()))
        })
        .collect()
}

fn parse_value<T: FromStr>(entry: &Entry, path: &Path) -> Result<T> {
    entry.value.parse::<T>().map_err(|_| HarnessError::Parse {
        path: path.to_path_buf(),
        line: entry.line,
        msg: format!("bad value '{}' for {}", entry.value, entry.key),
    })
}

fn parse_with<T>(
    entry: &Entry,
    path: &Path,
    f: impl FnOnce(&str) -> std::result::Result<T, String>,
) -> Result<T> {
    f(&entry.value).map_err(|msg| HarnessError::Parse {
        path: path.to_path_buf(),
        line: entry.line,
        msg,
    })
}

/// Parses config text; `path` is only used in error messages.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut schedule: Option<Vec<usize>> = None;
    for e in parse_flat(text, path)? {
        match e.key.as_str() {
            "clip.frames" => cfg.spec.frames = parse_value(&e, path)?,
            "clip.height" => cfg.spec.height = parse_value(&e, path)?,
            "clip.width" => cfg.spec.width = parse_value(&e, path)?,
            "clip.tube_frames" => cfg.spec.tube_frames = parse_value(&e, path)?,
            "clip.patch" => cfg.spec.patch = parse_value(&e, path)?,
            "clip.channels" => cfg.spec.in_channels = parse_value(&e, path)?,
            "clip.pattern" => cfg.pattern = parse_with(&e, path, str::parse)?,
            "model.width" => cfg.spec.embed_dim = parse_value(&e, path)?,
            "model.heads" => cfg.spec.heads = parse_value(&e, path)?,
            "model.layers" => cfg.spec.layers = parse_value(&e, path)?,
            "model.init_std" => cfg.init.std = parse_value(&e, path)?,
            "model.qk_std" => cfg.init.qk_std = parse_value(&e, path)?,
            "model.tie_qk" => cfg.init.tie_query_key = parse_value(&e, path)?,
            "run.mode" => cfg.mode = parse_with(&e, path, str::parse)?,
            "run.schedule" => schedule = Some(parse_with(&e, path, parse_schedule)?),
            "run.seed" => cfg.seed = parse_value(&e, path)?,
            "run.id" => cfg.run_id = e.value.clone(),
            "out.dir" => cfg.out_dir = PathBuf::from(&e.value),
            "dump.attention" => cfg.dump_attention = parse_value(&e, path)?,
            "dump.tokens" => cfg.dump_tokens = parse_value(&e, path)?,
            other => {
                return Err(HarnessError::Parse {
                    path: path.to_path_buf(),
                    line: e.line,
                    msg: format!("unknown key '{other}'"),
                })
            }
        }
    }
    cfg.schedule = match schedule {
        Some(s) => MergeSchedule::new(s),
        None => MergeSchedule::zeros(cfg.spec.layers),
    };
    cfg.validate().map_err(|msg| HarnessError::InvalidConfig {
        path: path.to_path_buf(),
        msg,
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, path)
}
