//! Side-by-side comparison of finished run directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vidtldr_core::numerics::cosine_sim;

use crate::config::parse_flat;
use crate::error::{HarnessError, Result};
use crate::run::{MANIFEST_FILE, POOLED_FILE};
use crate::tensor_io::load_tensor;

pub const COMPARE_HEADER: &str =
    "run_id,mode,total_flops,flops_ratio,token_counts,final_tokens,feature_cosine_distance";

/// Manifest keys that must agree across compared runs.
const SHARED_KEYS: &[&str] = &[
    "run.seed",
    "clip.frames",
    "clip.height",
    "clip.width",
    "clip.tube_frames",
    "clip.patch",
    "clip.channels",
    "clip.pattern",
    "model.width",
    "model.heads",
    "model.layers",
    "model.init_std",
    "model.qk_std",
    "model.tie_qk",
];

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: Vec<(String, String)>,
    pub pooled: Vec<f32>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        let manifest = parse_flat(&text, &path)?
            .into_iter()
            .map(|e| (e.key, e.value))
            .collect();
        let pooled = load_tensor(&dir.join(POOLED_FILE))?.data;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            pooled,
        })
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.manifest
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| {
                HarnessError::Compare(format!("{}: manifest lacks '{key}'", self.dir.display()))
            })
    }

    fn total_flops(&self) -> Result<u64> {
        let v = self.get("total_flops")?;
        v.parse().map_err(|_| {
            HarnessError::Compare(format!("{}: bad total_flops '{v}'", self.dir.display()))
        })
    }
}

/// `1 - cos` between pooled outputs; exactly zero for bit-identical vectors.
pub fn feature_distance(a: &[f32], b: &[f32]) -> f64 {
    let same_bits = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
    if same_bits {
        0.0
    } else {
        1.0 - cosine_sim(a, b)
    }
}

/// Comparison CSV. The reference run is the first one in baseline mode, or the first given.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.len() < 2 {
        return Err(HarnessError::Compare(
            "need at least two run directories".into(),
        ));
    }
    let runs: Vec<RunRecord> = dirs
        .iter()
        .map(|d| RunRecord::load(d))
        .collect::<Result<_>>()?;
    let first = &runs[0];
    for r in &runs[1..] {
        for key in SHARED_KEYS {
            let (a, b) = (first.get(key)?, r.get(key)?);
            if a != b {
                return Err(HarnessError::Compare(format!(
                    "{key} differs: {a} in {} vs {b} in {}",
                    first.dir.display(),
                    r.dir.display()
                )));
            }
        }
        if r.pooled.len() != first.pooled.len() {
            return Err(HarnessError::Compare(format!(
                "{}: pooled output has {} values, expected {}",
                r.dir.display(),
                r.pooled.len(),
                first.pooled.len()
            )));
        }
    }
    let reference = runs
        .iter()
        .find(|r| r.get("run.mode").is_ok_and(|m| m == "baseline"))
        .unwrap_or(first);
    let ref_flops = reference.total_flops()?;

    let mut out = String::new();
    out.push_str(COMPARE_HEADER);
    out.push('\n');
    for r in &runs {
        let flops = r.total_flops()?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.get("run.id")?,
            r.get("run.mode")?,
            flops,
            flops as f64 / ref_flops as f64,
            r.get("token_counts")?,
            r.get("final_tokens")?,
            feature_distance(&r.pooled, &reference.pooled)
        );
    }
    Ok(out)
}
