use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};

use vidtldr_core::saliency::std_dev;
use vidtldr_harness::compare::compare;
use vidtldr_harness::config::{load_config, RunConfig};
use vidtldr_harness::error::{HarnessError, Result};
use vidtldr_harness::metrics::frame_ratio_csv;
use vidtldr_harness::run::{dump_saliency, flops_table, run, temporal_bias};

#[derive(Parser)]
#[command(
    name = "vidtldr",
    version,
    about = "Saliency-aware token merging harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more configs, in parallel, each into its own output directory.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Print the per-layer FLOPs of a config's schedule.
    Flops { config: PathBuf },
    /// Write layer-1 frame-group score shares to frame_ratio.csv.
    TemporalBias { config: PathBuf },
    /// Compare finished run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the comparison CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write per-tube layer-1 scores to saliency.csv.
    DumpSaliency { config: PathBuf },
}

fn run_all(paths: &[PathBuf]) -> Result<()> {
    let configs: Vec<RunConfig> = paths
        .iter()
        .map(|p| load_config(p))
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    for (cfg, path) in configs.iter().zip(paths) {
        if !seen.insert(cfg.out_dir.clone()) {
            return Err(HarnessError::InvalidConfig {
                path: path.clone(),
                msg: format!(
                    "out.dir {} is shared with another config",
                    cfg.out_dir.display()
                ),
            });
        }
    }
    let results: Vec<Result<_>> = thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let mut first_err = None;
    for (res, path) in results.into_iter().zip(paths) {
        match res {
            Ok(summary) => println!(
                "{}: {} tokens, {} FLOPs -> {}",
                path.display(),
                summary.trace.final_count(),
                summary.total_flops(),
                summary.config.out_dir.display()
            ),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { configs } => run_all(&configs),
        Command::Flops { config } => {
            print!("{}", flops_table(&load_config(&config)?)?);
            Ok(())
        }
        Command::TemporalBias { config } => {
            let cfg = load_config(&config)?;
            let ratios = temporal_bias(&cfg)?;
            print!("{}", frame_ratio_csv(&ratios));
            println!(
                "# std: attentiveness {} rollout {} masked_saliency {}",
                std_dev(&ratios.attentiveness),
                std_dev(&ratios.rollout),
                std_dev(&ratios.masked_saliency)
            );
            Ok(())
        }
        Command::Compare { dirs, out } => {
            let csv = compare(&dirs)?;
            if let Some(path) = out {
                fs::write(&path, &csv).map_err(|e| HarnessError::io(&path, e))?;
            }
            print!("{csv}");
            Ok(())
        }
        Command::DumpSaliency { config } => {
            let path = dump_saliency(&load_config(&config)?)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
