//! `kwr`: batch experiment runner. One JSON config per invocation; results go
//! to CSV/JSON files next to a `manifest.json`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

mod commands;
mod config;
mod error;
mod output;
mod params;

use commands::{dispatch, Ctx};
use config::parse_config;
use error::CliError;
use output::{write_json, Manifest, Output, Versions};

#[derive(Debug, Parser)]
#[command(name = "kwr", version, about = "Radial kinetic wave equation experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for every parallel stage.
    #[arg(long)]
    threads: Option<usize>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli, out_dir: &mut Option<PathBuf>) -> Result<(), CliError> {
    let bytes = std::fs::read(&cli.config)?;
    let loaded = parse_config(&bytes)?;
    let cfg = loaded.config;
    let dir = cli.output.clone().or_else(|| cfg.output_dir.clone()).ok_or_else(|| CliError::Usage {
        path: "output_dir".into(),
        message: "no output directory (set output_dir or pass --output)".into(),
    })?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage { path: "--threads".into(), message: "must be at least 1".into() });
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    *out_dir = Some(dir.clone());

    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let mut ctx = Ctx { seed, out: Output::create(&dir)? };
    let summary = dispatch(cfg.command, &mut ctx, &cfg.parameters)?;
    let manifest = Manifest {
        command: cfg.command.name().to_string(),
        config: serde_json::to_value(&cfg)?,
        config_sha256: loaded.hash,
        seed,
        threads: rayon::current_num_threads(),
        versions: Versions::current(),
        files: ctx.out.files.clone(),
        summary,
        started_unix,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
    };
    write_json(&ctx.out.dir().join("manifest.json"), &manifest)?;
    // a failed earlier run into the same directory leaves a stale report
    let _ = std::fs::remove_file(ctx.out.dir().join("error.json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut out_dir = None;
    match run(&cli, &mut out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.to_json();
            eprintln!("{report}");
            if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
                let _ = write_json(&dir.join("error.json"), &report);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
