mod args;
mod commands;
mod error;
mod manifest;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command};
use commands::Produced;
use error::CliError;
use manifest::{write_manifest, RunManifest};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Train { .. } => "train",
        Command::Sweep { .. } => "sweep",
        Command::Map { .. } => "map",
        Command::Energy { .. } => "energy",
        Command::ValidateMoments { .. } => "validate-moments",
        Command::ExportSamples { .. } => "export-samples",
    }
}

/// `Ok(false)` when a validation ran but did not pass.
fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let start = Instant::now();
    let out_dir = cli.out_dir.as_path();
    let name = command_name(&cli.command);
    let mut passed = true;
    let (loaded, produced) = match cli.command {
        Command::Train { common, model_out } => {
            let l = commands::load(&common)?;
            let p = commands::train(&l, out_dir, model_out)?;
            (l, p)
        }
        Command::Sweep {
            common,
            run,
            scheme,
            m_grid,
            q_grid,
            snr_db,
        } => {
            let l = commands::load(&common)?;
            let p = commands::sweep(&l, out_dir, &run, scheme, m_grid, q_grid, snr_db)?;
            (l, p)
        }
        Command::Map {
            common,
            run,
            scheme,
            uses,
            snr_db,
            resolution,
        } => {
            let l = commands::load(&common)?;
            let p = commands::map(&l, out_dir, &run, scheme, uses, snr_db, resolution)?;
            (l, p)
        }
        Command::Energy {
            common,
            run,
            m_grid,
            q_grid,
            snr_db,
        } => {
            let l = commands::load(&common)?;
            let p = commands::energy(&l, out_dir, &run, m_grid, q_grid, snr_db)?;
            (l, p)
        }
        Command::ValidateMoments {
            common,
            block_len,
            snr_db,
            frames,
            states,
        } => {
            let l = commands::load(&common)?;
            let (p, pass) = commands::validate_moments(&l, out_dir, block_len, snr_db, frames, states)?;
            passed = pass;
            (l, p)
        }
        Command::ExportSamples { common, count } => {
            let l = commands::load(&common)?;
            let p = commands::export_samples(&l, out_dir, count)?;
            (l, p)
        }
    };
    finish(out_dir, name, loaded, produced, start)?;
    Ok(passed)
}

fn finish(out_dir: &Path, name: &str, loaded: commands::Loaded, produced: Produced, start: Instant) -> Result<(), CliError> {
    let manifest = RunManifest {
        command: name.to_string(),
        args: std::env::args().skip(1).collect(),
        config: loaded.config_ref,
        seed: loaded.config.seed,
        version: env!("CARGO_PKG_VERSION"),
        duration_s: start.elapsed().as_secs_f64(),
        outputs: produced.outputs.iter().map(|p| p.display().to_string()).collect(),
        details: produced.details,
    };
    let path = write_manifest(out_dir, &manifest).map_err(|e| CliError::output(&out_dir.join("manifest.json"), e))?;
    println!("wrote {} (+ manifest {})", manifest.outputs.join(", "), path.display());
    Ok(())
}
