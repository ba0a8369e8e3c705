use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use exactdyn_cli::config::{named_presets, BUNDLED};
use exactdyn_cli::run::{build_network, run};
use exactdyn_cli::sweep::{sweep, write_sweep};
use exactdyn_cli::{CliError, SimulationConfig};

#[derive(Parser)]
#[command(name = "exactdyn", version, about = "Exact reduced dynamics of oscillators in a harmonic reservoir")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file, or the name of a bundled config.
    #[arg(long)]
    config: PathBuf,
    /// `key=value` with a dotted key, applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and its network without running.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Threads for row-parallel propagation.
        #[arg(long)]
        workers: Option<usize>,
    },
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Concurrent sweep points.
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

fn load(common: &Common) -> Result<SimulationConfig, CliError> {
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            let name = common.config.to_string_lossy();
            match BUNDLED.iter().find(|(n, _)| *n == name) {
                Some((_, t)) => t.to_string(),
                None => return Err(CliError::Config(format!("cannot read {}: {e}", common.config.display()))),
            }
        }
    };
    let mut config: SimulationConfig = text.parse()?;
    for o in &common.overrides {
        config = config.apply_override(o)?;
    }
    Ok(config)
}

fn list_files(files: &[PathBuf], out: &Path) {
    for f in files {
        println!("{}", f.strip_prefix(out).unwrap_or(f).display());
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { common } => {
            let config = load(&common)?;
            config.validate()?;
            let built = build_network(&config).map_err(|e| match e {
                CliError::Stage { .. } => CliError::Config(e.to_string()),
                other => other,
            })?;
            println!(
                "ok: {} system + {} reservoir modes, horizon {}",
                built.network.n_system,
                built.network.n_reservoir(),
                built.horizon
            );
            Ok(())
        }
        Command::Run { common, out, workers } => {
            let config = load(&common)?;
            if let Some(w) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w.max(1))
                    .build_global()
                    .map_err(|e| CliError::Config(format!("workers: {e}")))?;
            }
            let files = run(&config, &out)?;
            list_files(&files, &out);
            Ok(())
        }
        Command::Sweep { common, out, workers } => {
            let config = load(&common)?;
            let rows = sweep(&config, workers)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let files = write_sweep(&config, &rows, &out)?;
            list_files(&files, &out);
            if failed > 0 {
                eprintln!("{failed} of {} sweep points failed; see the error column", rows.len());
            }
            Ok(())
        }
        Command::Presets { action: PresetAction::List } => {
            println!("spectral presets (network.preset):");
            for p in named_presets() {
                println!("  {:<20} {}", p.name, p.description);
            }
            println!("bundled configs (--config <name>):");
            for (name, _) in BUNDLED {
                println!("  {name}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
