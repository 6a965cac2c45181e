use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use leakfree::runner::{
    parse_config, parse_sweep_values, run_experiment_seeded, run_sweep, ExperimentConfig, RunError, WORKERS_ENV,
};

#[derive(Parser)]
#[command(name = "leakfree", version, about = "Run leakage-control experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides ensemble.master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output.path; without either the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of one or more `--set key=v1,v2,...`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=V1,V2,...")]
        sets: Vec<String>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
    },
    /// Check a config and report every schema violation.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
    let cfg = parse_config(&text)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = load(&config)?;
            let result = run_experiment_seeded(&cfg, seed.unwrap_or(cfg.ensemble.master_seed))?;
            match out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from)) {
                Some(path) => result.write(&path)?,
                None => {
                    let mut stdout = std::io::stdout().lock();
                    match stdout.write_all(result.to_csv().as_bytes()) {
                        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                            return Err(RunError::Io { path: "<stdout>".into(), source: e })
                        }
                        _ => {}
                    }
                }
            }
        }
        Command::Sweep { config, sets, out } => {
            let cfg = load(&config)?;
            let axes = sets.iter().map(|s| parse_sweep_values(s)).collect::<Result<Vec<_>, _>>()?;
            run_sweep(&cfg, &axes)?.write(&out)?;
        }
        Command::Validate { config } => {
            load(&config)?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
