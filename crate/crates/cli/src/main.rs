use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use timely_tracking::experiments::{run_experiment, write_tables, ExperimentConfig, ExperimentId, Provenance};
use timely_tracking::validate::{run_validation, ValidationOptions, DEFAULT_HORIZON};
use timely_tracking::{Error, Execution};

/// Output directory used when `--out` is not given.
const OUT_ENV: &str = "TIMELY_TRACK_OUT";
const DEFAULT_OUT: &str = "results";

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "timely-track", version, about = "Test-rate allocation experiments for timely infection tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV tables.
    Run {
        /// fig5, fig6, fig7, fig8, fig9, fig10a, fig10b, fig11 or validate.
        #[arg(long, short)]
        experiment: String,
        /// Output directory [env: TIMELY_TRACK_OUT, default: results].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Override a parameter, e.g. `--set C=12`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// File of `key = value` lines, applied before the flags.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluate restarts and sweep points on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Cross-check closed forms, chains and simulation; exits 1 on failure.
    Validate {
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write validate.csv here (or to $TIMELY_TRACK_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
        /// Deliberately break the noisy closed form.
        #[arg(long, hide = true)]
        tamper: bool,
    },
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Config { .. } | Error::Parameter(_) | Error::Domain(_) => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_VALIDATION,
    }
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn print_report(report: &timely_tracking::validate::ValidationReport) {
    for f in &report.families {
        println!(
            "{} {:<18} cases={:<5} max_dev={:.3e} worst_ratio={:.3}",
            if f.passed() { "PASS" } else { "FAIL" },
            f.name,
            f.cases,
            f.max_deviation,
            f.worst_ratio
        );
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run {
            experiment,
            out,
            seed,
            restarts,
            sets,
            config,
            sequential,
        } => {
            let mut cfg = ExperimentConfig::new(experiment.parse::<ExperimentId>()?);
            cfg.exec = execution(sequential);
            if let Some(path) = config {
                cfg.apply_config_file(&path)?;
            }
            if let Some(seed) = seed {
                cfg.set("seed", &seed.to_string())?;
            }
            if let Some(k) = restarts {
                cfg.set("restarts", &k.to_string())?;
            }
            for s in &sets {
                cfg.set_assignment(s)?;
            }
            let output = run_experiment(&cfg)?;
            let dir = out.or_else(env_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            for path in write_tables(&dir, &output.tables)? {
                println!("wrote {}", path.display());
            }
            match output.validation {
                Some(report) => {
                    print_report(&report);
                    Ok(if report.passed() { 0 } else { EXIT_VALIDATION })
                }
                None => Ok(0),
            }
        }
        Command::Validate {
            horizon,
            seed,
            out,
            sequential,
            tamper,
        } => {
            let opts = ValidationOptions {
                seed,
                horizon,
                tamper,
                exec: execution(sequential),
            };
            let report = run_validation(&opts)?;
            print_report(&report);
            if let Some(dir) = out.or_else(env_out) {
                let table = report.to_table(Provenance { seed, restarts: 0 });
                for path in write_tables(&dir, &[table])? {
                    println!("wrote {}", path.display());
                }
            }
            Ok(if report.passed() { 0 } else { EXIT_VALIDATION })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
