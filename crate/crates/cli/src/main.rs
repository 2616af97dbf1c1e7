use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracreset_cli::reproduce::{reproduce, Subset};
use fracreset_cli::run::{describing_tables, load_scenario, run_scenario, Outcome, Overrides};
use fracreset_cli::scenario::{ElementName, ElementSpec, BUNDLED};
use fracreset_cli::{Analysis, CliError};
use fracreset_core::fode::MemoryMode;
use rayon::prelude::*;

/// Simulation, describing functions and stability certificates for
/// fractional-order reset control loops.
#[derive(Debug, Parser)]
#[command(name = "fracreset", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Integration step in seconds, overriding the scenario.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Simulation horizon in seconds, overriding the scenario.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Fractional memory handling at resets (clear, keep, offset).
    #[arg(long, global = true)]
    memory_mode: Option<MemoryMode>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every analysis listed in each scenario.
    Run {
        /// Scenario file, or `bundled:<name>`.
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Simulate and compute step metrics only.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Tabulate the describing function of one element.
    Df {
        kind: ElementName,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long)]
        pole: Option<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 100.0], allow_hyphen_values = true)]
        omega_range: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Frequencies at which to also estimate the DF by simulation.
        #[arg(long, value_delimiter = ',')]
        numerical: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
    },
    /// Stability certificate and beta interval for each scenario.
    Stability {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta_range: Option<Vec<f64>>,
    },
    /// Recompute the worked examples and check them against published values.
    ReproducePaper {
        #[arg(long, value_delimiter = ',', default_value = "sim,df,stab,props")]
        subset: Vec<Subset>,
    },
    /// List the bundled scenarios, or print one.
    Scenarios { name: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FRAC_RESET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("FRAC_RESET_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(e.to_string()))
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let g = cli.global;
    let mut overrides = Overrides {
        step: g.step,
        horizon: g.horizon,
        memory_mode: g.memory_mode,
        beta_range: None,
    };
    match cli.command {
        Command::Run { scenarios } => run_many(&scenarios, &overrides, None, &g.out_dir),
        Command::Simulate { scenarios } => run_many(
            &scenarios,
            &overrides,
            Some(&[Analysis::Simulate, Analysis::Metrics]),
            &g.out_dir,
        ),
        Command::Stability { scenarios, beta_range } => {
            overrides.beta_range = beta_range.map(|r| pair("--beta-range", &r)).transpose()?;
            run_many(&scenarios, &overrides, Some(&[Analysis::Stability]), &g.out_dir)
        }
        Command::Df {
            kind,
            alpha,
            gain,
            pole,
            omega_range,
            points,
            numerical,
            amplitude,
        } => {
            let spec = ElementSpec {
                kind,
                gain,
                pole,
                order: alpha,
                resets: true,
            };
            let element = spec.build()?;
            let range = pair("--omega-range", &omega_range)?;
            if !(range[0] > 0.0 && range[0] < range[1]) || points < 2 {
                return Err(CliError::Validation("omega range must satisfy 0 < lo < hi with at least 2 points".into()));
            }
            if !(amplitude > 0.0) || numerical.iter().any(|&w| !(w > 0.0)) {
                return Err(CliError::Validation("amplitude and frequencies must be positive".into()));
            }
            let (csv, num) = describing_tables(
                &element,
                gain,
                range,
                points,
                &numerical,
                amplitude,
                g.memory_mode.unwrap_or_default(),
            )?;
            let label = element.kind.label().to_lowercase();
            write_file(&g.out_dir, &format!("{label}_df.csv"), &csv)?;
            if let Some(num) = num {
                write_file(&g.out_dir, &format!("{label}_df_numerical.csv"), &num)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ReproducePaper { subset } => {
            let summary = reproduce(&subset)?;
            print!("{}", summary.table());
            let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
            write_file(&g.out_dir, "reproduce_summary.json", &(json + "\n"))?;
            Ok(if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Scenarios { name: None } => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenarios { name: Some(name) } => {
            let text = fracreset_cli::scenario::bundled(&name)
                .ok_or_else(|| CliError::Validation(format!("no bundled scenario named {name:?}")))?;
            print!("{text}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn pair(flag: &str, v: &[f64]) -> Result<[f64; 2], CliError> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(CliError::Validation(format!("{flag} takes exactly two comma-separated values"))),
    }
}

fn write_file(dir: &Path, file: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn run_many(
    sources: &[String],
    overrides: &Overrides,
    only: Option<&[Analysis]>,
    out_dir: &Path,
) -> Result<ExitCode, CliError> {
    let scenarios = sources
        .iter()
        .map(|s| {
            let mut sc = load_scenario(s)?;
            overrides.apply(&mut sc)?;
            Ok(sc)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let outcomes = scenarios
        .par_iter()
        .map(|sc| run_scenario(sc, only, out_dir))
        .collect::<Result<Vec<Outcome>, CliError>>()?;
    for o in &outcomes {
        println!("{}", o.summary());
    }
    Ok(ExitCode::SUCCESS)
}
