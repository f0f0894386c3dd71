//! Scenario runner for path-length-distribution transport experiments.
//!
//! Exit codes: 0 success, 1 tolerance or computation failure, 2 config
//! error, 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nctrans_cli::config::{Scenario, ScenarioConfig};
use nctrans_cli::{scenarios, CliError};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ScenarioArg {
    /// Cross-section and density curves of the three laws
    Curves,
    /// Quadrature vs closed-form moments of the configured law
    Moments,
    /// Monte Carlo collision tally
    Mc,
    /// Deterministic integral-equation solve
    Integral,
    /// Three-route comparison with pass/fail tolerances
    Compare,
}

impl From<ScenarioArg> for Scenario {
    fn from(arg: ScenarioArg) -> Self {
        match arg {
            ScenarioArg::Curves => Scenario::Curves,
            ScenarioArg::Moments => Scenario::Moments,
            ScenarioArg::Mc => Scenario::Mc,
            ScenarioArg::Integral => Scenario::Integral,
            ScenarioArg::Compare => Scenario::Compare,
        }
    }
}

/// Transport with arbitrary path-length distributions: Monte Carlo,
/// integral-equation and closed-form diffusion routes over one config.
#[derive(Parser, Debug)]
#[command(name = "nctrans", version, about)]
struct Cli {
    /// Scenario to run
    #[arg(value_enum)]
    scenario: ScenarioArg,

    /// Config file (`key = value` lines); flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV artifacts
    #[arg(long)]
    out: Option<PathBuf>,

    /// Master seed for the Monte Carlo streams
    #[arg(long)]
    seed: Option<u64>,

    /// Number of Monte Carlo histories
    #[arg(long)]
    histories: Option<u64>,

    /// Mean-squared free path of the diffusion-matched law
    #[arg(long)]
    ms2: Option<f64>,

    /// Homogenized cross section of the medium
    #[arg(long)]
    sigmabar: Option<f64>,

    /// Scattering ratio in [0, 1)
    #[arg(long)]
    c: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let scenario: Scenario = cli.scenario.into();
    let mut config = ScenarioConfig::defaults(scenario);

    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        config.apply_file(&text)?;
    }

    // Flags win over the file; the positional scenario wins over both.
    config.scenario = scenario;
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(histories) = cli.histories {
        config.histories = histories;
    }
    if let Some(ms2) = cli.ms2 {
        config.ms2 = ms2;
    }
    if let Some(sigmabar) = cli.sigmabar {
        config.sigmabar = sigmabar;
    }
    if let Some(c) = cli.c {
        config.c = c;
    }
    config.validate()?;

    std::fs::create_dir_all(&config.out_dir).map_err(|source| CliError::Io {
        path: config.out_dir.clone(),
        source,
    })?;
    // Drop the resolved configuration next to the artifacts; feeding it
    // back through --config reproduces the run exactly.
    let config_path = config.out_dir.join("config.txt");
    std::fs::write(&config_path, config.serialize()).map_err(|source| CliError::Io {
        path: config_path,
        source,
    })?;

    match config.scenario {
        Scenario::Curves => scenarios::run_curves(&config)?,
        Scenario::Moments => scenarios::run_moments(&config)?,
        Scenario::Mc => scenarios::run_mc(&config)?,
        Scenario::Integral => scenarios::run_integral(&config)?,
        Scenario::Compare => {
            let outcome = scenarios::run_compare(&config)?;
            if !outcome.passed {
                return Err(CliError::Tolerance(format!(
                    "comparison checks failed; see {}",
                    config.out_dir.join("summary.txt").display()
                )));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
