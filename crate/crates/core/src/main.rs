use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use condensate::scenario::{
    checks_to_csv, load_scenario, load_sweep, load_vv, rows_to_csv, run_check_bound,
    run_estimate_vv, run_simulate, run_sweep, run_verify_algebra, ScenarioConfig,
    ToleranceProfile,
};

#[derive(Parser)]
#[command(
    name = "condensate",
    about = "Finite-mode bosonic mean-field simulator with condensation-bound checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Default,
    Strict,
}

impl From<ProfileArg> for ToleranceProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Default => ToleranceProfile::Default,
            ProfileArg::Strict => ToleranceProfile::Strict,
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Write CSV output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "default")]
    tolerance_profile: ProfileArg,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the scenario and emit one CSV row per (t, beta) sample.
    Simulate(CommonArgs),
    /// Like simulate, but exit nonzero if any bound margin falls below −slack.
    CheckBound(CommonArgs),
    /// Run the operator-identity suite; exit nonzero on any failing check.
    VerifyAlgebra(CommonArgs),
    /// Run every [[scenario]] in the config and merge rows deterministically.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads (scenarios still merge in a fixed order).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Estimate the interaction scale sup_x ||V(x-.)phi|| on a grid.
    EstimateVv(CommonArgs),
}

fn read_config(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_with_seed(path: &PathBuf, seed: Option<u64>) -> Result<ScenarioConfig, String> {
    let mut cfg = load_scenario(&read_config(path)?).map_err(|e| e.to_string())?;
    if seed.is_some() {
        cfg.seed = seed;
        cfg.validate().map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load_with_seed(&args.config, args.seed)?;
            let rows = run_simulate(&cfg).map_err(|e| e.to_string())?;
            emit(&args.out, &rows_to_csv(&rows))?;
            Ok(true)
        }
        Command::CheckBound(args) => {
            let cfg = load_with_seed(&args.config, args.seed)?;
            let (rows, ok) = run_check_bound(&cfg, args.tolerance_profile.into())
                .map_err(|e| e.to_string())?;
            emit(&args.out, &rows_to_csv(&rows))?;
            if !ok {
                eprintln!("check-bound: margin below tolerance in at least one row");
            }
            Ok(ok)
        }
        Command::VerifyAlgebra(args) => {
            let cfg = load_with_seed(&args.config, args.seed)?;
            let (rows, ok) = run_verify_algebra(&cfg).map_err(|e| e.to_string())?;
            emit(&args.out, &checks_to_csv(&rows))?;
            if !ok {
                eprintln!("verify-algebra: at least one residual exceeds its tolerance");
            }
            Ok(ok)
        }
        Command::Sweep { common, threads } => {
            let mut sweep = load_sweep(&read_config(&common.config)?).map_err(|e| e.to_string())?;
            if common.seed.is_some() {
                for s in sweep.scenario.iter_mut() {
                    s.seed = common.seed;
                    s.validate().map_err(|e| e.to_string())?;
                }
            }
            let (rows, failures) = run_sweep(&sweep.scenario, threads);
            emit(&common.out, &rows_to_csv(&rows))?;
            for (id, err) in &failures {
                eprintln!("sweep: scenario '{id}' failed: {err}");
            }
            Ok(failures.is_empty())
        }
        Command::EstimateVv(args) => {
            let cfg = load_vv(&read_config(&args.config)?).map_err(|e| e.to_string())?;
            let est = run_estimate_vv(&cfg).map_err(|e| e.to_string())?;
            let refinement = est
                .refinement_delta
                .map_or("n/a".to_string(), |d| format!("{d:.16e}"));
            let content = format!(
                "quantity,value\nvv,{:.16e}\nvv_squared,{:.16e}\nrefinement_delta,{refinement}\n",
                est.value, est.squared
            );
            emit(&args.out, &content)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
