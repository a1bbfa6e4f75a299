use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ormd::run::{self, EvaluateOptions, OptimizeOverrides, Status};
use ormd::ScenarioConfig;
use ormd_core::basis::{AdjustedBasisTable, BasisFamily};

#[derive(Parser)]
#[command(name = "ormd", version, about = "Design and check Rydberg CZ pulses driven by modulated waveforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory. Defaults to the scenario's `output_dir`, then `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate both manifolds and report the gate error.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Scan the pulse duration even if a resolved value is stored.
        #[arg(long)]
        rescan: bool,
    },
    /// Optimize the free waveform parameters of a scenario.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep a Doppler shift and report phase and leakage sensitivity.
    Doppler {
        #[command(flatten)]
        common: Common,
        /// Comma-separated shifts in MHz, overriding the scenario grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        rescan: bool,
    },
    /// Scan the pulse duration for the lowest gate error.
    ScanTp {
        #[command(flatten)]
        common: Common,
        /// Lower and upper duration in µs.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        range: Option<Vec<f64>>,
        #[arg(long)]
        steps: Option<usize>,
        /// Store the best duration back into the scenario file.
        #[arg(long)]
        freeze: bool,
    },
    /// Export the u and v basis tables as CSV.
    BasisTables {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Recompute the tables by quadrature instead of using the built-in values.
        #[arg(long)]
        projected: bool,
    },
    /// Evaluate every bundled scenario and tabulate pass/fail.
    ReproduceAll {
        /// Directory holding the scenario files.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/reproduce-all")]
        out: PathBuf,
        #[arg(long, default_value_t = run::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        rescan: bool,
    },
}

fn load(common: &Common) -> anyhow::Result<(ScenarioConfig, PathBuf)> {
    let config = ScenarioConfig::load(&common.config)?;
    let out =
        common.out.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| Path::new("out").join(&config.name));
    Ok((config, out))
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Evaluate { common, rescan } => {
            let (config, out) = load(&common)?;
            let s = run::run_evaluate(&config, &out, EvaluateOptions { rescan })?;
            println!("{}: T_p = {:.6} us, gate error = {:.3e}", s.scenario, s.duration_us, s.gate_error);
            Ok(true)
        }
        Command::Optimize { common, budget, seed } => {
            let (config, out) = load(&common)?;
            let s = run::run_optimize(&config, &out, OptimizeOverrides { budget, seed })?;
            println!(
                "{}: objective = {:.3e} after {} evaluations ({})",
                s.scenario, s.best_objective, s.evaluations, s.stop
            );
            Ok(s.feasible && (s.target.is_none() || s.target_reached))
        }
        Command::Doppler { common, grid, rescan } => {
            let (config, out) = load(&common)?;
            let s = run::run_doppler(&config, &out, grid.as_deref(), rescan)?;
            println!(
                "{}: dphi/ddelta = {:.3e} rad/MHz, d2phi/ddelta2 = {:.3e} rad/MHz^2",
                s.scenario, s.phase_slope_rad_per_mhz, s.phase_curvature_rad_per_mhz2
            );
            Ok(true)
        }
        Command::ScanTp { common, range, steps, freeze } => {
            let (config, out) = load(&common)?;
            let range = range.map(|r| (r[0], r[1]));
            let (s, _) = run::run_scan(&config, &out, range, steps)?;
            println!("{}: best T_p = {:.6} us, gate error = {:.3e}", s.scenario, s.best_duration_us, s.best_error);
            if freeze {
                let mut frozen = config.clone();
                frozen.freeze_duration(s.best_duration_us)?;
                frozen.save(&common.config)?;
            }
            Ok(true)
        }
        Command::BasisTables { out, projected } => {
            for family in [BasisFamily::U, BasisFamily::V] {
                let table = if projected {
                    AdjustedBasisTable::projected(family)?
                } else {
                    AdjustedBasisTable::builtin(family)
                };
                run::write_basis_tables(&out, family, &table)?;
            }
            Ok(true)
        }
        Command::ReproduceAll { config, out, threshold, rescan } => {
            let dir = config.unwrap_or_else(run::bundled_scenario_dir);
            let report = run::run_reproduce_all(&dir, &out, threshold, EvaluateOptions { rescan })
                .with_context(|| format!("reproducing scenarios from {}", dir.display()))?;
            for s in &report.scenarios {
                let error = s.gate_error.map(|e| format!("{e:.3e}")).unwrap_or_else(|| "-".into());
                println!("{:<12} {:<8} {}", s.scenario, format!("{:?}", s.status).to_lowercase(), error);
                if let Some(m) = &s.message {
                    println!("    {m}");
                }
            }
            Ok(report.all_passed && report.count(Status::Missing) == 0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
