//! The command implementations behind the CLI verbs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ormd_core::basis::{AdjustedBasisTable, BasisFamily};
use ormd_core::levels::{DopplerShift, Manifold};
use ormd_core::metrics::{evaluate_gate, fit_power_law, DopplerPoint, DopplerSweep, GateResult, GateSetup};
use ormd_core::optimize::{error_at_duration, optimize, refine_pulse_time, scan_grid, PulseTimeScan, StopReason};
use ormd_core::propagate::PropagationOptions;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{self, ensure_dir, write_json};
use crate::config::{DurationSource, ScenarioConfig, ScheduleKind};
use crate::error::{Error, Result};

/// Scenarios reproduced by `reproduce-all`, in report order.
pub const BUNDLED_SCENARIOS: [&str; 11] =
    ["fig1a", "fig1b", "fig2a", "fig2b", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig6-single", "fig6-dual"];

pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// Trajectory samples per pulse written by `evaluate`.
pub const TRAJECTORY_SAMPLES: usize = 201;

pub fn bundled_scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Coarse scan followed by golden-section refinement. Grid points run in parallel.
pub fn scan_durations(setup: &GateSetup, range_us: (f64, f64), steps: usize) -> Result<PulseTimeScan> {
    let grid = scan_grid(range_us.0, range_us.1, steps)?;
    let samples: Vec<(f64, f64)> = grid.par_iter().map(|&t| (t, error_at_duration(setup, t))).collect();
    Ok(refine_pulse_time(setup, samples)?)
}

/// Evaluates every shift of `grid` in parallel, keeping grid order.
pub fn sweep_doppler(setup: &GateSetup, grid: &[f64]) -> Result<DopplerSweep> {
    ormd_core::metrics::validate_doppler_grid(grid)?;
    let points: Vec<DopplerPoint> = grid
        .par_iter()
        .map(|&shift| {
            evaluate_gate(setup, DopplerShift::new(shift)).map(|result| DopplerPoint { shift_mhz: shift, result })
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(DopplerSweep::from_points(points)?)
}

/// Writes `<out>/basis_<family>.csv` and returns its path.
pub fn write_basis_tables(out: &Path, family: BasisFamily, table: &AdjustedBasisTable) -> Result<PathBuf> {
    ensure_dir(out)?;
    let path = out.join(format!("basis_{}.csv", family.name()));
    artifacts::write_basis_table(&path, table)?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSummary {
    pub scenario: String,
    pub range_us: [f64; 2],
    pub steps: usize,
    pub best_duration_us: f64,
    pub best_error: f64,
}

/// Duration to evaluate at: fixed, frozen, or scanned when `rescan` is set or nothing is frozen.
pub fn resolve_duration(config: &ScenarioConfig, rescan: bool) -> Result<(f64, DurationSource, Option<PulseTimeScan>)> {
    match (config.known_duration(), config.scan_range()) {
        (Some((t, DurationSource::Fixed)), _) => Ok((t, DurationSource::Fixed, None)),
        (Some((t, source)), _) if !rescan => Ok((t, source, None)),
        (Some((t, source)), None) => Ok((t, source, None)),
        (_, Some((range, steps))) => {
            let setup = config.setup(range.0)?;
            let scan = scan_durations(&setup, range, steps)?;
            Ok((scan.best_duration_us, DurationSource::Scanned, Some(scan)))
        }
        (None, None) => Err(Error::Field { field: "schedule".into(), message: "no duration and no scan".into() }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluateSummary {
    pub scenario: String,
    pub schedule: &'static str,
    pub duration_us: f64,
    pub duration_source: DurationSource,
    pub gate_error: f64,
    pub conditional_phase_rad: Option<f64>,
    pub phase01_rad: f64,
    pub phase11_rad: f64,
    pub leakage01: f64,
    pub leakage11: f64,
    pub a01: [f64; 2],
    pub a11: [f64; 2],
    pub peak_amplitude_mhz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude_cap_mhz: Option<f64>,
}

fn schedule_name(config: &ScenarioConfig) -> &'static str {
    match config.schedule.kind {
        ScheduleKind::Single => "single",
        ScheduleKind::Dual => "dual",
    }
}

impl EvaluateSummary {
    fn new(config: &ScenarioConfig, duration_us: f64, source: DurationSource, result: &GateResult) -> Result<Self> {
        Ok(Self {
            scenario: config.name.clone(),
            schedule: schedule_name(config),
            duration_us,
            duration_source: source,
            gate_error: result.gate_error,
            conditional_phase_rad: result.conditional_phase,
            phase01_rad: result.phase01,
            phase11_rad: result.phase11,
            leakage01: result.leakage01,
            leakage11: result.leakage11,
            a01: [result.a01.re, result.a01.im],
            a11: [result.a11.re, result.a11.im],
            peak_amplitude_mhz: config.template().waveform()?.peak_amplitude(),
            amplitude_cap_mhz: config.amplitude.cap_mhz,
        })
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvaluateOptions {
    /// Scan the duration even when a resolved value is frozen in the file.
    pub rescan: bool,
}

/// Writes `waveform.csv`, `trajectory_single.csv`, `trajectory_double.csv` and
/// `summary.json` (plus `scan.csv` when the duration was scanned).
pub fn run_evaluate(config: &ScenarioConfig, out: &Path, options: EvaluateOptions) -> Result<EvaluateSummary> {
    ensure_dir(out)?;
    let (duration, source, scan) = resolve_duration(config, options.rescan)?;
    if let Some(scan) = &scan {
        artifacts::write_scan(&out.join("scan.csv"), &scan.samples)?;
    }
    let setup = config.setup(duration)?;
    artifacts::write_waveform(&out.join("waveform.csv"), &setup.drive.waveform)?;
    let result = evaluate_gate(&setup, DopplerShift::NONE)?;

    let mut recording = setup.clone();
    recording.propagation = PropagationOptions::default().recording(TRAJECTORY_SAMPLES);
    for (manifold, file) in
        [(Manifold::SingleExcitation, "trajectory_single.csv"), (Manifold::DoubleExcitation, "trajectory_double.csv")]
    {
        let system = recording.system(manifold, DopplerShift::NONE)?;
        let run = recording.propagate_manifold(manifold, DopplerShift::NONE)?;
        let trajectory = run.trajectory.expect("recording requested");
        artifacts::write_trajectory(&out.join(file), system.states(), &trajectory)?;
    }

    let summary = EvaluateSummary::new(config, duration, source, &result)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DopplerSummary {
    pub scenario: String,
    pub schedule: &'static str,
    pub duration_us: f64,
    pub grid_mhz: Vec<f64>,
    pub gate_error_at_zero: f64,
    pub phase_slope_rad_per_mhz: f64,
    pub phase_curvature_rad_per_mhz2: f64,
    pub stencil_mhz: f64,
    /// Leading exponent of `|φc(δ_D) - φc(0)|`.
    pub phase_exponent: Option<f64>,
    /// Leading exponent of the leakage excess over zero shift.
    pub leakage_exponent: Option<f64>,
}

/// Writes `doppler.csv` and `doppler.json`.
pub fn run_doppler(config: &ScenarioConfig, out: &Path, grid: Option<&[f64]>, rescan: bool) -> Result<DopplerSummary> {
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => config
            .doppler
            .as_ref()
            .map(|d| d.grid_mhz.clone())
            .ok_or_else(|| Error::Field { field: "doppler.grid_mhz".into(), message: "missing Doppler grid".into() })?,
    };
    ensure_dir(out)?;
    let (duration, _, _) = resolve_duration(config, rescan)?;
    let setup = config.setup(duration)?;
    let sweep = sweep_doppler(&setup, &grid)?;
    artifacts::write_sweep(&out.join("doppler.csv"), &sweep)?;
    let summary = DopplerSummary {
        scenario: config.name.clone(),
        schedule: schedule_name(config),
        duration_us: duration,
        grid_mhz: grid,
        gate_error_at_zero: sweep.center().result.gate_error,
        phase_slope_rad_per_mhz: sweep.phase_slope,
        phase_curvature_rad_per_mhz2: sweep.phase_curvature,
        stencil_mhz: sweep.stencil_mhz,
        phase_exponent: fit_power_law(&sweep.phase_deviation()).map(|f| f.0),
        leakage_exponent: fit_power_law(&sweep.leakage_excess()).map(|f| f.0),
    };
    write_json(&out.join("doppler.json"), &summary)?;
    Ok(summary)
}

/// Writes `scan.csv` and `scan.json`. With `freeze`, the best duration is
/// returned in a copy of the scenario for writing back.
pub fn run_scan(
    config: &ScenarioConfig,
    out: &Path,
    range_us: Option<(f64, f64)>,
    steps: Option<usize>,
) -> Result<(ScanSummary, PulseTimeScan)> {
    let (default_range, default_steps) = config.scan_range().unwrap_or(((0.05, 2.0), 196));
    let range = range_us.unwrap_or(default_range);
    let steps = steps.unwrap_or(default_steps);
    ensure_dir(out)?;
    let setup = config.setup(range.0)?;
    let scan = scan_durations(&setup, range, steps)?;
    artifacts::write_scan(&out.join("scan.csv"), &scan.samples)?;
    let summary = ScanSummary {
        scenario: config.name.clone(),
        range_us: [range.0, range.1],
        steps,
        best_duration_us: scan.best_duration_us,
        best_error: scan.best_error,
    };
    write_json(&out.join("scan.json"), &summary)?;
    Ok((summary, scan))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParameterValue {
    pub parameter: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeSummary {
    pub scenario: String,
    pub best_params: Vec<ParameterValue>,
    pub best_objective: f64,
    pub best_gate_error: Option<f64>,
    pub negativity_penalty: f64,
    pub cap_penalty: f64,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub feasible: bool,
    pub target: Option<f64>,
    pub target_reached: bool,
    pub stop: &'static str,
    pub best_start: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OptimizeOverrides {
    pub budget: Option<usize>,
    pub seed: Option<u64>,
}

/// Writes `report.json`, `trace.csv` and `best.toml`, the scenario with the best parameters.
pub fn run_optimize(config: &ScenarioConfig, out: &Path, overrides: OptimizeOverrides) -> Result<OptimizeSummary> {
    let mut config = config.clone();
    if let Some(o) = config.optimize.as_mut() {
        if let Some(b) = overrides.budget {
            o.budget = b;
        }
        if let Some(s) = overrides.seed {
            o.seed = s;
        }
    }
    config.validate()?;
    let problem = config.optimization_problem()?;
    ensure_dir(out)?;
    let report = optimize(&problem)?;
    artifacts::write_trace(&out.join("trace.csv"), &report.trace)?;
    let best = config.with_parameters(&report.best_params)?;
    best.save(&out.join("best.toml"))?;

    let free = &config.optimize.as_ref().expect("problem built").free;
    let summary = OptimizeSummary {
        scenario: config.name.clone(),
        best_params: free
            .iter()
            .zip(&report.best_params)
            .map(|(f, &value)| ParameterValue { parameter: f.label(), value })
            .collect(),
        best_objective: report.best_objective,
        best_gate_error: report.best_gate_error,
        negativity_penalty: report.penalties.negativity,
        cap_penalty: report.penalties.cap,
        evaluations: report.evaluations,
        failed_evaluations: report.failed_evaluations,
        feasible: report.feasible,
        target: problem.target,
        target_reached: report.stop == StopReason::TargetReached,
        stop: match report.stop {
            StopReason::TargetReached => "target-reached",
            StopReason::BudgetExhausted => "budget-exhausted",
            StopReason::Converged => "converged",
        },
        best_start: report.best_start,
    };
    write_json(&out.join("report.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Missing,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub status: Status,
    pub duration_us: Option<f64>,
    pub duration_source: Option<DurationSource>,
    pub gate_error: Option<f64>,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproductionReport {
    pub threshold: f64,
    pub all_passed: bool,
    pub scenarios: Vec<ScenarioOutcome>,
}

impl ReproductionReport {
    pub fn count(&self, status: Status) -> usize {
        self.scenarios.iter().filter(|s| s.status == status).count()
    }
}

fn reproduce_one(name: &str, dir: &Path, out: &Path, threshold: f64, options: EvaluateOptions) -> ScenarioOutcome {
    let start = Instant::now();
    let path = dir.join(format!("{name}.toml"));
    let mut outcome = ScenarioOutcome {
        scenario: name.to_string(),
        status: Status::Missing,
        duration_us: None,
        duration_source: None,
        gate_error: None,
        runtime_s: 0.0,
        message: None,
    };
    if !path.is_file() {
        outcome.message = Some(format!("{} not found", path.display()));
        return outcome;
    }
    let result = ScenarioConfig::load(&path).and_then(|config| {
        if config.name != name {
            return Err(Error::Field {
                field: "name".into(),
                message: format!("file {name}.toml declares scenario {:?}", config.name),
            });
        }
        run_evaluate(&config, &out.join(name), options)
    });
    match result {
        Ok(summary) => {
            outcome.status = if summary.gate_error < threshold { Status::Pass } else { Status::Fail };
            outcome.duration_us = Some(summary.duration_us);
            outcome.duration_source = Some(summary.duration_source);
            outcome.gate_error = Some(summary.gate_error);
        }
        Err(e) => {
            outcome.status = Status::Error;
            outcome.message = Some(e.to_string());
        }
    }
    outcome.runtime_s = start.elapsed().as_secs_f64();
    outcome
}

/// Evaluates every bundled scenario found in `dir`, writing per-scenario
/// artifacts under `out/<name>/` and the table to `report.json` and `report.csv`.
pub fn run_reproduce_all(
    dir: &Path,
    out: &Path,
    threshold: f64,
    options: EvaluateOptions,
) -> Result<ReproductionReport> {
    ensure_dir(out)?;
    let scenarios: Vec<ScenarioOutcome> =
        BUNDLED_SCENARIOS.par_iter().map(|name| reproduce_one(name, dir, out, threshold, options)).collect();
    let report =
        ReproductionReport { threshold, all_passed: scenarios.iter().all(|s| s.status == Status::Pass), scenarios };
    write_json(&out.join("report.json"), &report)?;
    write_report_csv(&out.join("report.csv"), &report)?;
    Ok(report)
}

fn write_report_csv(path: &Path, report: &ReproductionReport) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["scenario", "status", "T_p_us", "gate_error", "threshold", "runtime_s"])?;
    for s in &report.scenarios {
        let status = match s.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Missing => "missing",
            Status::Error => "error",
        };
        w.write_record([
            s.scenario.clone(),
            status.to_string(),
            s.duration_us.map(artifacts::real).unwrap_or_default(),
            s.gate_error.map(artifacts::real).unwrap_or_default(),
            artifacts::real(report.threshold),
            format!("{:.3}", s.runtime_s),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
