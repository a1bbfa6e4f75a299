//! Waveform optimization.
//!
//! The objective is the CZ gate error plus quadratic penalties for negative
//! Rabi amplitudes and for amplitudes above an optional cap. The search is a
//! bounded Nelder–Mead simplex that rebuilds its simplex around the best
//! point whenever it stalls, with optional seeded multi-start.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{self, WaveformSpec, WaveformTemplate, PHYSICALITY_GRID};
use crate::levels::{BlockadeModel, DopplerShift, DriveKind, DriveScheme, Physicality};
use crate::metrics::{evaluate_gate, GateSetup};
use crate::propagate::{PropagationOptions, PulseSchedule};
use crate::{Error, Result};

/// Objective assigned to points whose propagation fails.
pub const FAILURE_OBJECTIVE: f64 = 1e12;

pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e6;

/// A coordinate the optimizer may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameter {
    /// Amplitude coefficient, 0-based index into the template.
    Amplitude(usize),
    DetuningConstant,
    /// Coefficient of `cos(2mπx)`, 1-based `m`.
    DetuningHarmonic(usize),
    /// Duration of one pulse, µs.
    PulseDuration,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeParameter {
    pub parameter: Parameter,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParameter {
    pub fn new(parameter: Parameter, lower: f64, upper: f64) -> Self {
        Self { parameter, lower, upper }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalties {
    pub negativity_weight: f64,
    pub cap_weight: f64,
    /// Amplitude cap Ω_max/2π in MHz.
    pub cap_mhz: Option<f64>,
}

impl Default for Penalties {
    fn default() -> Self {
        Self { negativity_weight: DEFAULT_PENALTY_WEIGHT, cap_weight: DEFAULT_PENALTY_WEIGHT, cap_mhz: None }
    }
}

impl Penalties {
    pub const NONE: Penalties = Penalties { negativity_weight: 0.0, cap_weight: 0.0, cap_mhz: None };
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationProblem {
    pub drive: DriveKind,
    /// Seed waveform; free parameters start from its values.
    pub template: WaveformTemplate,
    pub blockade: BlockadeModel,
    pub schedule: PulseSchedule,
    pub propagation: PropagationOptions,
    pub free: Vec<FreeParameter>,
    pub penalties: Penalties,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub seed: u64,
    /// Number of independent starts; starts after the first are seeded perturbations.
    pub starts: usize,
    /// Relative size of the perturbation applied to extra starts.
    pub start_spread: f64,
    /// Stop as soon as the objective drops below this value.
    pub target: Option<f64>,
}

impl OptimizationProblem {
    pub fn new(drive: DriveKind, template: WaveformTemplate, blockade: BlockadeModel, schedule: PulseSchedule) -> Self {
        Self {
            drive,
            template,
            blockade,
            schedule,
            propagation: PropagationOptions::default(),
            free: Vec::new(),
            penalties: Penalties::default(),
            budget: 1000,
            seed: 0,
            starts: 1,
            start_spread: 0.1,
            target: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.free {
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower <= f.upper) {
                return Err(Error::InvalidArgument("parameter bounds must be finite and ordered"));
            }
            match f.parameter {
                Parameter::Amplitude(i) if i >= self.template.amplitude.len() => {
                    return Err(Error::InvalidArgument("amplitude parameter index out of range"));
                }
                Parameter::DetuningHarmonic(m) if m == 0 || m > self.template.detuning.coeffs.len() => {
                    return Err(Error::InvalidArgument("detuning harmonic index out of range"));
                }
                Parameter::PulseDuration if f.lower <= 0.0 => {
                    return Err(Error::InvalidArgument("pulse duration bounds must be positive"));
                }
                _ => {}
            }
        }
        if self.budget == 0 {
            return Err(Error::InvalidArgument("budget must be at least one evaluation"));
        }
        let p = &self.penalties;
        if !(p.negativity_weight >= 0.0 && p.cap_weight >= 0.0) {
            return Err(Error::InvalidArgument("penalty weights must be non-negative"));
        }
        self.template.waveform()?;
        self.schedule.validate()
    }

    /// Current values of the free parameters.
    pub fn initial_point(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|f| match f.parameter {
                Parameter::Amplitude(i) => self.template.amplitude[i],
                Parameter::DetuningConstant => self.template.detuning.constant,
                Parameter::DetuningHarmonic(m) => self.template.detuning.coeffs[m - 1],
                Parameter::PulseDuration => self.schedule.duration_us,
            })
            .collect()
    }

    /// Writes `params` into a copy of the template and schedule.
    pub fn apply(&self, params: &[f64]) -> Result<(WaveformTemplate, PulseSchedule)> {
        if params.len() != self.free.len() {
            return Err(Error::DimensionMismatch { expected: self.free.len(), found: params.len() });
        }
        let mut template = self.template.clone();
        let mut schedule = self.schedule;
        for (f, &v) in self.free.iter().zip(params) {
            match f.parameter {
                Parameter::Amplitude(i) => template.amplitude[i] = v,
                Parameter::DetuningConstant => template.detuning.constant = v,
                Parameter::DetuningHarmonic(m) => template.detuning.coeffs[m - 1] = v,
                Parameter::PulseDuration => schedule.duration_us = v,
            }
        }
        Ok((template, schedule))
    }

    /// Gate setup at `params`. Negative amplitudes are simulated and left to the penalty.
    pub fn setup(&self, params: &[f64]) -> Result<GateSetup> {
        let (template, schedule) = self.apply(params)?;
        let drive = DriveScheme { kind: self.drive, waveform: template.waveform()? };
        Ok(GateSetup {
            drive,
            blockade: self.blockade,
            schedule,
            propagation: self.propagation,
            physicality: Physicality::Ignore,
        })
    }

    fn clamp(&self, params: &mut [f64]) {
        for (v, f) in params.iter_mut().zip(&self.free) {
            *v = f.clamp(*v);
        }
    }
}

/// `(∫ max(0, -Ω)² dx, ∫ max(0, Ω - Ω_max)² dx)` by the trapezoid rule on the physicality grid.
pub fn penalty_integrals(waveform: &WaveformSpec, cap_mhz: Option<f64>) -> (f64, f64) {
    let h = 1.0 / (PHYSICALITY_GRID - 1) as f64;
    let mut neg = 0.0;
    let mut cap = 0.0;
    for (i, x) in basis::grid(PHYSICALITY_GRID).enumerate() {
        let w = if i == 0 || i == PHYSICALITY_GRID - 1 { 0.5 * h } else { h };
        let omega = waveform.amplitude.eval(x);
        let below = (-omega).max(0.0);
        neg += w * below * below;
        if let Some(limit) = cap_mhz {
            let above = (omega - limit).max(0.0);
            cap += w * above * above;
        }
    }
    (neg, cap)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PenaltyBreakdown {
    /// Weighted negativity penalty.
    pub negativity: f64,
    /// Weighted cap penalty.
    pub cap: f64,
}

impl PenaltyBreakdown {
    pub fn total(&self) -> f64 {
        self.negativity + self.cap
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// `None` when propagation failed.
    pub gate_error: Option<f64>,
    pub penalties: PenaltyBreakdown,
}

/// Objective with its parts. Never fails: an unusable point gets [`FAILURE_OBJECTIVE`].
pub fn evaluate_objective(params: &[f64], problem: &OptimizationProblem) -> Evaluation {
    let failed = Evaluation { objective: FAILURE_OBJECTIVE, gate_error: None, penalties: PenaltyBreakdown::default() };
    let Ok(setup) = problem.setup(params) else {
        return failed;
    };
    let (neg, cap) = penalty_integrals(&setup.drive.waveform, problem.penalties.cap_mhz);
    let penalties = PenaltyBreakdown {
        negativity: problem.penalties.negativity_weight * neg,
        cap: problem.penalties.cap_weight * cap,
    };
    match evaluate_gate(&setup, DopplerShift::NONE) {
        Ok(result) if result.gate_error.is_finite() => Evaluation {
            objective: result.gate_error + penalties.total(),
            gate_error: Some(result.gate_error),
            penalties,
        },
        _ => Evaluation { penalties, ..failed },
    }
}

pub fn objective(params: &[f64], problem: &OptimizationProblem) -> f64 {
    evaluate_objective(params, problem).objective
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    BudgetExhausted,
    Converged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationReport {
    pub best_params: Vec<f64>,
    pub best_objective: f64,
    pub best_gate_error: Option<f64>,
    pub penalties: PenaltyBreakdown,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    /// Best objective so far after each evaluation.
    pub trace: Vec<f64>,
    /// Whether the best point carries no penalty.
    pub feasible: bool,
    pub best_start: usize,
    pub stop: StopReason,
}

/// Multiplies each entry by `1 + U(-fraction, fraction)` drawn from a seeded stream.
pub fn perturb(params: &[f64], fraction: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    params.iter().map(|&v| v * (1.0 + rng.random_range(-fraction..=fraction))).collect()
}

struct Tracker<'a> {
    problem: &'a OptimizationProblem,
    budget: usize,
    evaluations: usize,
    failed: usize,
    trace: Vec<f64>,
    best: Option<(Vec<f64>, Evaluation)>,
}

impl Tracker<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn reached_target(&self) -> bool {
        match (self.problem.target, &self.best) {
            (Some(t), Some((_, e))) => e.objective < t,
            _ => false,
        }
    }

    fn done(&self) -> bool {
        self.exhausted() || self.reached_target()
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let e = evaluate_objective(x, self.problem);
        self.evaluations += 1;
        if e.gate_error.is_none() {
            self.failed += 1;
        }
        let improved = self.best.as_ref().is_none_or(|(_, b)| e.objective < b.objective);
        if improved {
            self.best = Some((x.to_vec(), e));
        }
        self.trace.push(self.best.as_ref().map_or(e.objective, |(_, b)| b.objective));
        e.objective
    }
}

/// Runs the search. Fails only on an invalid problem.
///
/// With a budget of one the seed is evaluated once and returned.
pub fn optimize(problem: &OptimizationProblem) -> Result<OptimizationReport> {
    problem.validate()?;
    let mut seed_point = problem.initial_point();
    problem.clamp(&mut seed_point);
    let starts = problem.starts.max(1);
    let budget = problem.budget;

    let mut runs = Vec::with_capacity(starts);
    let mut spent = 0;
    let mut total_failed = 0;
    let mut trace = Vec::new();
    let mut stop = StopReason::BudgetExhausted;
    for s in 0..starts {
        let share = (budget - spent) / (starts - s);
        if share == 0 {
            break;
        }
        let mut x0 = if s == 0 {
            seed_point.clone()
        } else {
            perturb(&seed_point, problem.start_spread, problem.seed.wrapping_add(s as u64))
        };
        problem.clamp(&mut x0);
        let mut tracker = Tracker { problem, budget: share, evaluations: 0, failed: 0, trace: Vec::new(), best: None };
        let run_stop = nelder_mead(&mut tracker, x0);
        spent += tracker.evaluations;
        total_failed += tracker.failed;
        let offset = trace.last().copied().unwrap_or(f64::INFINITY);
        trace.extend(tracker.trace.iter().map(|&v| v.min(offset)));
        let (params, eval) = tracker.best.expect("every start evaluates at least once");
        runs.push((params, eval));
        if run_stop == StopReason::TargetReached {
            stop = StopReason::TargetReached;
            break;
        }
        if run_stop == StopReason::Converged && s + 1 == starts {
            stop = StopReason::Converged;
        }
    }

    let (best_start, (best_params, best)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.1.objective.total_cmp(&b.1.objective).then(i.cmp(j)))
        .expect("at least one start runs");
    Ok(OptimizationReport {
        best_params,
        best_objective: best.objective,
        best_gate_error: best.gate_error,
        penalties: best.penalties,
        evaluations: spent,
        failed_evaluations: total_failed,
        trace,
        feasible: best.gate_error.is_some() && best.penalties.total() == 0.0,
        best_start,
        stop,
    })
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const INITIAL_STEP: f64 = 0.05;
const STALL_RTOL: f64 = 1e-10;

fn initial_steps(problem: &OptimizationProblem, x: &[f64], scale: f64) -> Vec<f64> {
    problem
        .free
        .iter()
        .zip(x)
        .map(|(f, &v)| {
            let width = f.upper - f.lower;
            let step = scale * v.abs().max(0.1 * width);
            if step > 0.0 {
                step
            } else {
                scale * 1e-3
            }
        })
        .collect()
}

fn nelder_mead(tracker: &mut Tracker<'_>, x0: Vec<f64>) -> StopReason {
    let problem = tracker.problem;
    let n = x0.len();
    let f0 = tracker.eval(&x0);
    if n == 0 {
        return if tracker.reached_target() { StopReason::TargetReached } else { StopReason::Converged };
    }
    let mut scale = INITIAL_STEP;
    let mut center = (x0, f0);

    while !tracker.done() {
        // (Re)build the simplex around the best point.
        let steps = initial_steps(problem, &center.0, scale);
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![center.clone()];
        for (i, &step) in steps.iter().enumerate() {
            if tracker.done() {
                break;
            }
            let mut x = center.0.clone();
            let f = problem.free[i];
            x[i] = if x[i] + step <= f.upper { x[i] + step } else { x[i] - step };
            problem.clamp(&mut x);
            let fx = tracker.eval(&x);
            simplex.push((x, fx));
        }
        if simplex.len() < n + 1 {
            break;
        }

        let best_before = center.1;
        loop {
            if tracker.done() {
                break;
            }
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            let spread = hi - lo;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= STALL_RTOL * lo.abs() + 1e-300 || size == 0.0 {
                break;
            }

            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
            let along = |t: f64| -> Vec<f64> {
                let mut x: Vec<f64> = (0..n).map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j])).collect();
                problem.clamp(&mut x);
                x
            };

            let xr = along(-REFLECT);
            let fr = tracker.eval(&xr);
            if fr < simplex[0].1 {
                if tracker.done() {
                    simplex[n] = (xr, fr);
                    break;
                }
                let xe = along(-EXPAND);
                let fe = tracker.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                if tracker.done() {
                    break;
                }
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-CONTRACT);
                    let fc = tracker.eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(CONTRACT);
                    let fc = tracker.eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        if tracker.done() {
                            break;
                        }
                        let mut x: Vec<f64> = vertex.0.iter().zip(&best).map(|(v, b)| b + SHRINK * (v - b)).collect();
                        problem.clamp(&mut x);
                        let fx = tracker.eval(&x);
                        *vertex = (x, fx);
                    }
                }
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < center.1 {
            center = simplex.swap_remove(0);
        }
        // A restart that found nothing better gets a finer simplex next time.
        if center.1 >= best_before {
            scale *= 0.1;
            if scale < 1e-9 {
                return StopReason::Converged;
            }
        } else {
            scale = INITIAL_STEP.min(scale * 2.0);
        }
    }
    if tracker.reached_target() {
        StopReason::TargetReached
    } else if tracker.exhausted() {
        StopReason::BudgetExhausted
    } else {
        StopReason::Converged
    }
}

/// Gate error as a function of the pulse duration.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseTimeScan {
    /// `(T_p µs, gate error)` on the coarse grid; failures are `+∞`.
    pub samples: Vec<(f64, f64)>,
    pub best_duration_us: f64,
    pub best_error: f64,
}

/// Resolution of the local refinement, µs.
pub const SCAN_RESOLUTION_US: f64 = 1e-4;

/// `steps` uniformly spaced durations over `[lo, hi]`.
pub fn scan_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || steps < 2 {
        return Err(Error::InvalidArgument("scan needs 0 < lo < hi and at least two steps"));
    }
    Ok((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())
}

/// Gate error at pulse duration `duration_us`, `+∞` if the evaluation fails.
pub fn error_at_duration(setup: &GateSetup, duration_us: f64) -> f64 {
    let mut s = setup.clone();
    s.schedule = s.schedule.with_duration(duration_us);
    evaluate_gate(&s, DopplerShift::NONE).map_or(f64::INFINITY, |r| r.gate_error)
}

/// Refines the best coarse sample by golden-section search over its neighbouring interval.
pub fn refine_pulse_time(setup: &GateSetup, samples: Vec<(f64, f64)>) -> Result<PulseTimeScan> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("refinement needs at least two samples"));
    }
    let (i, &(t_best, e_best)) =
        samples.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).expect("non-empty samples");
    let mut a = samples[i.saturating_sub(1)].0;
    let mut b = samples[(i + 1).min(samples.len() - 1)].0;
    let mut best = (t_best, e_best);

    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = error_at_duration(setup, c);
    let mut fd = error_at_duration(setup, d);
    while b - a > SCAN_RESOLUTION_US {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = error_at_duration(setup, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = error_at_duration(setup, d);
        }
        for (t, e) in [(c, fc), (d, fd)] {
            if e < best.1 {
                best = (t, e);
            }
        }
    }
    Ok(PulseTimeScan { samples, best_duration_us: best.0, best_error: best.1 })
}

/// Scans the pulse duration over `[lo, hi]` with the normalized waveform held fixed.
pub fn scan_pulse_time(setup: &GateSetup, range_us: (f64, f64), steps: usize) -> Result<PulseTimeScan> {
    let samples =
        scan_grid(range_us.0, range_us.1, steps)?.into_iter().map(|t| (t, error_at_duration(setup, t))).collect();
    refine_pulse_time(setup, samples)
}
