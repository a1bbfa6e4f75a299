//! CZ gate assembly, fidelity and Doppler sensitivity.
//!
//! Propagating `|01⟩` and `|11⟩` through their manifolds gives the two return
//! amplitudes `a01` and `a11`. The gate is `diag(1, a01, a01, a11)`; leakage
//! out of the computational space shows up as `|a| < 1`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::levels::{BlockadeModel, DopplerShift, DriveScheme, LevelSystem, Manifold, Physicality};
use crate::linalg::{CMatrix, C64};
use crate::propagate::{propagate, Propagation, PropagationOptions, PulseSchedule};
use crate::{Error, Result};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    theta - TAU * libm::ceil((theta - PI) / TAU)
}

/// A diagonal two-qubit gate in the order `|00⟩, |01⟩, |10⟩, |11⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalGate(pub [C64; 4]);

impl DiagonalGate {
    pub fn to_matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(4);
        for (i, &d) in self.0.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }
}

/// `diag(1, a01, a01, a11)`. `|10⟩` behaves like `|01⟩` because both atoms see the same drive.
pub fn assemble_gate(a01: C64, a11: C64) -> DiagonalGate {
    DiagonalGate([C64::new(1.0, 0.0), a01, a01, a11])
}

/// Average gate fidelity `[Tr(M M†) + |Tr M|²] / (d(d+1))` with `M = target† · actual`.
pub fn average_fidelity(target: &CMatrix, actual: &CMatrix) -> f64 {
    let d = target.dim() as f64;
    let m = target.adjoint().matmul(actual);
    let mm = m.matmul(&m.adjoint()).trace().re;
    (mm + m.trace().norm_sqr()) / (d * (d + 1.0))
}

/// `1 - F` against the CZ target `diag(1, e^{iφ}, e^{iφ}, -e^{2iφ})`, `φ = arg(U₀₁)`.
///
/// The single-qubit phase `φ` is a free Z rotation on each qubit.
pub fn cz_gate_error(gate: &DiagonalGate) -> f64 {
    let phi = gate.0[1].arg();
    let target = [
        C64::new(1.0, 0.0),
        C64::from_polar(1.0, phi),
        C64::from_polar(1.0, phi),
        C64::from_polar(1.0, 2.0 * phi + PI),
    ];
    let m: [C64; 4] = core::array::from_fn(|k| target[k].conj() * gate.0[k]);
    let tr_mm: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let tr_m: C64 = m.iter().sum();
    1.0 - (tr_mm + tr_m.norm_sqr()) / 20.0
}

/// `arg(a11) - 2 arg(a01)` wrapped into `(-π, π]`; `π` for a perfect CZ.
pub fn conditional_phase(a01: C64, a11: C64) -> Result<f64> {
    if a01.norm() == 0.0 || a11.norm() == 0.0 {
        return Err(Error::UndefinedPhase);
    }
    Ok(wrap_phase(a11.arg() - 2.0 * a01.arg()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateResult {
    pub a01: C64,
    pub a11: C64,
    pub phase01: f64,
    pub phase11: f64,
    /// `1 - |a01|²`
    pub leakage01: f64,
    /// `1 - |a11|²`
    pub leakage11: f64,
    pub conditional_phase: Option<f64>,
    pub gate_error: f64,
}

impl GateResult {
    pub fn from_amplitudes(a01: C64, a11: C64) -> Self {
        Self {
            a01,
            a11,
            phase01: a01.arg(),
            phase11: a11.arg(),
            leakage01: 1.0 - a01.norm_sqr(),
            leakage11: 1.0 - a11.norm_sqr(),
            conditional_phase: conditional_phase(a01, a11).ok(),
            gate_error: cz_gate_error(&assemble_gate(a01, a11)),
        }
    }

    /// Total population left outside `|01⟩` and `|11⟩`.
    pub fn leakage(&self) -> f64 {
        self.leakage01 + self.leakage11
    }
}

/// Everything needed to turn a waveform into a gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSetup {
    pub drive: DriveScheme,
    pub blockade: BlockadeModel,
    pub schedule: PulseSchedule,
    pub propagation: PropagationOptions,
    pub physicality: Physicality,
}

impl GateSetup {
    pub fn new(drive: DriveScheme, blockade: BlockadeModel, schedule: PulseSchedule) -> Self {
        Self {
            drive,
            blockade,
            schedule,
            propagation: PropagationOptions::default(),
            physicality: Physicality::Enforce,
        }
    }

    pub fn system(&self, manifold: Manifold, doppler: DopplerShift) -> Result<LevelSystem> {
        LevelSystem::with_physicality(self.drive.clone(), manifold, self.blockade, doppler, self.physicality)
    }

    /// Propagates the computational state of `manifold` through the schedule.
    pub fn propagate_manifold(&self, manifold: Manifold, doppler: DopplerShift) -> Result<Propagation> {
        let system = self.system(manifold, doppler)?;
        let mut psi0 = vec![C64::new(0.0, 0.0); system.states().len()];
        psi0[0] = C64::new(1.0, 0.0);
        propagate(&system, &self.schedule, &psi0, &self.propagation)
    }
}

/// Propagates both manifolds and scores the resulting gate.
pub fn evaluate_gate(setup: &GateSetup, doppler: DopplerShift) -> Result<GateResult> {
    let single = setup.propagate_manifold(Manifold::SingleExcitation, doppler)?;
    let double = setup.propagate_manifold(Manifold::DoubleExcitation, doppler)?;
    Ok(GateResult::from_amplitudes(single.state[0], double.state[0]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DopplerPoint {
    pub shift_mhz: f64,
    pub result: GateResult,
}

/// Gate response over a symmetric grid of Doppler shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct DopplerSweep {
    pub points: Vec<DopplerPoint>,
    /// Central-difference `dφc/dδ_D` at zero shift, rad/MHz.
    pub phase_slope: f64,
    /// Central-difference `d²φc/dδ_D²` at zero shift, rad/MHz².
    pub phase_curvature: f64,
    /// Half-width of the stencil behind the derivative estimates, MHz.
    pub stencil_mhz: f64,
}

const GRID_MATCH: f64 = 1e-12;

/// Checks that `grid` contains zero and is symmetric about it.
pub fn validate_doppler_grid(grid: &[f64]) -> Result<()> {
    if !grid.iter().any(|&g| g.abs() <= GRID_MATCH) {
        return Err(Error::InvalidArgument("Doppler grid must contain 0"));
    }
    if !grid.iter().all(|&g| grid.iter().any(|&h| (g + h).abs() <= GRID_MATCH)) {
        return Err(Error::InvalidArgument("Doppler grid must be symmetric about 0"));
    }
    Ok(())
}

impl DopplerSweep {
    /// Builds the derivative estimates from already evaluated points.
    pub fn from_points(points: Vec<DopplerPoint>) -> Result<Self> {
        let grid: Vec<f64> = points.iter().map(|p| p.shift_mhz).collect();
        validate_doppler_grid(&grid)?;
        let find = |s: f64| points.iter().find(|p| (p.shift_mhz - s).abs() <= GRID_MATCH);
        let center = find(0.0).expect("validated grid has a zero point");
        let step = grid.iter().copied().filter(|&g| g > GRID_MATCH).fold(f64::INFINITY, f64::min);
        let (slope, curvature, stencil) = if step.is_finite() {
            let plus = find(step).expect("symmetric grid");
            let minus = find(-step).expect("symmetric grid");
            match (center.result.conditional_phase, plus.result.conditional_phase, minus.result.conditional_phase) {
                (Some(c), Some(p), Some(m)) => {
                    let dp = wrap_phase(p - c);
                    let dm = wrap_phase(m - c);
                    ((dp - dm) / (2.0 * step), (dp + dm) / (step * step), step)
                }
                _ => return Err(Error::UndefinedPhase),
            }
        } else {
            (0.0, 0.0, 0.0)
        };
        Ok(Self { points, phase_slope: slope, phase_curvature: curvature, stencil_mhz: stencil })
    }

    pub fn center(&self) -> &DopplerPoint {
        self.points.iter().find(|p| p.shift_mhz.abs() <= GRID_MATCH).expect("validated grid has a zero point")
    }

    /// `(δ_D, φc(δ_D) - φc(0))` with the difference wrapped into `(-π, π]`.
    pub fn phase_deviation(&self) -> Vec<(f64, f64)> {
        let c = self.center().result.conditional_phase.unwrap_or(0.0);
        self.points.iter().map(|p| (p.shift_mhz, wrap_phase(p.result.conditional_phase.unwrap_or(0.0) - c))).collect()
    }

    /// `(δ_D, L(δ_D) - L(0))` for the total leakage `L`.
    pub fn leakage_excess(&self) -> Vec<(f64, f64)> {
        let c = self.center().result.leakage();
        self.points.iter().map(|p| (p.shift_mhz, p.result.leakage() - c)).collect()
    }
}

/// Evaluates the gate at every shift of `grid` (which must be symmetric and contain 0).
pub fn doppler_sweep(setup: &GateSetup, grid: &[f64]) -> Result<DopplerSweep> {
    validate_doppler_grid(grid)?;
    let points = grid
        .iter()
        .map(|&shift| {
            evaluate_gate(setup, DopplerShift::new(shift))
                .map(|result| DopplerPoint { shift_mhz: shift, result })
                .map_err(|e| Error::SweepPoint { shift_mhz: shift, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    DopplerSweep::from_points(points)
}

/// Least-squares fit of `log|y| = p·log|x| + c`, returning `(p, e^c)`.
///
/// Points with `x = 0` or `y = 0` are skipped; `None` if fewer than two remain.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| x.abs() > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (libm::log(x.abs()), libm::log(y.abs())))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, libm::exp(my - slope * mx)))
}
