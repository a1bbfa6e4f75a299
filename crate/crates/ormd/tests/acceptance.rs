//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero if any fails.

use std::f64::consts::TAU;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ormd::config::{FreeConfig, FreeKind, OptimizeConfig, Scheme};
use ormd::run::{self, bundled_scenario_dir, OptimizeOverrides};
use ormd::ScenarioConfig;
use ormd_core::basis::{AdjustedBasisTable, BasisFamily};
use ormd_core::levels::{BlockadeModel, DopplerShift, Manifold};
use ormd_core::linalg::{CMatrix, C64};
use ormd_core::metrics::{assemble_gate, cz_gate_error, doppler_sweep, evaluate_gate, fit_power_law, GateSetup};
use ormd_core::optimize::perturb;
use ormd_core::propagate::{populations, propagate, Hamiltonian, PropagationOptions, PulseDirection, PulseSchedule};

const THRESHOLD: f64 = 1e-4;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&bundled_scenario_dir().join(format!("{name}.toml"))).expect("bundled scenario")
}

fn resolved_setup(name: &str) -> GateSetup {
    let config = scenario(name);
    let (t, _) = config.known_duration().expect("bundled duration");
    config.setup(t).unwrap()
}

fn ground(n: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[0] = C64::new(1.0, 0.0);
    v
}

fn basis_tables() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for family in [BasisFamily::U, BasisFamily::V] {
        let builtin = AdjustedBasisTable::builtin(family);
        let projected = AdjustedBasisTable::projected(family).map_err(|e| e.to_string())?;
        for (a, b) in builtin.rows.iter().zip(&projected.rows) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1e-4 && elapsed < Duration::from_secs(1),
        format!("max |table - projection| = {worst:.2e}, {elapsed:.2?}"),
    )
}

fn fig1_regression() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["fig1a", "fig1b"] {
        let config = scenario(name);
        let start = Instant::now();
        let error =
            evaluate_gate(&config.setup(0.25).unwrap(), DopplerShift::NONE).map_err(|e| e.to_string())?.gate_error;
        let elapsed = start.elapsed();
        ok &= config.schedule.duration_us == Some(0.25) && error < THRESHOLD && elapsed < Duration::from_secs(10);
        parts.push(format!("{name} {error:.2e} in {elapsed:.2?}"));
    }
    check(ok, parts.join(", "))
}

fn scanned_regression() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["fig2a", "fig2b", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig6-single", "fig6-dual"] {
        let config = scenario(name);
        let (range, steps) = config.scan_range().ok_or(format!("{name} has no scan"))?;
        if range != (0.05, 2.0) {
            return Err(format!("{name} scans {range:?}"));
        }
        let setup = config.setup(range.0).unwrap();
        if setup.propagation.rel_tol != 1e-10 {
            return Err(format!("{name} uses rel_tol {}", setup.propagation.rel_tol));
        }
        let start = Instant::now();
        let scan = run::scan_durations(&setup, range, steps).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        let two_photon = config.drive.scheme == Scheme::TwoPhoton;
        let in_time = !two_photon || elapsed < Duration::from_secs(300);
        ok &= scan.best_error < THRESHOLD && in_time;
        parts.push(format!("{name} T_p {:.5} us {:.2e} ({elapsed:.1?})", scan.best_duration_us, scan.best_error));
    }
    check(ok, parts.join(", "))
}

fn amplitude_caps() -> Outcome {
    let peak = |name: &str| scenario(name).template().waveform().unwrap().peak_amplitude();
    let mut ok = true;
    let mut parts = Vec::new();
    for (capped, free) in [("fig3a", "fig1a"), ("fig3b", "fig2a"), ("fig3c", "fig2b")] {
        let (p, q) = (peak(capped), peak(free));
        let cap = scenario(capped).amplitude.cap_mhz.unwrap_or(f64::INFINITY);
        let error = evaluate_gate(&resolved_setup(capped), DopplerShift::NONE).unwrap().gate_error;
        ok &= p < q && p <= cap && error < THRESHOLD;
        parts.push(format!("{capped} peak {p:.2} < {free} {q:.2} MHz, error {error:.2e}"));
    }
    check(ok, parts.join("; "))
}

fn doppler_cancellation() -> Outcome {
    let single = scenario("fig1b");
    let dual = scenario("fig4a");
    let grid = single.doppler.as_ref().unwrap().grid_mhz.clone();
    if dual.doppler.as_ref().unwrap().grid_mhz != grid || grid.iter().fold(0.0f64, |m, g| m.max(g.abs())) != 0.1 {
        return Err("fig1b and fig4a must share a ±0.1 MHz grid".into());
    }
    let s = doppler_sweep(&resolved_setup("fig1b"), &grid).map_err(|e| e.to_string())?;
    let d = doppler_sweep(&resolved_setup("fig4a"), &grid).map_err(|e| e.to_string())?;
    let ratio = d.phase_slope.abs() / s.phase_slope.abs();
    let leakage = fit_power_law(&d.leakage_excess()).map_or(f64::NAN, |f| f.0);
    let phase = fit_power_law(&s.phase_deviation()).map_or(f64::NAN, |f| f.0);
    check(
        ratio <= 1e-2 && (leakage - 2.0).abs() <= 0.2 && (phase - 1.0).abs() <= 0.2,
        format!("slope ratio {ratio:.2e}, dual leakage exponent {leakage:.3}, single phase exponent {phase:.3}"),
    )
}

struct ConstantDrive {
    rabi_mhz: f64,
}

impl Hamiltonian for ConstantDrive {
    fn dim(&self) -> usize {
        2
    }

    fn write(&self, _x: f64, _d: PulseDirection, out: &mut CMatrix) -> ormd_core::Result<()> {
        out.fill_zero();
        out.set_coupling(0, 1, C64::new(0.5 * TAU * self.rabi_mhz, 0.0));
        Ok(())
    }
}

/// Piecewise-constant copy of a Hamiltonian, sampled at slice midpoints.
struct Sliced<'a, H> {
    inner: &'a H,
    slices: usize,
}

impl<H: Hamiltonian> Sliced<'_, H> {
    fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.slices as f64
    }

    fn exponential_product(&self, schedule: &PulseSchedule) -> Vec<C64> {
        let n = self.dim();
        let dt = schedule.duration_us / self.slices as f64;
        let mut psi = DVector::from_vec(ground(n));
        let mut h = CMatrix::zeros(n);
        for &direction in schedule.pulses() {
            for k in 0..self.slices {
                self.inner.write(self.midpoint(k), direction, &mut h).unwrap();
                let generator = DMatrix::from_row_slice(n, n, h.as_slice()) * C64::new(0.0, -dt);
                psi = generator.exp() * psi;
            }
        }
        psi.iter().copied().collect()
    }
}

impl<H: Hamiltonian> Hamiltonian for Sliced<'_, H> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn write(&self, x: f64, d: PulseDirection, out: &mut CMatrix) -> ormd_core::Result<()> {
        let k = ((x * self.slices as f64) as usize).min(self.slices - 1);
        self.inner.write(self.midpoint(k), d, out)
    }

    fn breakpoints(&self) -> Vec<f64> {
        (1..self.slices).map(|k| k as f64 / self.slices as f64).collect()
    }
}

fn propagator_oracles() -> Outcome {
    let options = PropagationOptions::default();
    let drive = ConstantDrive { rabi_mhz: 1.0 };
    let pi = propagate(&drive, &PulseSchedule::single(0.5), &ground(2), &options).unwrap();
    let two_pi = propagate(&drive, &PulseSchedule::single(1.0), &ground(2), &options).unwrap();
    let rabi = (populations(&pi.state)[1] - 1.0).abs().max((two_pi.state[0] + 1.0).norm());

    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    for name in run::BUNDLED_SCENARIOS {
        let setup = resolved_setup(name);
        for manifold in [Manifold::SingleExcitation, Manifold::DoubleExcitation] {
            let system = setup.system(manifold, DopplerShift::NONE).unwrap();
            let sliced = Sliced { inner: &system, slices: 1000 };
            let adaptive = propagate(&sliced, &setup.schedule, &ground(system.dim()), &options).unwrap().state;
            let oracle = sliced.exponential_product(&setup.schedule);
            let diff = adaptive.iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if diff > worst {
                worst = diff;
                worst_name = name;
            }
        }
    }
    check(
        rabi <= 1e-8 && worst <= 1e-6,
        format!("Rabi deviation {rabi:.2e}, worst slice-product deviation {worst:.2e} ({worst_name})"),
    )
}

fn fidelity_units() -> Outcome {
    let one = C64::new(1.0, 0.0);
    let cz = cz_gate_error(&assemble_gate(one, -one));
    let identity = cz_gate_error(&assemble_gate(one, one));
    let mut drift: f64 = 0.0;
    for k in 0..64 {
        let theta = k as f64 * 0.1 - 3.2;
        let phase = C64::from_polar(1.0, theta);
        drift = drift.max(cz_gate_error(&assemble_gate(phase, -phase * phase)).abs());
    }
    check(
        cz.abs() <= 1e-12 && (identity - 0.6).abs() <= 1e-12 && drift <= 1e-12,
        format!("CZ {cz:.1e}, identity {identity}, Z-rotated CZ {drift:.1e}"),
    )
}

fn optimizer_capability(scratch: &Path) -> Outcome {
    let mut config = scenario("fig1b");
    let seed = perturb(&config.amplitude.coefficients_mhz, 0.1, 2024);
    let mut free: Vec<FreeConfig> = seed
        .iter()
        .enumerate()
        .map(|(i, &c)| FreeConfig {
            parameter: FreeKind::Amplitude,
            index: Some(i + 1),
            lower: c - 40.0,
            upper: c + 40.0,
        })
        .collect();
    let d = config.detuning.constant_mhz;
    free.push(FreeConfig { parameter: FreeKind::DetuningConstant, index: None, lower: d - 5.0, upper: d + 5.0 });
    config.amplitude.coefficients_mhz = seed;
    config.doppler = None;
    config.optimize = Some(OptimizeConfig {
        budget: 5000,
        seed: 2024,
        starts: 1,
        start_spread: 0.1,
        target: Some(THRESHOLD),
        negativity_weight: 1e6,
        cap_weight: 1e6,
        free,
    });
    let perturbed =
        run::run_optimize(&config, &scratch.join("fig1b"), OptimizeOverrides::default()).map_err(|e| e.to_string())?;
    let perturbed_error = perturbed.best_gate_error.unwrap_or(f64::INFINITY);

    let risa = scenario("fig5-risa");
    let blockade_ok = risa.blockade_model() == BlockadeModel::Forster { coupling_mhz: 500.0, penalty_mhz: 0.0 };
    let budget_ok = risa.optimize.as_ref().is_some_and(|o| o.budget <= 20_000);
    let report =
        run::run_optimize(&risa, &scratch.join("risa"), OptimizeOverrides::default()).map_err(|e| e.to_string())?;
    let risa_error = report.best_gate_error.unwrap_or(f64::INFINITY);
    check(
        perturbed_error < 1e-4
            && perturbed.evaluations <= 5000
            && perturbed.feasible
            && blockade_ok
            && budget_ok
            && risa_error < 1e-3
            && report.evaluations <= 20_000
            && report.feasible,
        format!(
            "perturbed fig1b {perturbed_error:.2e} after {} evaluations; RISA {risa_error:.2e} after {}",
            perturbed.evaluations, report.evaluations
        ),
    )
}

fn idealized_limit() -> Outcome {
    let ideal = resolved_setup("fig1a");
    let mut strong = ideal.clone();
    strong.blockade = BlockadeModel::Forster { coupling_mhz: 1e4, penalty_mhz: 0.0 };
    let run = |setup: &GateSetup| {
        let system = setup.system(Manifold::DoubleExcitation, DopplerShift::NONE).unwrap();
        let out = setup.propagate_manifold(Manifold::DoubleExcitation, DopplerShift::NONE).unwrap();
        (system.states().to_vec(), out.state)
    };
    let (ideal_states, ideal_psi) = run(&ideal);
    let (states, psi) = run(&strong);
    let mut sq = 0.0;
    for (state, amp) in states.iter().zip(&psi) {
        let reference = ideal_states.iter().position(|s| s == state).map_or(C64::new(0.0, 0.0), |i| ideal_psi[i]);
        sq += (amp - reference).norm_sqr();
    }
    let diff: f64 = sq.sqrt();
    check(diff <= 1e-3, format!("‖ψ_B - ψ_ideal‖ = {diff:.2e} at B = 1e4 MHz"))
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let criteria: Vec<Criterion> = vec![
        ("basis tables", Box::new(basis_tables)),
        ("one-photon regression at 250 ns", Box::new(fig1_regression)),
        ("scanned regressions", Box::new(scanned_regression)),
        ("amplitude caps", Box::new(amplitude_caps)),
        ("Doppler cancellation", Box::new(doppler_cancellation)),
        ("propagator oracles", Box::new(propagator_oracles)),
        ("fidelity units", Box::new(fidelity_units)),
        ("optimizer capability", Box::new(|| optimizer_capability(scratch.path()))),
        ("idealized-blockade limit", Box::new(idealized_limit)),
    ];
    let mut failures = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
