//! CSV and JSON artifacts.
//!
//! Every CSV has a header row and writes reals as `{:.8e}` (nine significant
//! digits).

use std::fs;
use std::path::Path;

use ormd_core::basis::{grid, AdjustedBasisTable, WaveformSpec};
use ormd_core::levels::BasisState;
use ormd_core::metrics::DopplerSweep;
use ormd_core::propagate::Trajectory;
use serde::Serialize;

use crate::error::{Error, Result};

/// Points written to a waveform CSV.
pub const WAVEFORM_POINTS: usize = 1001;

pub fn real(v: f64) -> String {
    format!("{v:.8e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `x, Omega_MHz, Detuning_MHz` on a uniform grid over `[0, 1]`.
pub fn write_waveform(path: &Path, waveform: &WaveformSpec) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "Omega_MHz", "Detuning_MHz"])?;
    for x in grid(WAVEFORM_POINTS) {
        let (omega, detuning) = waveform.eval(x);
        w.write_record([real(x), real(omega), real(detuning)])?;
    }
    finish(w, path)
}

/// `t_us` followed by real part, imaginary part and population of every state.
pub fn write_trajectory(path: &Path, states: &[BasisState], trajectory: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t_us".to_string()];
    for s in states {
        let l = s.label();
        header.extend([format!("re_{l}"), format!("im_{l}"), format!("pop_{l}")]);
    }
    w.write_record(&header)?;
    for (t, psi) in trajectory.times_us.iter().zip(&trajectory.states) {
        let mut row = vec![real(*t)];
        for z in psi {
            row.extend([real(z.re), real(z.im), real(z.norm_sqr())]);
        }
        w.write_record(&row)?;
    }
    finish(w, path)
}

pub fn write_scan(path: &Path, samples: &[(f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["T_p_us", "gate_error"])?;
    for (t, e) in samples {
        w.write_record([real(*t), real(*e)])?;
    }
    finish(w, path)
}

/// `delta_D_MHz, gate_error, cond_phase_rad, leakage`. An undefined phase is left empty.
pub fn write_sweep(path: &Path, sweep: &DopplerSweep) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["delta_D_MHz", "gate_error", "cond_phase_rad", "leakage"])?;
    for p in &sweep.points {
        let phase = p.result.conditional_phase.map(real).unwrap_or_default();
        w.write_record([real(p.shift_mhz), real(p.result.gate_error), phase, real(p.result.leakage())])?;
    }
    finish(w, path)
}

/// One row per basis function, one column per odd sine harmonic, six decimals.
pub fn write_basis_table(path: &Path, table: &AdjustedBasisTable) -> Result<()> {
    let mut w = writer(path)?;
    let harmonics = table.family.harmonics();
    let mut header = vec!["function".to_string()];
    header.extend((0..harmonics).map(|k| match 2 * k + 1 {
        1 => "sin_pi_x".to_string(),
        m => format!("sin_{m}pi_x"),
    }));
    w.write_record(&header)?;
    for (j, row) in table.rows.iter().enumerate() {
        let mut record = vec![format!("{}{}", table.family.name(), j + 1)];
        record.extend(row.coeffs.iter().map(|c| format!("{c:.6}")));
        w.write_record(&record)?;
    }
    finish(w, path)
}

/// Best objective so far after each evaluation, counted from 1.
pub fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["evaluation", "best_objective"])?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), real(*v)])?;
    }
    finish(w, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
