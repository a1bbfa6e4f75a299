//! Scenario files.
//!
//! A scenario is one TOML document describing a drive, its waveform, the
//! blockade model and the pulse schedule. Frequencies are `/2π` values in MHz
//! and times are in µs.

use std::fs;
use std::path::{Path, PathBuf};

use ormd_core::basis::{AmplitudeBasis, BasisFamily, CosineSeries, WaveformTemplate};
use ormd_core::levels::{BlockadeModel, DriveKind, DriveScheme};
use ormd_core::metrics::GateSetup;
use ormd_core::optimize::{FreeParameter, OptimizationProblem, Parameter, Penalties, DEFAULT_PENALTY_WEIGHT};
use ormd_core::propagate::PulseSchedule;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest cosine harmonic a detuning may carry.
pub const MAX_DETUNING_HARMONICS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Default artifact directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub drive: DriveConfig,
    pub amplitude: AmplitudeConfig,
    pub detuning: DetuningConfig,
    #[serde(default)]
    pub blockade: BlockadeConfig,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler: Option<DopplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OnePhoton,
    TwoPhoton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub scheme: Scheme,
    /// Ω_S of the upper transition, two-photon only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_rabi_mhz: Option<f64>,
    /// Δ of the intermediate level, two-photon only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate_detuning_mhz: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    U,
    V,
    Sine,
}

impl Basis {
    fn amplitude_basis(self) -> AmplitudeBasis {
        match self {
            Basis::U => AmplitudeBasis::Adjusted(BasisFamily::U),
            Basis::V => AmplitudeBasis::Adjusted(BasisFamily::V),
            Basis::Sine => AmplitudeBasis::Sine,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Basis::U => "u",
            Basis::V => "v",
            Basis::Sine => "sine",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeConfig {
    pub basis: Basis,
    pub coefficients_mhz: Vec<f64>,
    /// Upper limit Ω_max on the realized amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_mhz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningConfig {
    pub constant_mhz: f64,
    /// Coefficients of `cos(2πx)`, `cos(4πx)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cosine_mhz: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockadeKind {
    #[default]
    Idealized,
    Forster,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockadeConfig {
    pub model: BlockadeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_mhz: Option<f64>,
    /// δ_q of the `|qq'⟩` pair state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_mhz: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Single,
    Dual,
}

/// Exactly one of `duration_us` and `scan` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub range_us: [f64; 2],
    pub steps: usize,
    /// Result of a previous scan, frozen into the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<ResolvedDuration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedDuration {
    pub duration_us: f64,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    /// Found by `scan-tp` rather than given as an input.
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerConfig {
    pub grid_mhz: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub budget: usize,
    pub seed: u64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_spread")]
    pub start_spread: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default = "default_weight")]
    pub negativity_weight: f64,
    #[serde(default = "default_weight")]
    pub cap_weight: f64,
    pub free: Vec<FreeConfig>,
}

fn default_starts() -> usize {
    1
}

fn default_spread() -> f64 {
    0.1
}

fn default_weight() -> f64 {
    DEFAULT_PENALTY_WEIGHT
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreeKind {
    Amplitude,
    DetuningConstant,
    DetuningCosine,
    Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeConfig {
    pub parameter: FreeKind,
    /// 1-based coefficient index for `amplitude` and `detuning-cosine`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub lower: f64,
    pub upper: f64,
}

impl FreeConfig {
    pub fn label(&self) -> String {
        match (self.parameter, self.index) {
            (FreeKind::Amplitude, Some(i)) => format!("amplitude.coefficients_mhz[{i}]"),
            (FreeKind::DetuningCosine, Some(i)) => format!("detuning.cosine_mhz[{i}]"),
            (FreeKind::DetuningConstant, _) => "detuning.constant_mhz".into(),
            (FreeKind::Duration, _) => "schedule.duration_us".into(),
            (kind, None) => format!("{kind:?}"),
        }
    }
}

/// Where the pulse duration of a scenario comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationSource {
    Fixed,
    /// The frozen result of an earlier scan.
    Resolved,
    /// A scan run for this invocation.
    Scanned,
}

fn field(name: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Field { field: name.into(), message: message.into() }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must be finite, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.name.trim().is_empty() {
            return Err(field("name", "must not be empty"));
        }
        self.validate_drive()?;
        self.validate_waveform()?;
        self.validate_blockade()?;
        self.validate_schedule()?;
        if let Some(d) = &self.doppler {
            if d.grid_mhz.is_empty() {
                return Err(field("doppler.grid_mhz", "must not be empty"));
            }
            for &g in &d.grid_mhz {
                finite("doppler.grid_mhz", g)?;
            }
            ormd_core::metrics::validate_doppler_grid(&d.grid_mhz)
                .map_err(|e| field("doppler.grid_mhz", e.to_string()))?;
        }
        if let Some(o) = &self.optimize {
            self.validate_optimize(o)?;
        }
        Ok(())
    }

    fn validate_drive(&self) -> Result<()> {
        let d = &self.drive;
        match d.scheme {
            Scheme::OnePhoton => {
                if d.coupling_rabi_mhz.is_some() {
                    return Err(field("drive.coupling_rabi_mhz", "only valid for a two-photon scheme"));
                }
                if d.intermediate_detuning_mhz.is_some() {
                    return Err(field("drive.intermediate_detuning_mhz", "only valid for a two-photon scheme"));
                }
            }
            Scheme::TwoPhoton => {
                match d.coupling_rabi_mhz {
                    None => return Err(field("drive.coupling_rabi_mhz", "required for a two-photon scheme")),
                    Some(v) if !(v.is_finite() && v > 0.0) => {
                        return Err(field("drive.coupling_rabi_mhz", format!("must be positive, got {v}")))
                    }
                    _ => {}
                }
                match d.intermediate_detuning_mhz {
                    None => return Err(field("drive.intermediate_detuning_mhz", "required for a two-photon scheme")),
                    Some(v) if !v.is_finite() || v == 0.0 => {
                        return Err(field(
                            "drive.intermediate_detuning_mhz",
                            format!("must be finite and nonzero, got {v}"),
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn validate_waveform(&self) -> Result<()> {
        let a = &self.amplitude;
        let expected = a.basis.amplitude_basis().dimension();
        match expected {
            Some(n) if a.coefficients_mhz.len() != n => {
                return Err(field(
                    "amplitude.coefficients_mhz",
                    format!("basis \"{}\" takes {n} coefficients, found {}", a.basis.name(), a.coefficients_mhz.len()),
                ))
            }
            None if a.coefficients_mhz.is_empty() => {
                return Err(field("amplitude.coefficients_mhz", "needs at least one coefficient"))
            }
            _ => {}
        }
        for &c in &a.coefficients_mhz {
            finite("amplitude.coefficients_mhz", c)?;
        }
        if let Some(cap) = a.cap_mhz {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(field("amplitude.cap_mhz", format!("must be positive, got {cap}")));
            }
        }
        finite("detuning.constant_mhz", self.detuning.constant_mhz)?;
        if self.detuning.cosine_mhz.len() > MAX_DETUNING_HARMONICS {
            return Err(field(
                "detuning.cosine_mhz",
                format!("at most {MAX_DETUNING_HARMONICS} harmonics, found {}", self.detuning.cosine_mhz.len()),
            ));
        }
        for &c in &self.detuning.cosine_mhz {
            finite("detuning.cosine_mhz", c)?;
        }
        Ok(())
    }

    fn validate_blockade(&self) -> Result<()> {
        let b = &self.blockade;
        match b.model {
            BlockadeKind::Idealized => {
                if b.coupling_mhz.is_some() {
                    return Err(field("blockade.coupling_mhz", "only valid for the forster model"));
                }
                if b.penalty_mhz.is_some() {
                    return Err(field("blockade.penalty_mhz", "only valid for the forster model"));
                }
            }
            BlockadeKind::Forster => {
                match b.coupling_mhz {
                    None => return Err(field("blockade.coupling_mhz", "required for the forster model")),
                    Some(v) if !(v.is_finite() && v > 0.0) => {
                        return Err(field("blockade.coupling_mhz", format!("must be positive, got {v}")))
                    }
                    _ => {}
                }
                if let Some(p) = b.penalty_mhz {
                    finite("blockade.penalty_mhz", p)?;
                }
            }
        }
        Ok(())
    }

    fn has_free_duration(&self) -> bool {
        self.optimize.as_ref().is_some_and(|o| o.free.iter().any(|f| f.parameter == FreeKind::Duration))
    }

    fn validate_schedule(&self) -> Result<()> {
        let s = &self.schedule;
        match (s.duration_us, &s.scan) {
            (Some(_), Some(_)) => Err(field("schedule", "give either duration_us or scan, not both")),
            (None, None) if self.has_free_duration() => Ok(()),
            (None, None) => Err(field("schedule", "needs duration_us, a scan table or a free duration")),
            (Some(t), None) => {
                if t.is_finite() && t > 0.0 {
                    Ok(())
                } else {
                    Err(field("schedule.duration_us", format!("must be positive, got {t}")))
                }
            }
            (None, Some(scan)) => {
                let [lo, hi] = scan.range_us;
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
                    return Err(field("schedule.scan.range_us", format!("needs 0 < lo < hi, got [{lo}, {hi}]")));
                }
                if scan.steps < 2 {
                    return Err(field("schedule.scan.steps", format!("must be at least 2, got {}", scan.steps)));
                }
                if let Some(r) = &scan.resolved {
                    if !(r.duration_us.is_finite() && r.duration_us > 0.0) {
                        return Err(field(
                            "schedule.scan.resolved.duration_us",
                            format!("must be positive, got {}", r.duration_us),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    fn validate_optimize(&self, o: &OptimizeConfig) -> Result<()> {
        if o.budget == 0 {
            return Err(field("optimize.budget", "must be at least 1"));
        }
        if o.starts == 0 {
            return Err(field("optimize.starts", "must be at least 1"));
        }
        if !(o.start_spread.is_finite() && o.start_spread >= 0.0) {
            return Err(field("optimize.start_spread", "must be non-negative"));
        }
        if !(o.negativity_weight.is_finite() && o.negativity_weight >= 0.0) {
            return Err(field("optimize.negativity_weight", "must be non-negative"));
        }
        if !(o.cap_weight.is_finite() && o.cap_weight >= 0.0) {
            return Err(field("optimize.cap_weight", "must be non-negative"));
        }
        if let Some(t) = o.target {
            if !(t.is_finite() && t > 0.0) {
                return Err(field("optimize.target", "must be positive"));
            }
        }
        for (i, f) in o.free.iter().enumerate() {
            let name = format!("optimize.free[{}]", i + 1);
            if !(f.lower.is_finite() && f.upper.is_finite() && f.lower <= f.upper) {
                return Err(field(format!("{name}.lower"), "bounds must be finite with lower <= upper"));
            }
            let count = match f.parameter {
                FreeKind::Amplitude => Some(self.amplitude.coefficients_mhz.len()),
                FreeKind::DetuningCosine => Some(self.detuning.cosine_mhz.len()),
                FreeKind::DetuningConstant | FreeKind::Duration => None,
            };
            match (count, f.index) {
                (Some(n), Some(idx)) if idx == 0 || idx > n => {
                    return Err(field(format!("{name}.index"), format!("must lie in 1..={n}, got {idx}")));
                }
                (Some(_), None) => return Err(field(format!("{name}.index"), "required for this parameter")),
                (None, Some(_)) => return Err(field(format!("{name}.index"), "not used by this parameter")),
                _ => {}
            }
            if f.parameter == FreeKind::Duration && f.lower <= 0.0 {
                return Err(field(format!("{name}.lower"), "pulse duration bounds must be positive"));
            }
        }
        let mut seen: Vec<(FreeKind, Option<usize>)> = Vec::new();
        for f in &o.free {
            if seen.contains(&(f.parameter, f.index)) {
                return Err(field("optimize.free", format!("{} listed twice", f.label())));
            }
            seen.push((f.parameter, f.index));
        }
        Ok(())
    }

    pub fn drive_kind(&self) -> DriveKind {
        match self.drive.scheme {
            Scheme::OnePhoton => DriveKind::OnePhoton,
            Scheme::TwoPhoton => DriveKind::TwoPhoton {
                coupling_rabi_mhz: self.drive.coupling_rabi_mhz.unwrap_or_default(),
                intermediate_detuning_mhz: self.drive.intermediate_detuning_mhz.unwrap_or_default(),
            },
        }
    }

    pub fn template(&self) -> WaveformTemplate {
        WaveformTemplate {
            basis: self.amplitude.basis.amplitude_basis(),
            amplitude: self.amplitude.coefficients_mhz.clone(),
            detuning: CosineSeries::new(self.detuning.constant_mhz, self.detuning.cosine_mhz.clone()),
        }
    }

    pub fn blockade_model(&self) -> BlockadeModel {
        match self.blockade.model {
            BlockadeKind::Idealized => BlockadeModel::Idealized,
            BlockadeKind::Forster => BlockadeModel::Forster {
                coupling_mhz: self.blockade.coupling_mhz.unwrap_or_default(),
                penalty_mhz: self.blockade.penalty_mhz.unwrap_or(0.0),
            },
        }
    }

    pub fn schedule(&self, duration_us: f64) -> PulseSchedule {
        match self.schedule.kind {
            ScheduleKind::Single => PulseSchedule::single(duration_us),
            ScheduleKind::Dual => PulseSchedule::dual(duration_us),
        }
    }

    /// The pulse duration known without scanning: fixed or previously resolved.
    pub fn known_duration(&self) -> Option<(f64, DurationSource)> {
        match (&self.schedule.duration_us, &self.schedule.scan) {
            (Some(t), _) => Some((*t, DurationSource::Fixed)),
            (None, Some(ScanConfig { resolved: Some(r), .. })) => Some((r.duration_us, DurationSource::Resolved)),
            _ => None,
        }
    }

    /// `(lo, hi, steps)` of the scan table, if any.
    pub fn scan_range(&self) -> Option<((f64, f64), usize)> {
        self.schedule.scan.as_ref().map(|s| ((s.range_us[0], s.range_us[1]), s.steps))
    }

    pub fn setup(&self, duration_us: f64) -> Result<GateSetup> {
        let waveform = self.template().waveform()?;
        let drive = DriveScheme { kind: self.drive_kind(), waveform };
        Ok(GateSetup::new(drive, self.blockade_model(), self.schedule(duration_us)))
    }

    /// Records a scan result as the frozen duration.
    pub fn freeze_duration(&mut self, duration_us: f64) -> Result<()> {
        match &mut self.schedule.scan {
            Some(scan) => {
                scan.resolved = Some(ResolvedDuration { duration_us, origin: Origin::Derived });
                Ok(())
            }
            None => Err(field("schedule.scan", "only scanned schedules can hold a resolved duration")),
        }
    }

    pub fn optimization_problem(&self) -> Result<OptimizationProblem> {
        let o = self.optimize.as_ref().ok_or_else(|| field("optimize", "missing optimize table"))?;
        let free_duration = o.free.iter().any(|f| f.parameter == FreeKind::Duration);
        let duration = match (self.known_duration(), free_duration) {
            (Some((t, _)), _) => t,
            (None, true) => {
                let f = o.free.iter().find(|f| f.parameter == FreeKind::Duration).expect("checked");
                0.5 * (f.lower + f.upper)
            }
            (None, false) => {
                return Err(field("schedule", "optimization needs a known duration or a free duration parameter"))
            }
        };
        let mut problem = OptimizationProblem::new(
            self.drive_kind(),
            self.template(),
            self.blockade_model(),
            self.schedule(duration),
        );
        problem.free = o
            .free
            .iter()
            .map(|f| {
                let parameter = match f.parameter {
                    FreeKind::Amplitude => Parameter::Amplitude(f.index.unwrap_or(1) - 1),
                    FreeKind::DetuningConstant => Parameter::DetuningConstant,
                    FreeKind::DetuningCosine => Parameter::DetuningHarmonic(f.index.unwrap_or(1)),
                    FreeKind::Duration => Parameter::PulseDuration,
                };
                FreeParameter::new(parameter, f.lower, f.upper)
            })
            .collect();
        problem.penalties = Penalties {
            negativity_weight: o.negativity_weight,
            cap_weight: o.cap_weight,
            cap_mhz: self.amplitude.cap_mhz,
        };
        problem.budget = o.budget;
        problem.seed = o.seed;
        problem.starts = o.starts;
        problem.start_spread = o.start_spread;
        problem.target = o.target;
        problem.validate()?;
        Ok(problem)
    }

    /// A copy with `params` (in `optimize.free` order) written into the waveform and schedule.
    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let o = self.optimize.as_ref().ok_or_else(|| field("optimize", "missing optimize table"))?;
        if params.len() != o.free.len() {
            return Err(field("optimize.free", format!("expected {} values, got {}", o.free.len(), params.len())));
        }
        let mut out = self.clone();
        for (f, &v) in o.free.iter().zip(params) {
            match f.parameter {
                FreeKind::Amplitude => out.amplitude.coefficients_mhz[f.index.unwrap_or(1) - 1] = v,
                FreeKind::DetuningConstant => out.detuning.constant_mhz = v,
                FreeKind::DetuningCosine => out.detuning.cosine_mhz[f.index.unwrap_or(1) - 1] = v,
                FreeKind::Duration => {
                    out.schedule.duration_us = Some(v);
                    out.schedule.scan = None;
                }
            }
        }
        if out.schedule.duration_us.is_none() && out.known_duration().is_none() {
            let problem = self.optimization_problem()?;
            out.schedule.duration_us = Some(problem.schedule.duration_us);
            out.schedule.scan = None;
        }
        out.validate()?;
        Ok(out)
    }
}
