//! Level systems and their time-dependent Hamiltonians.
//!
//! Because both atoms see the same drive, the two-qubit dynamics splits into
//! independent manifolds. The single-excitation manifold starts in `|01⟩`
//! (`|10⟩` is identical by symmetry) and the double-excitation manifold starts
//! in `|11⟩`, which couples to the symmetric singly-excited states. `|00⟩` is
//! never driven.
//!
//! Waveform values are frequency/2π in MHz. The conversion to angular
//! frequency in rad/µs happens only when a Hamiltonian is written.

use alloc::vec::Vec;
use core::f64::consts::{SQRT_2, TAU};

use crate::basis::{WaveformSpec, NEGATIVITY_TOL};
use crate::linalg::{CMatrix, C64};
use crate::propagate::{Hamiltonian, PulseDirection};
use crate::{Error, Result};

/// Fixed parameters of the drive, apart from the modulated waveform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriveKind {
    /// Direct ground–Rydberg coupling `Ω₁` with detuning `Δ₁`.
    OnePhoton,
    /// Ladder through an intermediate state `|e⟩`: modulated probe `Ω_p`,
    /// constant coupling `Ω_S`, constant intermediate detuning `Δ`, and the
    /// modulated two-photon detuning `δ`.
    TwoPhoton { coupling_rabi_mhz: f64, intermediate_detuning_mhz: f64 },
}

/// A drive: the modulated waveform plus the fixed parameters of its kind.
///
/// For [`DriveKind::OnePhoton`] the waveform holds `(Ω₁, Δ₁)`; for
/// [`DriveKind::TwoPhoton`] it holds `(Ω_p, δ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveScheme {
    pub kind: DriveKind,
    pub waveform: WaveformSpec,
}

impl DriveScheme {
    pub fn one_photon(waveform: WaveformSpec) -> Self {
        Self { kind: DriveKind::OnePhoton, waveform }
    }

    pub fn two_photon(waveform: WaveformSpec, coupling_rabi_mhz: f64, intermediate_detuning_mhz: f64) -> Self {
        Self { kind: DriveKind::TwoPhoton { coupling_rabi_mhz, intermediate_detuning_mhz }, waveform }
    }

    fn validate(&self) -> Result<()> {
        if let DriveKind::TwoPhoton { coupling_rabi_mhz, intermediate_detuning_mhz } = self.kind {
            if !(coupling_rabi_mhz.is_finite() && coupling_rabi_mhz > 0.0) {
                return Err(Error::Configuration("two-photon coupling Rabi frequency must be positive"));
            }
            if intermediate_detuning_mhz == 0.0 || !intermediate_detuning_mhz.is_finite() {
                return Err(Error::Configuration("two-photon intermediate detuning must be nonzero"));
            }
        }
        Ok(())
    }
}

/// How the Rydberg–Rydberg interaction is modelled.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum BlockadeModel {
    /// `|rr⟩` is never populated.
    #[default]
    Idealized,
    /// Single-channel Förster resonance `|rr⟩ ↔ |qq'⟩` with coupling `B` and
    /// energy penalty `δ_q` on `|qq'⟩`.
    Forster { coupling_mhz: f64, penalty_mhz: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Manifold {
    SingleExcitation,
    DoubleExcitation,
}

/// Basis states of the manifolds. Tilde states are the symmetric
/// combinations over the two atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisState {
    Ground01,
    Intermediate0e,
    Rydberg0r,
    Ground11,
    /// `(|e1⟩ + |1e⟩)/√2`
    IntermediateSym,
    /// `(|r1⟩ + |1r⟩)/√2`
    RydbergSym,
    /// `(|re⟩ + |er⟩)/√2`
    RydbergIntermediateSym,
    DoubleRydberg,
    /// The Förster partner pair state `|qq'⟩`.
    ForsterPair,
}

impl BasisState {
    pub fn label(self) -> &'static str {
        match self {
            BasisState::Ground01 => "01",
            BasisState::Intermediate0e => "0e",
            BasisState::Rydberg0r => "0r",
            BasisState::Ground11 => "11",
            BasisState::IntermediateSym => "e~",
            BasisState::RydbergSym => "r~",
            BasisState::RydbergIntermediateSym => "R~",
            BasisState::DoubleRydberg => "rr",
            BasisState::ForsterPair => "qq'",
        }
    }

    /// Number of Rydberg excitations, which sets the Doppler shift of the state.
    pub fn rydberg_excitations(self) -> u32 {
        match self {
            BasisState::Ground01 | BasisState::Intermediate0e | BasisState::Ground11 | BasisState::IntermediateSym => 0,
            BasisState::Rydberg0r | BasisState::RydbergSym | BasisState::RydbergIntermediateSym => 1,
            BasisState::DoubleRydberg | BasisState::ForsterPair => 2,
        }
    }
}

/// The ordered state list of a manifold. State 0 is the computational state.
pub fn manifold_states(kind: DriveKind, manifold: Manifold, blockade: BlockadeModel) -> Vec<BasisState> {
    use BasisState::*;
    let forster = matches!(blockade, BlockadeModel::Forster { .. });
    match (kind, manifold) {
        (DriveKind::OnePhoton, Manifold::SingleExcitation) => [Ground01, Rydberg0r].to_vec(),
        (DriveKind::OnePhoton, Manifold::DoubleExcitation) if forster => {
            [Ground11, RydbergSym, DoubleRydberg, ForsterPair].to_vec()
        }
        (DriveKind::OnePhoton, Manifold::DoubleExcitation) => [Ground11, RydbergSym].to_vec(),
        (DriveKind::TwoPhoton { .. }, Manifold::SingleExcitation) => [Ground01, Intermediate0e, Rydberg0r].to_vec(),
        (DriveKind::TwoPhoton { .. }, Manifold::DoubleExcitation) if forster => {
            [Ground11, IntermediateSym, RydbergSym, RydbergIntermediateSym, DoubleRydberg, ForsterPair].to_vec()
        }
        (DriveKind::TwoPhoton { .. }, Manifold::DoubleExcitation) => {
            [Ground11, IntermediateSym, RydbergSym, RydbergIntermediateSym].to_vec()
        }
    }
}

/// A shared Doppler shift per Rydberg excitation, in MHz. Its sign follows the
/// direction of the pulse being applied.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DopplerShift {
    pub shift_mhz: f64,
}

impl DopplerShift {
    pub const NONE: DopplerShift = DopplerShift { shift_mhz: 0.0 };

    pub fn new(shift_mhz: f64) -> Self {
        Self { shift_mhz }
    }
}

/// Whether negative Rabi amplitudes are rejected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Physicality {
    #[default]
    Enforce,
    /// Accept negative amplitudes; the optimizer penalizes them instead.
    Ignore,
}

/// A fully specified manifold whose Hamiltonian can be sampled in time.
#[derive(Clone, Debug)]
pub struct LevelSystem {
    drive: DriveScheme,
    manifold: Manifold,
    blockade: BlockadeModel,
    doppler: DopplerShift,
    physicality: Physicality,
    states: Vec<BasisState>,
}

impl LevelSystem {
    pub fn new(drive: DriveScheme, manifold: Manifold, blockade: BlockadeModel, doppler: DopplerShift) -> Result<Self> {
        Self::with_physicality(drive, manifold, blockade, doppler, Physicality::Enforce)
    }

    pub fn with_physicality(
        drive: DriveScheme,
        manifold: Manifold,
        blockade: BlockadeModel,
        doppler: DopplerShift,
        physicality: Physicality,
    ) -> Result<Self> {
        drive.validate()?;
        if let BlockadeModel::Forster { coupling_mhz, penalty_mhz } = blockade {
            if !(coupling_mhz.is_finite() && coupling_mhz > 0.0) || !penalty_mhz.is_finite() {
                return Err(Error::Configuration("Forster coupling B must be positive and finite"));
            }
        }
        if !doppler.shift_mhz.is_finite() {
            return Err(Error::Configuration("Doppler shift must be finite"));
        }
        if physicality == Physicality::Enforce {
            drive.waveform.check_physical()?;
        }
        let states = manifold_states(drive.kind, manifold, blockade);
        Ok(Self { drive, manifold, blockade, doppler, physicality, states })
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn drive(&self) -> &DriveScheme {
        &self.drive
    }

    pub fn blockade(&self) -> BlockadeModel {
        self.blockade
    }

    /// The Hamiltonian at normalized time `x`, in rad/µs.
    pub fn hamiltonian(&self, x: f64, direction: PulseDirection) -> Result<CMatrix> {
        let mut h = CMatrix::zeros(self.states.len());
        self.write(x, direction, &mut h)?;
        Ok(h)
    }
}

fn real(v: f64) -> C64 {
    C64::new(v, 0.0)
}

impl Hamiltonian for LevelSystem {
    fn dim(&self) -> usize {
        self.states.len()
    }

    fn write(&self, x: f64, direction: PulseDirection, h: &mut CMatrix) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { x });
        }
        let (rabi, detuning) = self.drive.waveform.eval(x);
        if self.physicality == Physicality::Enforce && rabi < -NEGATIVITY_TOL {
            return Err(Error::NegativeAmplitude { x, value_mhz: rabi });
        }
        let rabi = TAU * rabi;
        let detuning = TAU * detuning;
        h.fill_zero();

        let forster = match self.blockade {
            BlockadeModel::Forster { coupling_mhz, penalty_mhz } => Some((TAU * coupling_mhz, TAU * penalty_mhz)),
            BlockadeModel::Idealized => None,
        };

        match (self.drive.kind, self.manifold) {
            (DriveKind::OnePhoton, Manifold::SingleExcitation) => {
                h.set_coupling(0, 1, real(0.5 * rabi));
                h[(1, 1)] = real(detuning);
            }
            (DriveKind::OnePhoton, Manifold::DoubleExcitation) => {
                h.set_coupling(0, 1, real(rabi / SQRT_2));
                h[(1, 1)] = real(detuning);
                if let Some((b, penalty)) = forster {
                    h.set_coupling(1, 2, real(rabi / SQRT_2));
                    h.set_coupling(2, 3, real(b));
                    h[(2, 2)] = real(2.0 * detuning);
                    h[(3, 3)] = real(2.0 * detuning + penalty);
                }
            }
            (DriveKind::TwoPhoton { coupling_rabi_mhz, intermediate_detuning_mhz }, manifold) => {
                let control = TAU * coupling_rabi_mhz;
                let intermediate = TAU * intermediate_detuning_mhz;
                match manifold {
                    Manifold::SingleExcitation => {
                        h.set_coupling(0, 1, real(0.5 * rabi));
                        h.set_coupling(1, 2, real(0.5 * control));
                        h[(1, 1)] = real(intermediate);
                        h[(2, 2)] = real(detuning);
                    }
                    Manifold::DoubleExcitation => {
                        h.set_coupling(0, 1, real(rabi / SQRT_2));
                        h.set_coupling(1, 2, real(0.5 * control));
                        h.set_coupling(2, 3, real(0.5 * rabi));
                        h[(1, 1)] = real(intermediate);
                        h[(2, 2)] = real(detuning);
                        h[(3, 3)] = real(intermediate + detuning);
                        if let Some((b, penalty)) = forster {
                            h.set_coupling(3, 4, real(SQRT_2 * 0.5 * control));
                            h.set_coupling(4, 5, real(b));
                            h[(4, 4)] = real(2.0 * detuning);
                            h[(5, 5)] = real(2.0 * detuning + penalty);
                        }
                    }
                }
            }
        }

        if self.doppler.shift_mhz != 0.0 {
            let shift = TAU * self.doppler.shift_mhz * direction.sign();
            for (i, s) in self.states.iter().enumerate() {
                h[(i, i)] += real(f64::from(s.rydberg_excitations()) * shift);
            }
        }
        Ok(())
    }
}

/// True iff `max |H - H†| < 1e-12`.
pub fn hermiticity_check(h: &CMatrix) -> bool {
    h.max_abs_diff(&h.adjoint()) < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{CosineSeries, SineSeries};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    /// A waveform that is constant inside the pulse: Ω(1/2) = `rabi` for a
    /// single first harmonic evaluated at the midpoint.
    fn midpoint_waveform(rabi: f64, detuning: f64) -> WaveformSpec {
        WaveformSpec::new(SineSeries::new(vec![rabi]), CosineSeries::constant(detuning))
    }

    fn build(drive: DriveScheme, manifold: Manifold, blockade: BlockadeModel) -> LevelSystem {
        LevelSystem::new(drive, manifold, blockade, DopplerShift::NONE).unwrap()
    }

    #[test]
    fn one_photon_single_matrix() {
        let sys = build(
            DriveScheme::one_photon(midpoint_waveform(10.0, 5.0)),
            Manifold::SingleExcitation,
            BlockadeModel::Idealized,
        );
        let h = sys.hamiltonian(0.5, PulseDirection::Forward).unwrap();
        assert_eq!(h[(0, 0)], real(0.0));
        assert_abs_diff_eq!(h[(0, 1)].re, PI * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 0)].re, PI * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 1)].re, 2.0 * PI * 5.0, epsilon = 1e-12);
    }

    #[test]
    fn one_photon_double_coupling() {
        let sys = build(
            DriveScheme::one_photon(midpoint_waveform(10.0, 5.0)),
            Manifold::DoubleExcitation,
            BlockadeModel::Idealized,
        );
        let h = sys.hamiltonian(0.5, PulseDirection::Forward).unwrap();
        assert_abs_diff_eq!(h[(0, 1)].re, 2.0 * PI * 10.0 / SQRT_2, epsilon = 1e-12);
        assert_eq!(sys.states(), &[BasisState::Ground11, BasisState::RydbergSym]);
    }

    #[test]
    fn forster_terms() {
        let blockade = BlockadeModel::Forster { coupling_mhz: 200.0, penalty_mhz: 3.0 };
        let sys = build(DriveScheme::one_photon(midpoint_waveform(10.0, 5.0)), Manifold::DoubleExcitation, blockade);
        let h = sys.hamiltonian(0.5, PulseDirection::Forward).unwrap();
        assert_eq!(h.dim(), 4);
        assert_abs_diff_eq!(h[(1, 2)].re, TAU * 10.0 / SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(2, 3)].re, TAU * 200.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(2, 2)].re, TAU * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(3, 3)].re, TAU * 13.0, epsilon = 1e-12);

        let two = DriveScheme::two_photon(midpoint_waveform(100.0, -0.5), 350.0, 5000.0);
        let sys = build(two, Manifold::DoubleExcitation, blockade);
        let h = sys.hamiltonian(0.5, PulseDirection::Forward).unwrap();
        assert_eq!(h.dim(), 6);
        assert_abs_diff_eq!(h[(0, 1)].re, TAU * 100.0 / SQRT_2, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(1, 2)].re, TAU * 175.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(2, 3)].re, TAU * 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(3, 4)].re, TAU * 350.0 / SQRT_2, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(3, 3)].re, TAU * 4999.5, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(4, 4)].re, -TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(5, 5)].re, TAU * 2.0, epsilon = 1e-12);
        assert!(hermiticity_check(&h));
    }

    #[test]
    fn two_photon_single_chain() {
        let two = DriveScheme::two_photon(midpoint_waveform(100.0, -0.5), 350.0, 5000.0);
        let sys = build(two, Manifold::SingleExcitation, BlockadeModel::Idealized);
        let h = sys.hamiltonian(0.5, PulseDirection::Forward).unwrap();
        assert_abs_diff_eq!(h[(0, 1)].re, TAU * 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(1, 2)].re, TAU * 175.0, epsilon = 1e-9);
        assert_eq!(h[(0, 2)], real(0.0));
        assert_abs_diff_eq!(h[(1, 1)].re, TAU * 5000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(h[(2, 2)].re, TAU * -0.5, epsilon = 1e-12);
    }

    #[test]
    fn doppler_shift_is_diagonal_and_counts_excitations() {
        let blockade = BlockadeModel::Forster { coupling_mhz: 100.0, penalty_mhz: 0.0 };
        let two = DriveScheme::two_photon(midpoint_waveform(100.0, -0.5), 350.0, 5000.0);
        let plain = build(two.clone(), Manifold::DoubleExcitation, blockade);
        let shifted = LevelSystem::new(two, Manifold::DoubleExcitation, blockade, DopplerShift::new(0.3)).unwrap();
        for direction in [PulseDirection::Forward, PulseDirection::Reverse] {
            let h0 = plain.hamiltonian(0.37, direction).unwrap();
            let h1 = shifted.hamiltonian(0.37, direction).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    let d = h1[(i, j)] - h0[(i, j)];
                    let n = f64::from(plain.states()[i].rydberg_excitations());
                    let want = if i == j { TAU * 0.3 * direction.sign() * n } else { 0.0 };
                    assert_abs_diff_eq!(d.re, want, epsilon = 1e-9);
                    assert_eq!(d.im, 0.0);
                }
            }
        }
    }

    #[test]
    fn configuration_errors() {
        let w = midpoint_waveform(1.0, 0.0);
        let bad = DriveScheme::two_photon(w.clone(), 0.0, 5000.0);
        assert!(matches!(
            LevelSystem::new(bad, Manifold::SingleExcitation, BlockadeModel::Idealized, DopplerShift::NONE),
            Err(Error::Configuration(_))
        ));
        let blockade = BlockadeModel::Forster { coupling_mhz: -1.0, penalty_mhz: 0.0 };
        assert!(LevelSystem::new(DriveScheme::one_photon(w), Manifold::DoubleExcitation, blockade, DopplerShift::NONE)
            .is_err());
    }

    #[test]
    fn negative_amplitude_is_rejected_unless_ignored() {
        let w = WaveformSpec::new(SineSeries::new(vec![1.0, 2.0]), CosineSeries::constant(0.0));
        let drive = DriveScheme::one_photon(w);
        let err =
            LevelSystem::new(drive.clone(), Manifold::SingleExcitation, BlockadeModel::Idealized, DopplerShift::NONE);
        assert!(matches!(err, Err(Error::NegativeAmplitude { .. })));
        let sys = LevelSystem::with_physicality(
            drive,
            Manifold::SingleExcitation,
            BlockadeModel::Idealized,
            DopplerShift::NONE,
            Physicality::Ignore,
        )
        .unwrap();
        assert!(sys.hamiltonian(0.5, PulseDirection::Forward).unwrap()[(0, 1)].re < 0.0);
    }

    #[test]
    fn hermiticity_check_detects_asymmetry() {
        let mut m = CMatrix::zeros(2);
        m[(0, 1)] = real(1.0);
        assert!(!hermiticity_check(&m));
        m[(1, 0)] = real(1.0);
        assert!(hermiticity_check(&m));
    }
}
