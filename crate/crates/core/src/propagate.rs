//! Adaptive integration of the time-dependent Schrödinger equation
//! `dψ/dt = -i H(t/T_p) ψ` with the Dormand–Prince 8(5,3) pair.
//!
//! Step acceptance charges the local error per unit step, so `rel_tol` also
//! bounds the error accumulated over a pulse (up to a round-off floor).
//!
//! Integration runs in the frame the Hamiltonian is written in. Nothing is
//! eliminated, so a 5 GHz intermediate detuning is resolved step by step.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{self, CMatrix, C64};
use crate::{Error, Result};

/// Direction of a pulse relative to the first one. It sets the sign of the
/// Doppler shift.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseDirection {
    Forward,
    Reverse,
}

impl PulseDirection {
    pub fn sign(self) -> f64 {
        match self {
            PulseDirection::Forward => 1.0,
            PulseDirection::Reverse => -1.0,
        }
    }
}

/// A Hamiltonian sampled at normalized time `x ∈ [0, 1]` within one pulse, in rad/µs.
pub trait Hamiltonian {
    fn dim(&self) -> usize;

    fn write(&self, x: f64, direction: PulseDirection, out: &mut CMatrix) -> Result<()>;

    /// Interior points of `(0, 1)` where the Hamiltonian may jump.
    ///
    /// The integrator stops exactly on each one and never samples a segment
    /// at the far side of a breakpoint, so either one-sided limit may be
    /// returned there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScheduleKind {
    Single,
    /// The same waveform twice back to back, the second pulse counter-propagating.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSchedule {
    pub kind: ScheduleKind,
    /// Duration of one pulse in µs.
    pub duration_us: f64,
}

impl PulseSchedule {
    pub fn single(duration_us: f64) -> Self {
        Self { kind: ScheduleKind::Single, duration_us }
    }

    pub fn dual(duration_us: f64) -> Self {
        Self { kind: ScheduleKind::Dual, duration_us }
    }

    pub fn with_duration(self, duration_us: f64) -> Self {
        Self { duration_us, ..self }
    }

    pub fn pulses(&self) -> &'static [PulseDirection] {
        match self.kind {
            ScheduleKind::Single => &[PulseDirection::Forward],
            ScheduleKind::Dual => &[PulseDirection::Forward, PulseDirection::Reverse],
        }
    }

    pub fn total_duration_us(&self) -> f64 {
        self.pulses().len() as f64 * self.duration_us
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_us.is_finite() && self.duration_us > 0.0) {
            return Err(Error::InvalidArgument("pulse duration must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    /// Relative error tolerance, within `[1e-13, 1e-6]`.
    pub rel_tol: f64,
    /// Absolute floor of the error scale. Defaults to `rel_tol`.
    pub abs_tol: Option<f64>,
    pub max_steps: usize,
    /// Uniformly spaced trajectory samples per pulse, endpoints included. Zero disables recording.
    pub samples_per_pulse: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: None, max_steps: 50_000_000, samples_per_pulse: 0 }
    }
}

impl PropagationOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }

    pub fn recording(self, samples_per_pulse: usize) -> Self {
        Self { samples_per_pulse, ..self }
    }
}

/// Sampled states along a propagation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times_us: Vec<f64>,
    pub states: Vec<Vec<C64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().map(|s| (linalg::norm(s) - 1.0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub state: Vec<C64>,
    pub trajectory: Option<Trajectory>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Elementwise squared magnitudes.
pub fn populations(psi: &[C64]) -> Vec<f64> {
    psi.iter().map(|z| z.norm_sqr()).collect()
}

/// Dormand–Prince 8(5,3) tableau, as published by Hairer and Wanner.
#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod dop853 {
    pub(super) const STAGES: usize = 12;

    pub(super) const C: [f64; STAGES] = [
        0.0,
        0.526001519587677318785587544488e-01,
        0.789002279381515978178381316732e-01,
        0.118350341907227396726757197510,
        0.281649658092772603273242802490,
        0.333333333333333333333333333333,
        0.25,
        0.307692307692307692307692307692,
        0.651282051282051282051282051282,
        0.6,
        0.857142857142857142857142857142,
        1.0,
    ];

    pub(super) const A: [[f64; STAGES]; STAGES] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [5.26001519587677318785587544488e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [
            1.97250569845378994544595329183e-2,
            5.91751709536136983633785987549e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2.95875854768068491816892993775e-2,
            0.0,
            8.87627564304205475450678981324e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            2.41365134159266685502369798665e-1,
            0.0,
            -8.84549479328286085344864962717e-1,
            9.24834003261792003115737966543e-1,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.7037037037037037037037037037e-2,
            0.0,
            0.0,
            1.70828608729473871279604482173e-1,
            1.25467687566822425016691814123e-1,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.7109375e-2,
            0.0,
            0.0,
            1.70252211019544039314978060272e-1,
            6.02165389804559606850219397283e-2,
            -1.7578125e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            3.70920001185047927108779319836e-2,
            0.0,
            0.0,
            1.70383925712239993810214054705e-1,
            1.07262030446373284651809199168e-1,
            -1.53194377486244017527936158236e-2,
            8.27378916381402288758473766002e-3,
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            6.24110958716075717114429577812e-1,
            0.0,
            0.0,
            -3.36089262944694129406857109825,
            -8.68219346841726006818189891453e-1,
            2.75920996994467083049415600797e1,
            2.01540675504778934086186788979e1,
            -4.34898841810699588477366255144e1,
            0.0,
            0.0,
            0.0,
            0.0,
        ],
        [
            4.77662536438264365890433908527e-1,
            0.0,
            0.0,
            -2.48811461997166764192642586468,
            -5.90290826836842996371446475743e-1,
            2.12300514481811942347288949897e1,
            1.52792336328824235832596922938e1,
            -3.32882109689848629194453265587e1,
            -2.03312017085086261358222928593e-2,
            0.0,
            0.0,
            0.0,
        ],
        [
            -9.3714243008598732571704021658e-1,
            0.0,
            0.0,
            5.18637242884406370830023853209,
            1.09143734899672957818500254654,
            -8.14978701074692612513997267357,
            -1.85200656599969598641566180701e1,
            2.27394870993505042818970056734e1,
            2.49360555267965238987089396762,
            -3.0467644718982195003823669022,
            0.0,
            0.0,
        ],
        [
            2.27331014751653820792359768449,
            0.0,
            0.0,
            -1.05344954667372501984066689879e1,
            -2.00087205822486249909675718444,
            -1.79589318631187989172765950534e1,
            2.79488845294199600508499808837e1,
            -2.85899827713502369474065508674,
            -8.87285693353062954433549289258,
            1.23605671757943030647266201528e1,
            6.43392746015763530355970484046e-1,
            0.0,
        ],
    ];

    pub(super) const B: [f64; STAGES] = [
        5.42937341165687622380535766363e-2,
        0.0,
        0.0,
        0.0,
        0.0,
        4.45031289275240888144113950566,
        1.89151789931450038304281599044,
        -5.8012039600105847814672114227,
        3.1116436695781989440891606237e-1,
        -1.52160949662516078556178806805e-1,
        2.01365400804030348374776537501e-1,
        4.47106157277725905176885569043e-2,
    ];

    /// Fifth-order error weights over the twelve stages plus the FSAL stage.
    pub(super) const E5: [f64; STAGES + 1] = [
        0.1312004499419488073250102996e-1,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.1225156446376204440720569753e+1,
        -0.4957589496572501915214079952,
        0.1664377182454986536961530415e+1,
        -0.3503288487499736816886487290,
        0.3341791187130174790297318841,
        0.8192320648511571246570742613e-1,
        -0.2235530786388629525884427845e-1,
        0.0,
    ];

    pub(super) const E3: [f64; STAGES + 1] = [
        -0.18980075407240762,
        0.0,
        0.0,
        0.0,
        0.0,
        4.450312892752409,
        1.8915178993145003,
        -5.801203960010585,
        -0.4226823213237919,
        -0.1521609496625161,
        0.20136540080403034,
        0.02265179219836082,
        0.0,
    ];
}

use dop853::{A, B, C, E3, E5, STAGES};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
/// Smallest per-step tolerance relative to the state scale; below this the error estimate is round-off.
const LOCAL_TOL_FLOOR: f64 = 1e-15;

struct Stepper<'a, H: Hamiltonian> {
    system: &'a H,
    direction: PulseDirection,
    duration: f64,
    /// Evaluation window of the current segment between breakpoints.
    window: (f64, f64),
    h: CMatrix,
}

impl<H: Hamiltonian> Stepper<'_, H> {
    /// `out = -i H(t / T) y`
    fn derivative(&mut self, t: f64, y: &[C64], out: &mut [C64]) -> Result<()> {
        let x = (t.clamp(self.window.0, self.window.1) / self.duration).clamp(0.0, 1.0);
        self.system.write(x, self.direction, &mut self.h)?;
        self.h.apply(y, out);
        for z in out.iter_mut() {
            *z = C64::new(z.im, -z.re);
        }
        Ok(())
    }
}

/// Propagates `psi0` through every pulse of `schedule`.
///
/// The state is carried across the pulse boundary of a dual schedule as is.
pub fn propagate<H: Hamiltonian>(
    system: &H,
    schedule: &PulseSchedule,
    psi0: &[C64],
    options: &PropagationOptions,
) -> Result<Propagation> {
    schedule.validate()?;
    if !(1e-13..=1e-6).contains(&options.rel_tol) {
        return Err(Error::InvalidArgument("rel_tol must lie in [1e-13, 1e-6]"));
    }
    let n = system.dim();
    if psi0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: psi0.len() });
    }
    let norm0 = linalg::norm(psi0);
    if (norm0 - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized { norm: norm0 });
    }

    let mut psi = psi0.to_vec();
    let mut trajectory = (options.samples_per_pulse > 0).then(Trajectory::default);
    let mut accepted = 0;
    let mut rejected = 0;
    for (p, &direction) in schedule.pulses().iter().enumerate() {
        let offset = p as f64 * schedule.duration_us;
        let stats =
            integrate_pulse(system, direction, schedule.duration_us, offset, &mut psi, options, trajectory.as_mut())?;
        accepted += stats.0;
        rejected += stats.1;
    }
    Ok(Propagation { state: psi, trajectory, accepted_steps: accepted, rejected_steps: rejected })
}

fn integrate_pulse<H: Hamiltonian>(
    system: &H,
    direction: PulseDirection,
    duration: f64,
    offset: f64,
    y: &mut [C64],
    options: &PropagationOptions,
    mut trajectory: Option<&mut Trajectory>,
) -> Result<(usize, usize)> {
    let n = y.len();
    let rtol = options.rel_tol;
    let atol = options.abs_tol.unwrap_or(rtol);
    let mut stepper = Stepper { system, direction, duration, window: (0.0, duration), h: CMatrix::zeros(n) };

    let mut stops: Vec<f64> =
        system.breakpoints().into_iter().filter(|x| *x > 0.0 && *x < 1.0).map(|x| x * duration).collect();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    // Evaluations are pulled this far inside a segment so rounding in `t / T`
    // cannot land on the wrong side of a breakpoint.
    let nudge = 1e-12 * duration;
    let window = |stop: usize, start: f64| {
        let lo = if stop > 0 { start + nudge } else { 0.0 };
        let hi = stops.get(stop).map_or(duration, |&b| b - nudge);
        (lo, hi)
    };
    let mut next_stop = 0;

    let zero = C64::new(0.0, 0.0);
    // Stage derivatives, plus the derivative at the step end reused as the next first stage.
    let mut k = vec![vec![zero; n]; STAGES + 1];
    let mut stage = vec![zero; n];
    let mut y_new = vec![zero; n];

    let samples = options.samples_per_pulse;
    let sample_time = |i: usize| duration * i as f64 / (samples.max(2) - 1) as f64;
    // The first sample of a later pulse repeats the last one of the previous pulse.
    let mut next_sample = usize::from(offset > 0.0);
    let record = |t: f64, state: &[C64], next: &mut usize, traj: &mut Option<&mut Trajectory>| {
        if let Some(traj) = traj.as_deref_mut() {
            if *next < samples && (t - sample_time(*next)).abs() <= 1e-12 * duration {
                traj.times_us.push(offset + t);
                traj.states.push(state.to_vec());
                *next += 1;
            }
        }
    };

    let mut t = 0.0;
    stepper.window = window(next_stop, t);
    stepper.derivative(t, y, &mut k[0])?;
    record(t, y, &mut next_sample, &mut trajectory);

    // Initial step from the Hamiltonian scale.
    let scale = stepper.h.norm_inf().max(1.0 / duration);
    let mut step = (0.05 / scale).min(0.01 * duration);
    let min_step = 1e-14 * duration.max(1.0);

    let mut accepted = 0usize;
    let mut rejected = 0usize;
    while t < duration {
        if accepted + rejected >= options.max_steps {
            return Err(Error::StepLimit { time_us: offset + t, steps: options.max_steps });
        }
        let mut end = duration;
        if trajectory.is_some() && next_sample < samples {
            end = end.min(sample_time(next_sample));
        }
        if let Some(&b) = stops.get(next_stop) {
            end = end.min(b);
        }
        let lands = step >= end - t;
        let h = if lands { end - t } else { step };
        if h < min_step && !lands {
            return Err(Error::StepSizeUnderflow { time_us: offset + t, step_us: h });
        }
        let t_new = if lands { end } else { t + h };

        for s in 1..STAGES {
            for i in 0..n {
                let mut acc = zero;
                for (kj, &a) in k[..s].iter().zip(&A[s][..s]) {
                    if a != 0.0 {
                        acc += kj[i] * a;
                    }
                }
                stage[i] = y[i] + acc * h;
            }
            let ts = if s == STAGES - 1 { t_new } else { t + C[s] * h };
            stepper.derivative(ts, &stage, &mut k[s])?;
        }
        for i in 0..n {
            let mut acc = zero;
            for (kj, &b) in k[..STAGES].iter().zip(&B) {
                if b != 0.0 {
                    acc += kj[i] * b;
                }
            }
            y_new[i] = y[i] + acc * h;
        }
        stepper.derivative(t_new, &y_new, &mut k[STAGES])?;

        // Hairer's blended 5th/3rd-order estimate, charged per unit step so that
        // the accumulated error over the pulse stays near the tolerance.
        let (mut err5, mut err3) = (0.0, 0.0);
        for i in 0..n {
            let (mut e5, mut e3) = (zero, zero);
            for (kj, (&w5, &w3)) in k.iter().zip(E5.iter().zip(&E3)) {
                e5 += kj[i] * w5;
                e3 += kj[i] * w3;
            }
            let sc = atol + rtol * y[i].norm().max(y_new[i].norm());
            err5 += e5.norm_sqr() / (sc * sc);
            err3 += e3.norm_sqr() / (sc * sc);
        }
        let local =
            if err5 == 0.0 && err3 == 0.0 { 0.0 } else { h * err5 / libm::sqrt((err5 + 0.01 * err3) * n as f64) };
        let budget = (h / duration).max(LOCAL_TOL_FLOOR / rtol).min(1.0);
        let err = local / budget;

        if err <= 1.0 {
            t = t_new;
            y.copy_from_slice(&y_new);
            k.swap(0, STAGES);
            accepted += 1;
            record(t, y, &mut next_sample, &mut trajectory);
            if stops.get(next_stop) == Some(&t) {
                next_stop += 1;
                stepper.window = window(next_stop, t);
                stepper.derivative(t, y, &mut k[0])?;
            }
            let factor = if err == 0.0 { MAX_FACTOR } else { SAFETY * libm::pow(err, -1.0 / 8.0) };
            // A step clipped to land on an output time says nothing about the natural step.
            let base = if lands { step.max(h) } else { h };
            step = base * factor.clamp(MIN_FACTOR, MAX_FACTOR);
        } else {
            rejected += 1;
            let factor = (SAFETY * libm::pow(err, -1.0 / 8.0)).clamp(MIN_FACTOR, 1.0);
            step = h * factor;
            if step < min_step {
                return Err(Error::StepSizeUnderflow { time_us: offset + t, step_us: step });
            }
        }
    }
    Ok((accepted, rejected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_is_consistent() {
        for s in 0..STAGES {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-13, "row {s}");
            assert!(A[s][s..].iter().all(|&a| a == 0.0));
        }
        assert!((E5.iter().sum::<f64>()).abs() < 1e-14);
        assert!((E3.iter().sum::<f64>()).abs() < 1e-14);
        // Quadrature conditions Σ b_i c_i^(q-1) = 1/q up to eighth order.
        for q in 1..=8 {
            let s: f64 = B.iter().zip(C).map(|(b, c)| b * libm::pow(c, (q - 1) as f64)).sum();
            assert!((s - 1.0 / q as f64).abs() < 1e-13, "q = {q}");
        }
        // A few tree conditions of orders 3 and 4.
        let ac: [f64; STAGES] = core::array::from_fn(|i| (0..STAGES).map(|j| A[i][j] * C[j]).sum());
        let bac: f64 = B.iter().zip(&ac).map(|(b, x)| b * x).sum();
        assert!((bac - 1.0 / 6.0).abs() < 1e-13);
        let bcac: f64 = (0..STAGES).map(|i| B[i] * C[i] * ac[i]).sum();
        assert!((bcac - 1.0 / 8.0).abs() < 1e-13);
        let aac: [f64; STAGES] = core::array::from_fn(|i| (0..STAGES).map(|j| A[i][j] * ac[j]).sum());
        let baac: f64 = B.iter().zip(&aac).map(|(b, x)| b * x).sum();
        assert!((baac - 1.0 / 24.0).abs() < 1e-13);
    }

    #[test]
    fn populations_of_simple_states() {
        assert_eq!(populations(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]), vec![1.0, 0.0]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let p = populations(&[C64::new(s, 0.0), C64::new(0.0, s)]);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn schedule_durations() {
        assert_eq!(PulseSchedule::dual(0.25).total_duration_us(), 0.5);
        assert_eq!(PulseSchedule::single(0.25).total_duration_us(), 0.25);
        assert!(PulseSchedule::single(0.0).validate().is_err());
    }
}
