//! Frequency-adjusted waveform bases.
//!
//! Amplitude waveforms live in the span of odd sine harmonics
//! `sin((2k-1)πx)` on normalized time `x ∈ [0, 1]`, so they start and end at
//! zero and are symmetric about `x = 1/2`. The adjusted basis functions `u_j`
//! and `v_j` are symmetrized Bernstein polynomials, extended as odd functions
//! onto `[-1, 1]`, expanded in a Fourier series and truncated after a few
//! harmonics. Detuning waveforms are a constant plus cosine harmonics
//! `cos(2mπx)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::quadrature;
use crate::{Error, Result};

/// Grid used for the non-negativity check and for penalty integrals.
pub const PHYSICALITY_GRID: usize = 2001;

/// Quadrature tolerance used by [`project_to_sine_series`].
pub const PROJECTION_TOL: f64 = 1e-11;

/// Endpoint tolerance for the odd-extension precondition.
const ENDPOINT_TOL: f64 = 1e-12;

/// The Bernstein polynomial `C(n, ν) x^ν (1 - x)^(n - ν)`.
pub fn bernstein(index: usize, degree: usize, x: f64) -> Result<f64> {
    if index > degree {
        return Err(Error::BernsteinIndex { index, degree });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { x });
    }
    Ok(binomial(degree, index) * powu(x, index) * powu(1.0 - x, degree - index))
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn powu(base: f64, exp: usize) -> f64 {
    (0..exp).fold(1.0, |acc, _| acc * base)
}

/// Truncation of a harmonic series above a cutoff index.
///
/// The operation is linear and idempotent. Coefficients are zeroed rather than
/// dropped so the series keeps its length.
pub trait HarmonicSeries: Sized {
    fn suppress_high_frequency(&self, cutoff: usize) -> Self;
}

pub fn suppress_high_frequency<S: HarmonicSeries>(series: &S, cutoff: usize) -> S {
    series.suppress_high_frequency(cutoff)
}

/// `Σ_k c_k sin((2k-1)πx)`, `k = 1..=K`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SineSeries {
    pub coeffs: Vec<f64>,
}

impl SineSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn harmonics(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, c)| c * libm::sin((2 * k + 1) as f64 * PI * x)).sum()
    }

    /// `self + scale * other`, padding the shorter series with zeros.
    pub fn add_scaled(&self, scale: f64, other: &SineSeries) -> SineSeries {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).copied().unwrap_or(0.0) + scale * other.coeffs.get(k).copied().unwrap_or(0.0))
            .collect();
        SineSeries { coeffs }
    }
}

impl HarmonicSeries for SineSeries {
    fn suppress_high_frequency(&self, cutoff: usize) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(k, &c)| if k < cutoff { c } else { 0.0 }).collect();
        SineSeries { coeffs }
    }
}

/// `constant + Σ_m d_m cos(2mπx)`, `m = 1..=M`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CosineSeries {
    pub constant: f64,
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn new(constant: f64, coeffs: Vec<f64>) -> Self {
        Self { constant, coeffs }
    }

    pub fn constant(value: f64) -> Self {
        Self { constant: value, coeffs: Vec::new() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.constant
            + self.coeffs.iter().enumerate().map(|(m, d)| d * libm::cos(2.0 * (m + 1) as f64 * PI * x)).sum::<f64>()
    }
}

impl HarmonicSeries for CosineSeries {
    /// The constant term is harmonic zero and always survives.
    fn suppress_high_frequency(&self, cutoff: usize) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(m, &d)| if m < cutoff { d } else { 0.0 }).collect();
        CosineSeries { constant: self.constant, coeffs }
    }
}

/// Projects `p` onto the odd sine harmonics: `c_k = 2 ∫₀¹ p(x) sin((2k-1)πx) dx`.
///
/// `p` must vanish at both endpoints so its odd extension onto `[-1, 1]` is
/// continuous.
pub fn project_to_sine_series<F: Fn(f64) -> f64>(p: F, harmonics: usize) -> Result<SineSeries> {
    if harmonics == 0 {
        return Err(Error::InvalidArgument("projection needs at least one harmonic"));
    }
    for at in [0.0, 1.0] {
        let value = p(at);
        if value.abs() > ENDPOINT_TOL || !value.is_finite() {
            return Err(Error::EndpointNotZero { at, value });
        }
    }
    let coeffs = (1..=harmonics)
        .map(|k| {
            let freq = (2 * k - 1) as f64 * PI;
            quadrature::integrate(|x| p(x) * libm::sin(freq * x), 0.0, 1.0, PROJECTION_TOL).map(|v| 2.0 * v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SineSeries { coeffs })
}

/// The two families of frequency-adjusted basis functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisFamily {
    /// `u_j ~ b_{j,10} + b_{10-j,10}`, `j = 1..=5`, three harmonics.
    U,
    /// `v_j ~ b_{j,12} + b_{12-j,12}`, `j = 1..=6`, four harmonics.
    V,
}

const U_TABLE: [[f64; 3]; 5] = [
    [0.1710, 0.2316, 0.1158],
    [0.2382, 0.1568, -0.0013],
    [0.2887, 0.0220, -0.0408],
    [0.3199, -0.0986, -0.0081],
    [0.3305, -0.1463, 0.0173],
];

const V_TABLE: [[f64; 4]; 6] = [
    [0.1273, 0.2079, 0.1310, 0.0682],
    [0.1806, 0.1793, 0.0282, -0.0085],
    [0.2242, 0.0892, -0.0416, -0.0191],
    [0.2566, -0.0210, -0.0386, -0.0025],
    [0.2766, -0.1085, 0.0039, 0.0028],
    [0.2833, -0.1416, 0.0272, 0.0009],
];

impl BasisFamily {
    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::U => "u",
            BasisFamily::V => "v",
        }
    }

    pub fn degree(self) -> usize {
        match self {
            BasisFamily::U => 10,
            BasisFamily::V => 12,
        }
    }

    /// Number of basis functions `j = 1..=functions`.
    pub fn functions(self) -> usize {
        match self {
            BasisFamily::U => 5,
            BasisFamily::V => 6,
        }
    }

    pub fn harmonics(self) -> usize {
        match self {
            BasisFamily::U => 3,
            BasisFamily::V => 4,
        }
    }

    /// The symmetrized Bernstein polynomial `b_{j,n} + b_{n-j,n}` behind basis function `j` (1-based).
    pub fn generator(self, j: usize) -> Result<impl Fn(f64) -> f64> {
        let n = self.degree();
        if j == 0 || j > self.functions() {
            return Err(Error::BernsteinIndex { index: j, degree: n });
        }
        Ok(move |x: f64| {
            let x = x.clamp(0.0, 1.0);
            bernstein(j, n, x).unwrap_or(0.0) + bernstein(n - j, n, x).unwrap_or(0.0)
        })
    }
}

/// Truncated sine-series coefficients of one basis family, one row per basis function.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjustedBasisTable {
    pub family: BasisFamily,
    pub rows: Vec<SineSeries>,
}

impl AdjustedBasisTable {
    /// The published four-decimal table for `family`.
    pub fn builtin(family: BasisFamily) -> Self {
        let rows = match family {
            BasisFamily::U => U_TABLE.iter().map(|r| SineSeries::new(r.to_vec())).collect(),
            BasisFamily::V => V_TABLE.iter().map(|r| SineSeries::new(r.to_vec())).collect(),
        };
        Self { family, rows }
    }

    /// Recomputes the table by projecting each generator onto the sine harmonics.
    pub fn projected(family: BasisFamily) -> Result<Self> {
        let rows = (1..=family.functions())
            .map(|j| project_to_sine_series(family.generator(j)?, family.harmonics()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, rows })
    }

    pub fn row(&self, j: usize) -> Option<&SineSeries> {
        j.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    /// `Σ_j coeffs[j] · row_j`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<SineSeries> {
        if coeffs.len() != self.rows.len() {
            return Err(Error::DimensionMismatch { expected: self.rows.len(), found: coeffs.len() });
        }
        let zero = SineSeries::new(vec![0.0; self.family.harmonics()]);
        Ok(self.rows.iter().zip(coeffs).fold(zero, |acc, (row, &c)| acc.add_scaled(c, row)))
    }
}

/// The published `u` (5×3) and `v` (6×4) tables.
pub fn builtin_tables() -> (AdjustedBasisTable, AdjustedBasisTable) {
    (AdjustedBasisTable::builtin(BasisFamily::U), AdjustedBasisTable::builtin(BasisFamily::V))
}

/// Coordinates in which an amplitude waveform is specified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmplitudeBasis {
    Adjusted(BasisFamily),
    /// Raw odd harmonics; coefficient `k` multiplies `sin((2k-1)πx)`.
    Sine,
}

impl AmplitudeBasis {
    /// Number of coefficients the basis expects, `None` when any count works.
    pub fn dimension(self) -> Option<usize> {
        match self {
            AmplitudeBasis::Adjusted(f) => Some(f.functions()),
            AmplitudeBasis::Sine => None,
        }
    }

    pub fn synthesize(self, coeffs: &[f64]) -> Result<SineSeries> {
        match self {
            AmplitudeBasis::Adjusted(f) => AdjustedBasisTable::builtin(f).combine(coeffs),
            AmplitudeBasis::Sine => Ok(SineSeries::new(coeffs.to_vec())),
        }
    }
}

/// Amplitude and detuning waveforms over normalized time `x = t / T_p`.
///
/// Values are frequency/2π in MHz.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WaveformSpec {
    pub amplitude: SineSeries,
    pub detuning: CosineSeries,
}

impl WaveformSpec {
    pub fn new(amplitude: SineSeries, detuning: CosineSeries) -> Self {
        Self { amplitude, detuning }
    }

    /// `(Ω/2π, Δ/2π)` at `x`, both in MHz.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.amplitude.eval(x), self.detuning.eval(x))
    }

    /// Smallest amplitude on the physicality grid, with its location.
    pub fn min_amplitude(&self) -> (f64, f64) {
        grid(PHYSICALITY_GRID).map(|x| (x, self.amplitude.eval(x))).fold((0.0, f64::INFINITY), |best, (x, v)| {
            if v < best.1 {
                (x, v)
            } else {
                best
            }
        })
    }

    pub fn peak_amplitude(&self) -> f64 {
        grid(PHYSICALITY_GRID).map(|x| self.amplitude.eval(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_physical(&self) -> bool {
        self.check_physical().is_ok()
    }

    pub fn check_physical(&self) -> Result<()> {
        let (x, value) = self.min_amplitude();
        if value < -NEGATIVITY_TOL {
            return Err(Error::NegativeAmplitude { x, value_mhz: value });
        }
        Ok(())
    }
}

/// Amplitudes this far below zero count as rounding noise at the endpoints.
pub(crate) const NEGATIVITY_TOL: f64 = 1e-9;

/// A waveform given in basis coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveformTemplate {
    pub basis: AmplitudeBasis,
    pub amplitude: Vec<f64>,
    pub detuning: CosineSeries,
}

impl WaveformTemplate {
    pub fn waveform(&self) -> Result<WaveformSpec> {
        Ok(WaveformSpec::new(self.basis.synthesize(&self.amplitude)?, self.detuning.clone()))
    }
}

/// `n` uniform points on `[0, 1]`, endpoints included.
pub fn grid(n: usize) -> impl Iterator<Item = f64> + Clone {
    let last = n.saturating_sub(1).max(1) as f64;
    (0..n).map(move |i| i as f64 / last)
}
