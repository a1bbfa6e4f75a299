use alloc::boxed::Box;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Bernstein index larger than the polynomial degree.
    BernsteinIndex {
        index: usize,
        degree: usize,
    },
    /// Normalized time outside `[0, 1]`.
    OutOfDomain {
        x: f64,
    },
    /// A polynomial handed to the sine projection does not vanish at an endpoint.
    EndpointNotZero {
        at: f64,
        value: f64,
    },
    /// Adaptive quadrature could not reach its tolerance.
    QuadratureFailed {
        a: f64,
        b: f64,
    },
    InvalidArgument(&'static str),
    /// Coefficient vector length does not match the basis dimension.
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    /// Invalid drive, blockade or manifold parameters.
    Configuration(&'static str),
    /// Rabi amplitude below zero at normalized time `x`.
    NegativeAmplitude {
        x: f64,
        value_mhz: f64,
    },
    NotNormalized {
        norm: f64,
    },
    /// The adaptive integrator needed a step smaller than its floor.
    StepSizeUnderflow {
        time_us: f64,
        step_us: f64,
    },
    StepLimit {
        time_us: f64,
        steps: usize,
    },
    /// A return amplitude is zero, so its phase is undefined.
    UndefinedPhase,
    /// A point of a Doppler sweep failed.
    SweepPoint {
        shift_mhz: f64,
        source: Box<Error>,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::BernsteinIndex { index, degree } => {
                write!(f, "Bernstein index {index} exceeds degree {degree}")
            }
            Error::OutOfDomain { x } => write!(f, "normalized time {x} is outside [0, 1]"),
            Error::EndpointNotZero { at, value } => {
                write!(f, "polynomial must vanish at x = {at}, found {value:e}")
            }
            Error::QuadratureFailed { a, b } => {
                write!(f, "adaptive quadrature did not converge on [{a}, {b}]")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} coefficients, found {found}")
            }
            Error::Configuration(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NegativeAmplitude { x, value_mhz } => {
                write!(f, "Rabi amplitude is negative ({value_mhz} MHz) at x = {x}")
            }
            Error::NotNormalized { norm } => write!(f, "initial state has norm {norm}"),
            Error::StepSizeUnderflow { time_us, step_us } => {
                write!(f, "step size underflow at t = {time_us} us (step {step_us:e} us)")
            }
            Error::StepLimit { time_us, steps } => {
                write!(f, "step limit of {steps} reached at t = {time_us} us")
            }
            Error::UndefinedPhase => f.write_str("phase of a zero amplitude is undefined"),
            Error::SweepPoint { shift_mhz, source } => {
                write!(f, "Doppler shift {shift_mhz} MHz: {source}")
            }
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::SweepPoint { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
