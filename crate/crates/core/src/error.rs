use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {name} = {value} ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("density of states N0 is required for this operation but was not supplied")]
    MissingDensityOfStates,

    #[error("value {value} is outside the invertible range [0, {max}]")]
    OutOfRange { value: f64, max: f64 },

    #[error("sampling too coarse: dt * f_c = {product} (must be < 0.1)")]
    SamplingTooCoarse { product: f64 },

    #[error("integration step {dt} s exceeds the stability bound {max} s")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("lookup table extrapolation: {x} outside [{lo}, {hi}]")]
    Extrapolation { x: f64, lo: f64, hi: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("insufficient frequency span: {0}")]
    InsufficientSpan(String),

    #[error("circle fit degenerate: points are collinear or coincident")]
    CircleDegenerate,

    #[error("singular Jacobian: parameter covariance cannot be computed")]
    SingularJacobian,

    #[error("curve never drops below -3 dB within the swept range")]
    NoCrossing,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}
