use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "quadrature did not converge: estimate {estimate:e}, error {error:e} exceeds tolerance {tolerance:e}"
    )]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("E = {energy} lies on a support endpoint; principal value is singular")]
    SingularEndpoint { energy: f64 },

    #[error("E = {energy} lies inside the continuum [{lo}, {hi}]")]
    InsideContinuum { energy: f64, lo: f64, hi: f64 },

    #[error("frequency {0} lies outside the support of J; Markov rate undefined")]
    OutsideSupport(f64),

    #[error("propagator unstable: |u| = {modulus} at t = {time} exceeds 1 + {slack:e}")]
    Unstable { time: f64, modulus: f64, slack: f64 },

    #[error("non-finite memory kernel value at x = {0}")]
    NonFiniteKernel(f64),

    #[error("|u| = {modulus:e} at t = {time} is below {threshold:e}; Gamma/Omega undefined")]
    CoefficientSingularity {
        time: f64,
        modulus: f64,
        threshold: f64,
    },

    #[error("|u| = {0} exceeds 1")]
    UnphysicalPropagator(f64),

    #[error("unphysical Gaussian coefficients: fidelity denominator {0} <= 0")]
    UnphysicalCoefficients(f64),

    #[error("malformed spectral table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
