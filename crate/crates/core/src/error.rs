use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("lattice has {sites} sites, cap is {cap}")]
    LatticeTooLarge { sites: usize, cap: usize },

    #[error("invalid region: {0}")]
    Region(String),

    #[error("site index {index} out of range for {sites} sites")]
    SiteIndex { index: usize, sites: usize },

    #[error("cost exponent {0} outside (0, 1]")]
    CostExponent(f64),

    #[error("Fock sector dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: u128, cap: usize },

    #[error("state is invalid: {0}")]
    State(String),

    #[error("model is invalid: {0}")]
    Model(String),

    #[error("hopping amplitude between sites {i} and {j} is {value}, decay certificate allows {limit}")]
    HoppingDecay { i: usize, j: usize, value: f64, limit: f64 },

    #[error("norm drifted by {drift:e} at t = {time}")]
    NormDrift { drift: f64, time: f64 },

    #[error("Krylov exponential failed to converge: {0}")]
    Krylov(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("linear program: {0}")]
    Lp(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
