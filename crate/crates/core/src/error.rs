use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("point is not on the boundary (distance {0:e})")]
    NotOnBoundary(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported wavelet order {0} (supported: 2..=10)")]
    UnsupportedOrder(usize),

    #[error("coarse level {requested} is infeasible; the smallest feasible level is {minimal}")]
    InfeasibleLevel { requested: u32, minimal: u32 },

    #[error("field is not identically one outside the interior region (max deviation {0:e})")]
    NotOneOutside(f64),

    #[error("field lower bound violated: min {min} < {bound}")]
    LowerBound { min: f64, bound: f64 },

    #[error("no observation starts inside the regression region")]
    NoActiveRows,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver did not converge (residual {0:e})")]
    NonConvergence(f64),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::NonConvergence(_) | Error::NoActiveRows => 3,
            _ => 2,
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
