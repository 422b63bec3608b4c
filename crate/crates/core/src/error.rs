use thiserror::Error;

/// Failure kinds shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size limit: {what} = {value} exceeds {limit}; pass accept_exponential_cost to override")]
    SizeLimit {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("connectivity error: {0}")]
    Connectivity(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("numeric error: {message} (achieved {achieved:e})")]
    Numeric { message: String, achieved: f64 },
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn numeric(msg: impl Into<String>, achieved: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            achieved,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Caller-controlled guard for routines whose cost grows factorially or exponentially.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostGuard {
    pub accept_exponential_cost: bool,
}

impl CostGuard {
    pub const ACCEPT: CostGuard = CostGuard {
        accept_exponential_cost: true,
    };

    pub fn check(&self, what: &'static str, value: u64, limit: u64) -> Result<()> {
        if value > limit && !self.accept_exponential_cost {
            return Err(Error::SizeLimit { what, value, limit });
        }
        Ok(())
    }
}
