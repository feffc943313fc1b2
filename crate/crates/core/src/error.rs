use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    Domain {
        name: &'static str,
        value: f64,
        range: String,
    },
    #[error("distortion {distortion} is outside the interior regime (0, {limit})")]
    Regime { distortion: f64, limit: f64 },
    #[error("blocklength must be at least 1")]
    EmptyBlock,
    #[error("{what}: requested {requested} exceeds the limit {limit}")]
    Resource {
        what: &'static str,
        requested: u128,
        limit: u128,
    },
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("cumulant order {0} is outside 2..=6")]
    Order(usize),
    #[error("the symmetric chain a = b has a degenerate {0}")]
    Degenerate(&'static str),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_blocklength(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyBlock)
    } else {
        Ok(())
    }
}
