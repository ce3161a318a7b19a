use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sieve ceiling exceeded: requested primes up to {requested}, ceiling is {ceiling}")]
    SieveCeiling { requested: u64, ceiling: u64 },

    #[error("resource ceiling reached: {0}")]
    Resource(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid divisor system `{name}`: {reason}")]
    InvalidSystem { name: String, reason: String },

    #[error("divisor system `{0}` is not declared multiplicative")]
    NotMultiplicative(String),

    /// `nu` is not an admissible exponent of `p^nu`, so the phi_A recursion
    /// has no solution. `p == 0` marks a prime-independent rule.
    #[error("phi_A is unsolvable at p = {p}, nu = {nu}: {nu} is not in AE_p({nu})")]
    Unsolvable { p: u64, nu: u32 },

    #[error("local factor at p = {p} is infinite (rho(p) = inf)")]
    InfiniteLocalFactor { p: u64 },

    #[error("hypothesis fails at p = {p}: {detail}")]
    Hypothesis { p: u64, detail: String },

    #[error("schedule fails at p = {p}: {detail}")]
    Schedule { p: u64, detail: String },
}

impl Error {
    /// True for errors caused by a configured size limit rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::SieveCeiling { .. } | Error::Resource(_))
    }
}
