//! Extremal orders of nonnegative multiplicative functions.
//!
//! For a multiplicative `f >= 0` the quantities of interest are
//!
//! * `rho(p) = sup_{nu >= 0} f(p^nu)` for each prime,
//! * the Euler product `R = prod_p (1 - 1/p) rho(p)`,
//! * the constant `e^gamma * R`, which under mild conditions is
//!   `limsup f(n) / log log n`.
//!
//! The crate covers divisor systems in the Narkiewicz sense (standard,
//! unitary, exponential and user-defined admissible-exponent tables), the
//! attached `sigma_A` and `phi_A` functions, certified enclosures of the
//! Euler products, and the explicit constructions (champion sequences,
//! counterexamples, unboundedness witnesses) that realize the extremal
//! behaviour numerically.
//!
//! Integers that get too large to hold (champions at `x = 10^7` have
//! millions of digits) are carried as [`Factored`] values or as logarithms.

pub mod arith;
pub mod constants;
pub mod constructions;
pub mod divisors;
mod error;
pub mod extremal;
pub mod primes;

pub use arith::{MultFn, PhiCache, PhiTable, RhoHint, RhoValue, TailEnvelope};
pub use divisors::{BuiltinKind, DivisorSystem, ExponentTable};
pub use error::{Error, Result};
pub use extremal::{PrimeSetFilter, ProductEstimate, RhoEstimate, RhoStatus};
pub use primes::{factorize, primes_up_to, Factored, PrimeTable, Sieve};
