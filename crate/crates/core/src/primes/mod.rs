//! Prime generation, factorization, and the Mertens product.

mod factor;
mod factored;
mod sieve;

pub use factor::{factorize, is_prime, mobius, SpfTable};
pub use factored::Factored;
pub use sieve::{mertens_product, primes_up_to, PrimeTable, Sieve, DEFAULT_SIEVE_CEILING};
