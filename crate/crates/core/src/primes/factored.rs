use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::factor::is_prime;
use crate::{Error, Result};

/// A positive integer held as its canonical factorization `prod p^nu`.
///
/// Primes are strictly increasing and every exponent is at least one, so the
/// empty factorization is `1`. Champions and witnesses are never turned
/// back into machine integers; use [`Factored::log_value`] instead.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Factored {
    factors: Vec<(u64, u32)>,
}

impl Factored {
    pub fn one() -> Self {
        Factored::default()
    }

    /// `p^nu`; `nu == 0` gives `1`. `p` is trusted to be prime.
    pub fn prime_power(p: u64, nu: u32) -> Self {
        if nu == 0 {
            Factored::one()
        } else {
            Factored { factors: vec![(p, nu)] }
        }
    }

    /// Validating constructor.
    pub fn from_pairs(pairs: Vec<(u64, u32)>) -> Result<Self> {
        for w in pairs.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Precondition(format!(
                    "primes must be strictly increasing, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(p, nu) in &pairs {
            if nu == 0 {
                return Err(Error::Precondition(format!("zero exponent at p = {p}")));
            }
            if !is_prime(p) {
                return Err(Error::Precondition(format!("{p} is not prime")));
            }
        }
        Ok(Factored { factors: pairs })
    }

    pub(crate) fn from_sorted_unchecked(factors: Vec<(u64, u32)>) -> Self {
        debug_assert!(factors.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(factors.iter().all(|&(_, nu)| nu > 0));
        Factored { factors }
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    /// Number of distinct prime factors, `omega(n)`.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors.binary_search_by_key(&p, |&(q, _)| q).map(|i| self.factors[i].1).unwrap_or(0)
    }

    /// `log n = sum nu * log p`.
    pub fn log_value(&self) -> f64 {
        self.factors.iter().map(|&(p, nu)| nu as f64 * (p as f64).ln()).sum()
    }

    /// Number of divisors `tau(n)`, saturating.
    pub fn divisor_count(&self) -> u64 {
        self.factors.iter().fold(1u64, |acc, &(_, nu)| acc.saturating_mul(nu as u64 + 1))
    }

    pub fn to_u64(&self) -> Option<u64> {
        let mut acc = 1u64;
        for &(p, nu) in &self.factors {
            acc = acc.checked_mul(p.checked_pow(nu)?)?;
        }
        Some(acc)
    }

    pub fn to_biguint(&self) -> BigUint {
        self.factors.iter().fold(BigUint::from(1u32), |acc, &(p, nu)| acc * BigUint::from(p).pow(nu))
    }

    pub fn is_coprime_to(&self, other: &Factored) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            let (a, b) = (self.factors[i].0, other.factors[j].0);
            if a == b {
                return false;
            }
            if a < b {
                i += 1;
            } else {
                j += 1;
            }
        }
        true
    }

    pub fn divides(&self, other: &Factored) -> bool {
        self.factors.iter().all(|&(p, nu)| other.exponent_of(p) >= nu)
    }

    /// Product, adding exponents of shared primes.
    pub fn mul(&self, other: &Factored) -> Factored {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < other.factors.len() {
            match (self.factors.get(i), other.factors.get(j)) {
                (Some(&(a, x)), Some(&(b, y))) if a == b => {
                    out.push((a, x + y));
                    i += 1;
                    j += 1;
                }
                (Some(&(a, x)), Some(&(b, _))) if a < b => {
                    out.push((a, x));
                    i += 1;
                }
                (Some(_), Some(&(b, y))) => {
                    out.push((b, y));
                    j += 1;
                }
                (Some(&f), None) => {
                    out.push(f);
                    i += 1;
                }
                (None, Some(&f)) => {
                    out.push(f);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Factored { factors: out }
    }

    /// `self / d` when `d` divides `self`.
    pub fn div(&self, d: &Factored) -> Option<Factored> {
        if !d.divides(self) {
            return None;
        }
        let factors = self
            .factors
            .iter()
            .filter_map(|&(p, nu)| {
                let left = nu - d.exponent_of(p);
                (left > 0).then_some((p, left))
            })
            .collect();
        Some(Factored { factors })
    }
}

impl fmt::Display for Factored {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, &(p, nu)) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(" * ")?;
            }
            if nu == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{nu}")?;
            }
        }
        Ok(())
    }
}
