use std::ops::ControlFlow;

use crate::{Error, Result};

/// Default upper limit for [`Sieve::primes_up_to`].
pub const DEFAULT_SIEVE_CEILING: u64 = 100_000_000;

/// Odd numbers per segment.
const SEGMENT_LEN: usize = 1 << 18;

/// All primes `<= limit`, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.primes.iter().copied()
    }

    /// Primes `<= x` as a prefix slice. `x` may exceed the table limit, in
    /// which case the whole table is returned.
    pub fn up_to(&self, x: u64) -> &[u64] {
        let end = self.primes.partition_point(|&p| p <= x);
        &self.primes[..end]
    }

    /// Membership for `p <= limit`.
    pub fn contains(&self, p: u64) -> bool {
        self.primes.binary_search(&p).is_ok()
    }

    /// `prod_{p <= x} (1 - 1/p)^-1`, accumulated as a sum of logarithms.
    pub fn mertens_product(&self, x: u64) -> Result<f64> {
        if x < 2 {
            return Err(Error::Precondition(format!("mertens_product needs x >= 2, got {x}")));
        }
        if x > self.limit {
            return Err(Error::Precondition(format!("prime table only reaches {}, asked for {x}", self.limit)));
        }
        Ok(mertens_log(self.up_to(x).iter().copied()).exp())
    }
}

/// Segmented sieve of Eratosthenes with a configurable ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sieve {
    ceiling: u64,
}

impl Default for Sieve {
    fn default() -> Self {
        Sieve { ceiling: DEFAULT_SIEVE_CEILING }
    }
}

impl Sieve {
    pub fn with_ceiling(ceiling: u64) -> Self {
        Sieve { ceiling }
    }

    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    pub fn primes_up_to(&self, x: u64) -> Result<PrimeTable> {
        self.check(x)?;
        let mut primes = Vec::with_capacity(prime_count_estimate(x));
        for_each_prime(x, |p| {
            primes.push(p);
            ControlFlow::Continue(())
        });
        Ok(PrimeTable { limit: x, primes })
    }

    /// Streams primes `<= x` without storing them. The ceiling still applies.
    pub fn for_each_prime<F>(&self, x: u64, visit: F) -> Result<()>
    where
        F: FnMut(u64) -> ControlFlow<()>,
    {
        self.check(x)?;
        for_each_prime(x, visit);
        Ok(())
    }

    fn check(&self, x: u64) -> Result<()> {
        if x > self.ceiling {
            Err(Error::SieveCeiling { requested: x, ceiling: self.ceiling })
        } else {
            Ok(())
        }
    }
}

/// Primes `<= x` under the default ceiling.
pub fn primes_up_to(x: u64) -> Result<PrimeTable> {
    Sieve::default().primes_up_to(x)
}

/// `prod_{p <= x} (1 - 1/p)^-1` under the default ceiling.
pub fn mertens_product(x: u64) -> Result<f64> {
    if x < 2 {
        return Err(Error::Precondition(format!("mertens_product needs x >= 2, got {x}")));
    }
    let mut acc = 0.0;
    Sieve::default().for_each_prime(x, |p| {
        acc -= (-1.0 / p as f64).ln_1p();
        ControlFlow::Continue(())
    })?;
    Ok(acc.exp())
}

pub(crate) fn mertens_log(primes: impl Iterator<Item = u64>) -> f64 {
    primes.map(|p| -(-1.0 / p as f64).ln_1p()).sum()
}

fn prime_count_estimate(x: u64) -> usize {
    if x < 17 {
        return 8;
    }
    let xf = x as f64;
    (1.26 * xf / xf.ln()) as usize
}

fn simple_odd_primes(limit: u64) -> Vec<u64> {
    if limit < 3 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    let mut i = 3;
    while i <= n {
        if !composite[i] {
            out.push(i as u64);
            let mut m = i * i;
            while m <= n {
                composite[m] = true;
                m += 2 * i;
            }
        }
        i += 2;
    }
    out
}

/// Core segmented walk over odd candidates. Calls `visit` in increasing order.
pub(crate) fn for_each_prime<F>(x: u64, mut visit: F)
where
    F: FnMut(u64) -> ControlFlow<()>,
{
    if x < 2 || visit(2).is_break() {
        return;
    }
    let base = simple_odd_primes(x.isqrt());
    let mut next: Vec<u64> = base.iter().map(|&p| p * p).collect();
    let mut composite = vec![false; SEGMENT_LEN];
    let mut lo = 3u64;
    while lo <= x {
        let count = (((x - lo) / 2) as usize + 1).min(SEGMENT_LEN);
        let hi = lo + 2 * (count as u64 - 1);
        composite[..count].fill(false);
        for (&p, m) in base.iter().zip(next.iter_mut()) {
            if *m > hi {
                continue;
            }
            let mut k = *m;
            while k <= hi {
                composite[((k - lo) / 2) as usize] = true;
                k += 2 * p;
            }
            *m = k;
        }
        for (i, &c) in composite[..count].iter().enumerate() {
            if !c && visit(lo + 2 * i as u64).is_break() {
                return;
            }
        }
        lo = hi + 2;
    }
}
