use std::sync::OnceLock;

use super::sieve::for_each_prime;
use super::Factored;

/// Trial division runs through the primes below this bound.
const TRIAL_BOUND: u64 = 1_000_000;

/// Witness set that makes Miller-Rabin deterministic on all of `u64`.
const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn trial_primes() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut v = Vec::with_capacity(78_500);
        for_each_prime(TRIAL_BOUND, |p| {
            v.push(p as u32);
            std::ops::ControlFlow::Continue(())
        });
        v
    })
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard rho. Returns a nontrivial factor of the odd
/// composite `n`.
fn pollard_brent(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let mut y = 2u64;
        let mut r = 1u64;
        let mut q = 1u64;
        let mut g = 1u64;
        let mut x = y;
        let mut ys = y;
        const BLOCK: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BLOCK.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BLOCK;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn split_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_brent(n);
    split_into(d, out);
    split_into(n / d, out);
}

/// Canonical factorization of `n >= 1`: trial division by the primes below
/// `10^6`, then Pollard-Brent splitting certified by Miller-Rabin.
///
/// # Panics
///
/// On `n == 0`.
pub fn factorize(n: u64) -> Factored {
    assert!(n >= 1, "factorize needs n >= 1");
    let mut rest = n;
    let mut pairs: Vec<(u64, u32)> = Vec::new();
    for &p in trial_primes() {
        let p = p as u64;
        if p * p > rest {
            break;
        }
        if rest.is_multiple_of(p) {
            let mut nu = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                nu += 1;
            }
            pairs.push((p, nu));
        }
    }
    if rest > 1 {
        if rest < TRIAL_BOUND * TRIAL_BOUND {
            // no factor below 10^6 and rest < 10^12, so rest is prime
            pairs.push((rest, 1));
        } else {
            let mut big = Vec::new();
            split_into(rest, &mut big);
            big.sort_unstable();
            for p in big {
                match pairs.last_mut() {
                    Some((q, nu)) if *q == p => *nu += 1,
                    _ => pairs.push((p, 1)),
                }
            }
        }
    }
    Factored::from_sorted_unchecked(pairs)
}

/// Smallest-prime-factor table for fast repeated factorization of `n <= limit`.
#[derive(Debug, Clone)]
pub struct SpfTable {
    spf: Vec<u32>,
}

impl SpfTable {
    pub fn new(limit: u32) -> Self {
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m > n {
                    break;
                }
                spf[m] = p;
            }
        }
        SpfTable { spf }
    }

    pub fn limit(&self) -> u32 {
        (self.spf.len() - 1) as u32
    }

    /// # Panics
    ///
    /// If `n` is zero or beyond the table.
    pub fn factorize(&self, n: u32) -> Factored {
        assert!(n >= 1 && n <= self.limit());
        let mut pairs: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m];
            let mut nu = 0;
            while m.is_multiple_of(p as usize) {
                m /= p as usize;
                nu += 1;
            }
            pairs.push((p as u64, nu));
        }
        Factored::from_sorted_unchecked(pairs)
    }
}

/// Moebius function via factorization.
pub fn mobius(n: u64) -> i8 {
    let f = factorize(n);
    if f.factors().iter().any(|&(_, nu)| nu > 1) {
        0
    } else if f.factors().len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}
