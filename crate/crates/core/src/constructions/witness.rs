use serde::{Deserialize, Serialize};

use crate::arith::MultFn;
use crate::extremal::PrimeSetFilter;
use crate::primes::{Factored, Sieve};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct WitnessOptions {
    /// Values of `x` tried in order; the last is the ceiling.
    pub x_grid: Vec<u64>,
    /// Exponents of primes in `S` are searched up to this level.
    pub nu_ceiling: u32,
    pub sieve: Sieve,
}

impl WitnessOptions {
    /// `x` runs over `10^2, 10^3, ...` up to `x_max`.
    pub fn up_to(x_max: u64) -> Self {
        let mut x_grid = Vec::new();
        let mut x = 100u64;
        while x < x_max {
            x_grid.push(x);
            x = x.saturating_mul(10);
        }
        x_grid.push(x_max);
        WitnessOptions { x_grid, nu_ceiling: 4096, sieve: Sieve::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// The part of the witness supported on `S`.
    pub n1: Factored,
    pub log_f_n1: f64,
    /// `n_2 = prod_{p <= x, p not in S} p^{e_p}`, held in log form.
    pub x: u64,
    pub log_n2: f64,
    pub log_f_n2: f64,
    /// Exponent search level reached for `n_1`.
    pub level: u32,
    pub ratio: f64,
    pub target: f64,
}

/// Smallest `nu <= level` maximizing `f(p^nu)`, with its log value.
fn best_power(f: &MultFn, p: u64, level: u32) -> Result<(u32, f64)> {
    let (mut arg, mut best) = (0, 0.0);
    for nu in 1..=level {
        let v = f.log_value_at(p, nu);
        if v.is_nan() {
            return Err(Error::Contract(format!("`{}` undefined at {p}^{nu}", f.name())));
        }
        if v > best {
            best = v;
            arg = nu;
        }
    }
    Ok((arg, best))
}

/// Finds `n = n_1 n_2` with `n_1` built from primes of the thin set `S` and
/// `n_2` a champion over the primes outside `S`, such that
/// `f(n_1) f(n_2) / log log(n_1 n_2) >= target`.
///
/// For each `x` in the grid, the exponent level for `n_1` doubles from 1
/// up to the ceiling before `x` grows.
pub fn unbounded_witness(
    f: &MultFn,
    filter: &PrimeSetFilter,
    target: f64,
    opts: &WitnessOptions,
) -> Result<WitnessReport> {
    if !filter.declared_thin() {
        return Err(Error::Precondition(format!("{} must be declared thin", filter.label())));
    }
    filter.check_declared_thin()?;
    if target.is_nan() || target <= 0.0 {
        return Err(Error::Precondition(format!("target must be positive, got {target}")));
    }
    let mut best: Option<WitnessReport> = None;
    for &x in &opts.x_grid {
        let table = opts.sieve.primes_up_to(x)?;
        let (inside, outside): (Vec<u64>, Vec<u64>) = table.iter().partition(|&p| filter.contains(p));
        let mut log_n2 = 0.0;
        let mut log_f_n2 = 0.0;
        let mut n2_exps = Vec::with_capacity(outside.len());
        for &p in &outside {
            let (e, lv) = best_power(f, p, max_level(p, x))?;
            n2_exps.push(e);
            log_n2 += e as f64 * (p as f64).ln();
            log_f_n2 += lv;
        }
        let mut level = 1u32;
        loop {
            let mut pairs = Vec::new();
            let mut log_f_n1 = 0.0;
            for &p in &inside {
                let (e, lv) = best_power(f, p, level)?;
                if e > 0 {
                    pairs.push((p, e));
                    log_f_n1 += lv;
                }
            }
            let n1 = Factored::from_pairs(pairs)?;
            let log_n = n1.log_value() + log_n2;
            if log_n > std::f64::consts::E {
                let ratio = (log_f_n1 + log_f_n2).exp() / log_n.ln();
                let report = WitnessReport { n1, log_f_n1, x, log_n2, log_f_n2, level, ratio, target };
                if ratio >= target {
                    return Ok(report);
                }
                if best.as_ref().is_none_or(|b| ratio > b.ratio) {
                    best = Some(report);
                }
            }
            if level >= opts.nu_ceiling {
                break;
            }
            level = (level * 2).min(opts.nu_ceiling);
        }
    }
    let best_ratio = best.map_or(0.0, |b| b.ratio);
    Err(Error::Resource(format!(
        "target {target} not reached with x <= {} and exponents <= {}; best ratio {best_ratio:.6}",
        opts.x_grid.last().copied().unwrap_or(0),
        opts.nu_ceiling
    )))
}

fn max_level(p: u64, x: u64) -> u32 {
    let mut nu = 0;
    let mut acc = 1u64;
    while let Some(next) = acc.checked_mul(p) {
        if next > x {
            break;
        }
        acc = next;
        nu += 1;
    }
    nu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::EXP_GAMMA;
    use crate::divisors::DivisorSystem;

    fn two_power_system() -> DivisorSystem {
        DivisorSystem::pathological((1..=20).map(|k| 1u32 << k)).unwrap()
    }

    #[test]
    fn pathological_witness() {
        let f = MultFn::id_over_phi(&two_power_system()).unwrap();
        let s = PrimeSetFilter::finite([2]).unwrap();
        let w = unbounded_witness(&f, &s, 10.0 * EXP_GAMMA, &WitnessOptions::up_to(1_000_000)).unwrap();
        assert!(w.ratio >= 10.0 * EXP_GAMMA);
        assert!(w.x <= 1_000_000);
        assert_eq!(w.n1.factors()[0].0, 2);
        let e = w.n1.factors()[0].1;
        assert!(e.is_power_of_two() && e >= 2);
        // f(2^{n_j}) = 2^{n_j - n_{j-1}}
        assert!((w.log_f_n1 - (e / 2) as f64 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn small_target_is_immediate() {
        let f = MultFn::id_over_phi(&two_power_system()).unwrap();
        let s = PrimeSetFilter::finite([2]).unwrap();
        let w = unbounded_witness(&f, &s, 0.1, &WitnessOptions::up_to(1000)).unwrap();
        assert_eq!((w.x, w.level), (100, 1));
    }

    #[test]
    fn bounded_function_reports_best() {
        let f = MultFn::id_over_phi(&DivisorSystem::standard()).unwrap();
        let s = PrimeSetFilter::finite([2]).unwrap();
        let opts = WitnessOptions { nu_ceiling: 8, ..WitnessOptions::up_to(1000) };
        match unbounded_witness(&f, &s, 1e6, &opts) {
            Err(e) => assert!(e.is_resource() && e.to_string().contains("best ratio")),
            Ok(w) => panic!("{w:?}"),
        }
        assert!(unbounded_witness(&f, &PrimeSetFilter::predicate("all", |_| true, false), 1.0, &opts).is_err());
    }
}
