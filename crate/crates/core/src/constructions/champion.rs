use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{MultFn, RhoValue};
use crate::divisors::DivisorSystem;
use crate::extremal::{rho, DEFAULT_SCAN_LIMIT};
use crate::primes::{PrimeTable, Sieve};
use crate::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-3;

/// Exponents `e_p` for every prime `p <= x`, split at `P` into the head
/// (`k_p`, `p <= P`) and the tail (`e_p`, `P < p <= x`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSchedule {
    pub x: u64,
    pub big_p: u64,
    /// `(p, exponent)` for all primes `p <= x`, ascending; zero exponents kept.
    pub entries: Vec<(u64, u32)>,
}

impl ExponentSchedule {
    pub fn exponent(&self, p: u64) -> u32 {
        self.entries.binary_search_by_key(&p, |&(q, _)| q).map(|i| self.entries[i].1).unwrap_or(0)
    }

    pub fn log_n(&self) -> f64 {
        self.entries.iter().map(|&(p, e)| e as f64 * (p as f64).ln()).sum()
    }
}

/// Largest `nu` with `p^nu <= x`.
fn max_exponent(p: u64, x: u64) -> u32 {
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

/// Smallest `nu <= floor(log x / log p)` maximizing `f(p^nu)`.
fn best_exponent(f: &MultFn, p: u64, x: u64) -> u32 {
    let (mut best, mut arg) = (0.0, 0);
    for nu in 1..=max_exponent(p, x) {
        let v = f.log_value_at(p, nu);
        if v > best {
            best = v;
            arg = nu;
        }
    }
    arg
}

fn schedule_from_table(f: &MultFn, table: &PrimeTable, x: u64, big_p: u64) -> ExponentSchedule {
    let entries = table.up_to(x).par_iter().map(|&p| (p, best_exponent(f, p, x))).collect();
    ExponentSchedule { x, big_p, entries }
}

/// `k_p` and `e_p` both maximize `f(p^nu)` over `nu <= floor(log x / log p)`,
/// taking the smallest maximizer. The cap keeps `e_p = p^o(1)`.
pub fn default_schedule(f: &MultFn, x: u64, big_p: u64, sieve: &Sieve) -> Result<ExponentSchedule> {
    let table = sieve.primes_up_to(x)?;
    Ok(schedule_from_table(f, &table, x, big_p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub eps: f64,
    /// `prod_{P < p <= x, e_p >= 1} f(p^e_p) / rho(p)`.
    pub tail_product: f64,
    /// `prod_{p <= P} f(p^k_p) / rho(p)`.
    pub head_product: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChampionPoint {
    pub x: u64,
    pub big_p: u64,
    pub log_n: f64,
    pub log_f: f64,
    /// `f(n) / log log n`, or `phi_A(n) log log n / n` for phi champions.
    pub ratio: f64,
    pub margins: Option<Margins>,
}

struct PrimeTerm {
    p: u64,
    exponent: u32,
    log_f: f64,
    log_n: f64,
    /// `log(f(p^e) / rho(p))`.
    log_deficit: f64,
}

fn prime_terms(f: &MultFn, schedule: &ExponentSchedule) -> Result<Vec<PrimeTerm>> {
    schedule
        .entries
        .par_iter()
        .map(|&(p, e)| {
            let rho_p = match rho(f, p, DEFAULT_SCAN_LIMIT).value {
                RhoValue::Finite(v) => v,
                RhoValue::Infinite => return Err(Error::InfiniteLocalFactor { p }),
            };
            let log_f = f.log_value_at(p, e);
            Ok(PrimeTerm { p, exponent: e, log_f, log_n: e as f64 * (p as f64).ln(), log_deficit: log_f - rho_p.ln() })
        })
        .collect()
}

/// Smallest prime `P` in the schedule with
/// `prod_{P < p <= x, e_p >= 1} f(p^e_p) / rho(p) >= 1 - eps`.
pub fn choose_big_p(f: &MultFn, schedule: &ExponentSchedule, eps: f64) -> Result<u64> {
    let terms = prime_terms(f, schedule)?;
    Ok(pick_big_p(&terms, eps))
}

fn pick_big_p(terms: &[PrimeTerm], eps: f64) -> u64 {
    let goal = (-eps).ln_1p();
    let mut suffix = 0.0;
    let mut big_p = terms.last().map_or(2, |t| t.p);
    for t in terms.iter().rev() {
        if suffix < goal {
            break;
        }
        big_p = t.p;
        if t.exponent > 0 {
            suffix += t.log_deficit;
        }
    }
    big_p
}

/// Evaluates `n(x) = prod_{p <= P} p^k_p prod_{P < p <= x} p^e_p` in log
/// space and checks the head and tail inequalities at `eps`.
pub fn build_champion(f: &MultFn, x: u64, big_p: u64, eps: f64, schedule: &ExponentSchedule) -> Result<ChampionPoint> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("eps must lie in (0, 1), got {eps}")));
    }
    if big_p > x || schedule.x != x {
        return Err(Error::Precondition(format!("need P <= x and a schedule for x = {x}")));
    }
    let terms = prime_terms(f, schedule)?;
    let (mut log_f, mut log_n, mut head, mut tail) = (0.0, 0.0, 0.0, 0.0);
    let mut worst_head: Option<(u64, f64)> = None;
    let mut worst_tail: Option<(u64, f64)> = None;
    for t in &terms {
        log_f += t.log_f;
        log_n += t.log_n;
        let slot = if t.p <= big_p {
            head += t.log_deficit;
            &mut worst_head
        } else if t.exponent > 0 {
            tail += t.log_deficit;
            &mut worst_tail
        } else {
            continue;
        };
        if slot.is_none_or(|(_, d)| t.log_deficit < d) {
            *slot = Some((t.p, t.log_deficit));
        }
    }
    if log_n.is_nan() || log_n <= std::f64::consts::E {
        return Err(Error::Precondition(format!("log n(x) = {log_n:.4} does not exceed e, so log log n(x) <= 1")));
    }
    let goal = (-eps).ln_1p();
    if tail < goal {
        let (p, _) = worst_tail.expect("a negative tail has a term");
        return Err(Error::Schedule {
            p,
            detail: format!("tail product over P < p <= x is {:.6} < 1 - eps; P = {big_p} is too small", tail.exp()),
        });
    }
    if head < goal {
        let (p, _) = worst_head.expect("a negative head has a term");
        return Err(Error::Schedule {
            p,
            detail: format!("head product over p <= P is {:.6} < 1 - eps; increase k_p", head.exp()),
        });
    }
    Ok(ChampionPoint {
        x,
        big_p,
        log_n,
        log_f,
        ratio: log_f.exp() / log_n.ln(),
        margins: Some(Margins { eps, tail_product: tail.exp(), head_product: head.exp() }),
    })
}

/// Default schedule, smallest admissible `P`, then [`build_champion`].
pub fn champion_at(f: &MultFn, x: u64, eps: f64, sieve: &Sieve) -> Result<ChampionPoint> {
    let mut schedule = default_schedule(f, x, x, sieve)?;
    let terms = prime_terms(f, &schedule)?;
    schedule.big_p = pick_big_p(&terms, eps);
    build_champion(f, x, schedule.big_p, eps, &schedule)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub point: ChampionPoint,
    pub target: Option<f64>,
    pub deviation: Option<f64>,
}

fn check_grid(x_grid: &[u64]) -> Result<()> {
    if x_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("x grid must be strictly increasing".into()));
    }
    Ok(())
}

fn row(point: ChampionPoint, target: Option<f64>) -> SeriesRow {
    SeriesRow { point, target, deviation: target.map(|t| (point.ratio - t).abs()) }
}

/// One champion per `x`; `target` is normally `e^gamma R`.
pub fn champion_series(
    f: &MultFn,
    x_grid: &[u64],
    eps: f64,
    target: Option<f64>,
    sieve: &Sieve,
) -> Result<Vec<SeriesRow>> {
    check_grid(x_grid)?;
    x_grid.iter().map(|&x| Ok(row(champion_at(f, x, eps, sieve)?, target))).collect()
}

/// `n(x) = prod_{p <= x} p^{e_p}` where `e_p` minimizes `phi_A(p^nu)/p^nu`;
/// the point's ratio is `phi_A(n) log log n / n`.
///
/// The minimizing exponent comes from the closed form when there is one,
/// otherwise from a scan over `nu <= max(2, floor(log x / log p))`.
pub fn build_phi_champion(system: &DivisorSystem, x: u64, sieve: &Sieve) -> Result<ChampionPoint> {
    if x < 3 {
        return Err(Error::Precondition(format!("phi champion needs x >= 3, got {x}")));
    }
    let f = MultFn::id_over_phi(system)?;
    let table = sieve.primes_up_to(x)?;
    let terms: Vec<Result<(f64, f64)>> = table
        .primes()
        .par_iter()
        .map(|&p| {
            let e = match f.rho_hint(p).and_then(|h| h.attained_at) {
                Some(e) => e,
                None => best_exponent(&f, p, x.max(p * p)),
            };
            let l = f.log_value_at(p, e);
            if l.is_nan() {
                return Err(Error::Unsolvable { p, nu: e });
            }
            Ok((l, e as f64 * (p as f64).ln()))
        })
        .collect();
    let (mut log_f, mut log_n) = (0.0, 0.0);
    for t in terms {
        let (a, b) = t?;
        log_f += a;
        log_n += b;
    }
    if log_n.is_nan() || log_n <= std::f64::consts::E {
        return Err(Error::Precondition(format!("log n(x) = {log_n:.4} does not exceed e")));
    }
    Ok(ChampionPoint { x, big_p: x, log_n, log_f, ratio: (-log_f).exp() * log_n.ln(), margins: None })
}

/// Phi champions along `x_grid`; `target` is normally `e^-gamma`.
pub fn phi_champion_series(
    system: &DivisorSystem,
    x_grid: &[u64],
    target: Option<f64>,
    sieve: &Sieve,
) -> Result<Vec<SeriesRow>> {
    check_grid(x_grid)?;
    x_grid.iter().map(|&x| Ok(row(build_phi_champion(system, x, sieve)?, target))).collect()
}
