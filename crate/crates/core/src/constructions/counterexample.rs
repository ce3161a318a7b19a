use std::collections::{BTreeSet, HashMap};
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith::{MultFn, RhoHint, RhoValue};
use crate::extremal::PrimeSetFilter;
use crate::primes::{Factored, Sieve};
use crate::{Error, Result};

pub const DEFAULT_NU_CEILING: u32 = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct CounterexampleOptions {
    pub nu_ceiling: u32,
    /// Bounds how far `g` is evaluated.
    pub sieve: Sieve,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions { nu_ceiling: DEFAULT_NU_CEILING, sieve: Sieve::default() }
    }
}

/// `q_j = p_j^nu_j` with `f(q_j) = j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledPower {
    pub j: u32,
    pub p: u64,
    pub nu: u32,
    pub log_q: f64,
    /// `log g(log q_j)`; at least `j log j`.
    pub log_g: f64,
}

/// `f(q_j) = j` on the schedule, `f(p^nu) = 1 + 1/p` elsewhere.
#[derive(Debug, Clone)]
pub struct CounterexampleFn {
    filter: PrimeSetFilter,
    schedule: Vec<ScheduledPower>,
    lookup: Arc<HashMap<(u64, u32), u32>>,
}

impl CounterexampleFn {
    pub fn filter(&self) -> &PrimeSetFilter {
        &self.filter
    }

    pub fn schedule(&self) -> &[ScheduledPower] {
        &self.schedule
    }

    pub fn value_at(&self, p: u64, nu: u32) -> f64 {
        match (nu, self.lookup.get(&(p, nu))) {
            (0, _) => 1.0,
            (_, Some(&j)) => j as f64,
            _ => 1.0 + 1.0 / p as f64,
        }
    }

    /// `rho(p)`: infinite on `S`, where the schedule keeps returning, and
    /// `1 + 1/p` off it.
    pub fn rho(&self, p: u64) -> RhoValue {
        if self.filter.contains(p) {
            RhoValue::Infinite
        } else {
            RhoValue::Finite(1.0 + 1.0 / p as f64)
        }
    }

    pub fn to_mult_fn(&self) -> MultFn {
        let lookup = Arc::clone(&self.lookup);
        let filter = self.filter.clone();
        MultFn::from_fn(format!("counterexample[{}]", self.filter.label()), move |p, nu| match lookup.get(&(p, nu)) {
            Some(&j) => j as f64,
            None => 1.0 + 1.0 / p as f64,
        })
        .with_rho_hint(Arc::new(move |p| {
            if filter.contains(p) {
                RhoHint { value: RhoValue::Infinite, attained_at: None }
            } else {
                RhoHint { value: RhoValue::Finite(1.0 + 1.0 / p as f64), attained_at: Some(1) }
            }
        }))
    }

    /// `(j, nu_j)` if `p^nu` is some `q_j`.
    fn scheduled_index(&self, p: u64, nu: u32) -> Option<u32> {
        self.lookup.get(&(p, nu)).copied()
    }
}

/// `log g(y)`, `g(y) = prod_{p in S, p <= y} (1 + 1/p)`.
pub fn g_log(filter: &PrimeSetFilter, y: f64, sieve: &Sieve) -> Result<f64> {
    if y < 2.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    sieve.for_each_prime(y.floor() as u64, |p| {
        if filter.contains(p) {
            acc += (1.0 / p as f64).ln_1p();
        }
        ControlFlow::Continue(())
    })?;
    Ok(acc)
}

/// For each `j <= j_max`, the least `y` with `g(y) >= j^j` (zero when `y = 0`
/// already works). Stops at the sieve ceiling.
fn g_thresholds(filter: &PrimeSetFilter, j_max: u32, sieve: &Sieve) -> Result<(Vec<u64>, f64)> {
    let goals: Vec<f64> = (1..=j_max).map(|j| j as f64 * (j as f64).ln()).collect();
    let mut found: Vec<u64> = goals.iter().take_while(|&&g| g <= 0.0).map(|_| 0).collect();
    let mut acc = 0.0;
    if found.len() < goals.len() {
        sieve.for_each_prime(sieve.ceiling(), |p| {
            if filter.contains(p) {
                acc += (1.0 / p as f64).ln_1p();
                while found.len() < goals.len() && acc >= goals[found.len()] {
                    found.push(p);
                }
            }
            if found.len() == goals.len() {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })?;
    }
    Ok((found, acc))
}

/// Picks `p_j` round-robin from the `S`-primes up to `bound` and the least
/// `nu_j` with `g(log q_j) >= j^j` and `q_j > q_{j-1}`.
pub fn build_counterexample(
    filter: &PrimeSetFilter,
    j_max: u32,
    bound: u64,
    opts: &CounterexampleOptions,
) -> Result<CounterexampleFn> {
    if filter.declared_thin() {
        return Err(Error::Precondition(format!(
            "{} is declared thin; the counterexample needs sum 1/p = infinity",
            filter.label()
        )));
    }
    let members: Vec<u64> = opts.sieve.primes_up_to(bound)?.iter().filter(|&p| filter.contains(p)).collect();
    if members.is_empty() {
        return Err(Error::Precondition(format!("no prime of {} below {bound}", filter.label())));
    }
    let (thresholds, reached) = g_thresholds(filter, j_max, &opts.sieve)?;
    if thresholds.len() < j_max as usize {
        let j = thresholds.len() as u32 + 1;
        return Err(Error::Resource(format!(
            "g(y) < {j}^{j} for all y <= {}: log g reached {reached:.4}, need {:.4}; \
             only j <= {} can be scheduled",
            opts.sieve.ceiling(),
            j as f64 * (j as f64).ln(),
            j - 1
        )));
    }
    let mut schedule: Vec<ScheduledPower> = Vec::with_capacity(j_max as usize);
    let mut prev_log_q = 0.0;
    for j in 1..=j_max {
        let p = members[(j as usize - 1) % members.len()];
        let lp = (p as f64).ln();
        let by_g = (thresholds[j as usize - 1] as f64 / lp).ceil().max(1.0);
        let mut nu = by_g;
        while nu * lp <= prev_log_q {
            nu += 1.0;
        }
        if nu > opts.nu_ceiling as f64 {
            return Err(Error::Resource(format!(
                "nu_{j} = {nu} at p = {p} exceeds the ceiling {}; use a larger bound",
                opts.nu_ceiling
            )));
        }
        let nu = nu as u32;
        let log_q = nu as f64 * lp;
        let log_g = g_log(filter, log_q, &opts.sieve)?;
        schedule.push(ScheduledPower { j, p, nu, log_q, log_g });
        prev_log_q = log_q;
    }
    let lookup = schedule.iter().map(|s| ((s.p, s.nu), s.j)).collect();
    Ok(CounterexampleFn { filter: filter.clone(), schedule, lookup: Arc::new(lookup) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Nominal `log n`.
    pub height: f64,
    pub n: Factored,
}

/// Probes at each height: the squarefree product of the smallest primes
/// outside `S` reaching `log n >= height`, then the same with each `q_j`
/// that fits, then with every `q_j` (distinct primes) that fits together.
pub fn counterexample_probes(cf: &CounterexampleFn, heights: &[f64], sieve: &Sieve) -> Result<Vec<Probe>> {
    let top = heights.iter().cloned().fold(0.0, f64::max);
    // primes outside S carry at least a third of theta(y) for the sets used
    // here; sieve generously and report if it still falls short
    let limit = (4.0 * top + 100.0) as u64;
    let outside: Vec<u64> = sieve.primes_up_to(limit)?.iter().filter(|&p| !cf.filter.contains(p)).collect();
    let fill = |base: &Factored, h: f64| -> Result<Factored> {
        let mut log = base.log_value();
        let mut pairs: Vec<(u64, u32)> = Vec::new();
        for &p in &outside {
            if log >= h {
                break;
            }
            pairs.push((p, 1));
            log += (p as f64).ln();
        }
        if log < h {
            return Err(Error::Resource(format!("primes outside S below {limit} do not reach log n = {h}")));
        }
        Ok(base.mul(&Factored::from_sorted_unchecked(pairs)))
    };
    let mut probes = Vec::new();
    for &h in heights {
        probes.push(Probe { height: h, n: fill(&Factored::one(), h)? });
        let mut combined = Factored::one();
        let mut used = BTreeSet::new();
        for s in &cf.schedule {
            if s.log_q > h {
                continue;
            }
            let q = Factored::prime_power(s.p, s.nu);
            probes.push(Probe { height: h, n: fill(&q, h)? });
            if used.insert(s.p) && combined.log_value() + s.log_q <= h {
                combined = combined.mul(&q);
            }
        }
        if combined.omega() > 1 {
            probes.push(Probe { height: h, n: fill(&combined, h)? });
        }
    }
    Ok(probes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub height: f64,
    pub log_n: f64,
    pub f: f64,
    pub ratio: f64,
    /// Largest `j` with `q_j` exactly dividing `n`, or 0.
    pub k: u32,
    /// `f(n_1)` for the scheduled part `n_1` of `n`.
    pub f_n1: f64,
    pub factorial_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub rows: Vec<ProbeRow>,
    /// Largest ratio at each height, in probe order.
    pub height_maxima: Vec<(f64, f64)>,
    pub maxima_non_increasing: bool,
    pub factorial_bound_ok: bool,
}

/// `f(n) / log log n` along the probes, and the bound `f(n_1) <= k!`.
pub fn counterexample_scan(cf: &CounterexampleFn, probes: &[Probe]) -> CounterexampleReport {
    let mut rows = Vec::with_capacity(probes.len());
    let mut height_maxima: Vec<(f64, f64)> = Vec::new();
    for probe in probes {
        let mut log_f = 0.0;
        let (mut k, mut f_n1) = (0u32, 1.0);
        for &(p, nu) in probe.n.factors() {
            log_f += cf.value_at(p, nu).ln();
            if let Some(j) = cf.scheduled_index(p, nu) {
                k = k.max(j);
                f_n1 *= j as f64;
            }
        }
        let k_factorial: f64 = (1..=k).map(f64::from).product();
        let log_n = probe.n.log_value();
        let ratio = log_f.exp() / log_n.ln();
        let ok = f_n1 <= k_factorial;
        rows.push(ProbeRow { height: probe.height, log_n, f: log_f.exp(), ratio, k, f_n1, factorial_bound_ok: ok });
        match height_maxima.last_mut() {
            Some((h, m)) if *h == probe.height => *m = m.max(ratio),
            _ => height_maxima.push((probe.height, ratio)),
        }
    }
    let maxima_non_increasing = height_maxima.windows(2).all(|w| w[1].1 <= w[0].1);
    let factorial_bound_ok = rows.iter().all(|r| r.factorial_bound_ok);
    CounterexampleReport { rows, height_maxima, maxima_non_increasing, factorial_bound_ok }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_mod_four() -> PrimeSetFilter {
        PrimeSetFilter::residue(4, [3], false).unwrap()
    }

    #[test]
    fn first_power_is_three() {
        let cf = build_counterexample(&three_mod_four(), 1, 1000, &CounterexampleOptions::default()).unwrap();
        let q1 = cf.schedule()[0];
        assert_eq!((q1.p, q1.nu, q1.j), (3, 1, 1));
        assert_eq!(cf.value_at(3, 1), 1.0);
        assert_eq!(cf.value_at(3, 2), 4.0 / 3.0);
        assert_eq!(cf.value_at(5, 1), 1.2);
        assert_eq!(cf.rho(7), RhoValue::Infinite);
        assert_eq!(cf.rho(5), RhoValue::Finite(1.2));
        let f = cf.to_mult_fn();
        assert_eq!(f.rho_hint(11).unwrap().value, RhoValue::Infinite);
    }

    #[test]
    fn small_sieve_reports_shortfall() {
        let opts = CounterexampleOptions { sieve: Sieve::with_ceiling(1_000_000), ..Default::default() };
        match build_counterexample(&three_mod_four(), 2, 1000, &opts) {
            Err(e) => assert!(e.is_resource(), "{e}"),
            Ok(cf) => panic!("{:?}", cf.schedule()),
        }
    }

    #[test]
    fn schedule_holds_for_a_fast_growing_set() {
        // all primes: g grows like log y, so j = 2 needs y of about 40
        let all = PrimeSetFilter::predicate("all primes", |_| true, false);
        let cf = build_counterexample(&all, 2, 100, &CounterexampleOptions::default()).unwrap();
        let mut prev = 0.0;
        for s in cf.schedule() {
            let j = s.j as f64;
            let independent = g_log(&all, s.log_q, &Sieve::default()).unwrap();
            assert!(independent >= j * j.ln());
            assert!(s.log_q > prev);
            prev = s.log_q;
        }
        assert_eq!(cf.schedule().iter().map(|s| s.p).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn preconditions() {
        let opts = CounterexampleOptions::default();
        let thin = PrimeSetFilter::finite([3]).unwrap();
        assert!(build_counterexample(&thin, 1, 100, &opts).is_err());
        let none = PrimeSetFilter::predicate("none", |_| false, false);
        assert!(build_counterexample(&none, 1, 100, &opts).is_err());
    }

    #[test]
    fn probes_and_scan() {
        let cf = build_counterexample(&three_mod_four(), 1, 1000, &CounterexampleOptions::default()).unwrap();
        let heights = [100.0, 1000.0, 10_000.0];
        let probes = counterexample_probes(&cf, &heights, &Sieve::default()).unwrap();
        let report = counterexample_scan(&cf, &probes);
        assert!(report.factorial_bound_ok);
        assert_eq!(report.height_maxima.len(), 3);
        for (row, probe) in report.rows.iter().zip(&probes) {
            assert!(row.log_n >= probe.height);
            if row.k == 0 {
                let direct: f64 = probe.n.factors().iter().map(|&(p, _)| 1.0 + 1.0 / p as f64).product();
                assert!((row.f - direct).abs() < 1e-9 * direct);
            }
        }
        assert!(counterexample_scan(&cf, &[]).rows.is_empty());
    }

    #[test]
    fn factorial_bound_with_scheduled_block() {
        let all = PrimeSetFilter::predicate("all primes", |_| true, false);
        let cf = build_counterexample(&all, 2, 100, &CounterexampleOptions::default()).unwrap();
        let q2 = cf.schedule()[1];
        let q2_only = Factored::from_pairs(vec![(q2.p, q2.nu)]).unwrap();
        let report = counterexample_scan(&cf, &[Probe { height: 0.0, n: q2_only }]);
        assert_eq!(report.rows[0].k, 2);
        assert_eq!(report.rows[0].f, 2.0);
        assert!(report.factorial_bound_ok);
    }
}
