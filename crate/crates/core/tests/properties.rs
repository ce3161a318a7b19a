use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;

use maxorder::arith::{phi_a, phi_exponential_closed_form, phi_reconstruction, sigma_a, solve_phi};
use maxorder::constants::{EXP_GAMMA, SIX_OVER_PI_SQUARED};
use maxorder::constructions::{champion_at, default_schedule, empirical_scan, DEFAULT_EPS};
use maxorder::divisors::a_divisors;
use maxorder::extremal::{local_factor, r_product, rho, AnalysisOptions, RhoStatus};
use maxorder::primes::{factorize, mobius};
use maxorder::{BuiltinKind, DivisorSystem, ExponentTable, MultFn, PhiCache, PrimeSetFilter, Sieve};

fn builtin() -> impl Strategy<Value = BuiltinKind> {
    prop_oneof![Just(BuiltinKind::Standard), Just(BuiltinKind::Unitary), Just(BuiltinKind::Exponential)]
}

/// Random solvable table: every override keeps `nu`.
fn solvable_system() -> impl Strategy<Value = DivisorSystem> {
    let overrides = prop::collection::vec((1u32..=10, prop::collection::vec(any::<bool>(), 10)), 0..6);
    (builtin(), overrides).prop_map(|(base, overrides)| {
        let mut t = ExponentTable::new(base);
        for (nu, bits) in overrides {
            let set: Vec<u32> = (0..nu).filter(|&d| bits[d as usize]).chain(std::iter::once(nu)).collect();
            t.set_for_exponent(nu, set);
        }
        DivisorSystem::from_table("random", t).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_identity(system in solvable_system(), n in 1u64..50_000) {
        let cache = PhiCache::new(system);
        prop_assert_eq!(phi_reconstruction(&cache, &factorize(n)).unwrap(), BigUint::from(n));
    }

    #[test]
    fn a_divisors_are_divisors_with_endpoints(system in solvable_system(), n in 1u64..100_000) {
        let f = factorize(n);
        let ds: Vec<u64> = a_divisors(&system, &f).unwrap().map(|d| d.to_u64().unwrap()).collect();
        prop_assert!(ds.iter().all(|&d| n % d == 0));
        prop_assert!(ds.contains(&n));
        let unique: BTreeSet<u64> = ds.iter().copied().collect();
        prop_assert_eq!(unique.len(), ds.len());
    }

    #[test]
    fn phi_is_multiplicative(system in solvable_system(), a in 1u64..2000, b in 1u64..2000) {
        prop_assume!(num_integer::gcd(a, b) == 1);
        let cache = PhiCache::new(system);
        let lhs = phi_a(&cache, &factorize(a * b)).unwrap();
        let rhs = phi_a(&cache, &factorize(a)).unwrap() * phi_a(&cache, &factorize(b)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn exponential_phi_closed_form(p in prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 97, 101]), nu in 1u32..40) {
        let t = solve_phi(&DivisorSystem::exponential(), p, nu).unwrap();
        prop_assert_eq!(t.get(nu).unwrap(), &phi_exponential_closed_form(p, nu));
    }

    #[test]
    fn sigma_a_matches_divisor_sum(kind in builtin(), n in 1u64..1_000_000) {
        let system = DivisorSystem::builtin(kind);
        let f = factorize(n);
        let brute: BigUint = a_divisors(&system, &f).unwrap().map(|d| d.to_biguint()).sum();
        prop_assert_eq!(sigma_a(&system, &f).unwrap(), brute);
    }

    #[test]
    fn rho_scan_monotone(kind in builtin(), p in prop::sample::select(vec![2u64, 3, 5, 7, 31]), a in 1u32..30, b in 1u32..30) {
        let f = MultFn::sigma_over_id(&DivisorSystem::builtin(kind)).without_metadata();
        let (lo, hi) = (a.min(b), a.max(b));
        let r_lo = rho(&f, p, lo);
        prop_assert_eq!(r_lo.status, RhoStatus::ScanBounded);
        prop_assert!(rho(&f, p, hi).value.to_f64() >= r_lo.value.to_f64());
        prop_assert!(r_lo.value.to_f64() >= 1.0);
    }

    #[test]
    fn finite_filter_divides_out(mask in prop::collection::vec(any::<bool>(), 10)) {
        let small = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
        let chosen: Vec<u64> = small.iter().zip(&mask).filter(|(_, &m)| m).map(|(&p, _)| p).collect();
        let f = MultFn::sigma_over_id(&DivisorSystem::unitary()).without_metadata();
        let opts = AnalysisOptions::default();
        let s = PrimeSetFilter::finite(chosen.iter().copied()).unwrap();
        let with = r_product(&f, 10_000, Some(&s), &opts).unwrap();
        let without = r_product(&f, 10_000, None, &opts).unwrap();
        let removed: f64 = chosen.iter().map(|&p| local_factor(&f, p).unwrap()).product();
        prop_assert!((with.lower - without.lower / removed).abs() < 1e-12);
        prop_assert!(with.lower <= with.upper);
    }

    #[test]
    fn mobius_sums_vanish(n in 2u64..20_000) {
        let f = factorize(n);
        let total: i64 = a_divisors(&DivisorSystem::standard(), &f)
            .unwrap()
            .map(|d| mobius(d.to_u64().unwrap()) as i64)
            .sum();
        prop_assert_eq!(total, 0);
    }
}

#[test]
fn enclosures_shrink_around_six_over_pi_squared() {
    let f = MultFn::sigma_over_id(&DivisorSystem::unitary());
    let opts = AnalysisOptions::default();
    let mut widths = Vec::new();
    for cutoff in [1_000u64, 10_000, 100_000, 1_000_000] {
        let e = r_product(&f, cutoff, None, &opts).unwrap();
        assert!(e.contains(SIX_OVER_PI_SQUARED), "cutoff {cutoff}: {e:?}");
        widths.push(e.width());
    }
    assert!(widths.windows(2).all(|w| w[1] < w[0]), "{widths:?}");
}

#[test]
fn champion_log_n_is_linear_in_x() {
    let f = MultFn::sigma_over_id(&DivisorSystem::standard());
    for x in [10_000u64, 100_000, 1_000_000] {
        let pt = champion_at(&f, x, 0.01, &Sieve::default()).unwrap();
        assert!(pt.log_n <= 1.2 * x as f64, "x = {x}: log n = {}", pt.log_n);
        assert!(pt.ratio <= 1.02 * EXP_GAMMA);
    }
}

#[test]
fn unitary_champion_deviations_shrink() {
    let target = SIX_OVER_PI_SQUARED * EXP_GAMMA;
    let f = MultFn::sigma_over_id(&DivisorSystem::unitary());
    let devs: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&x| (champion_at(&f, x, DEFAULT_EPS, &Sieve::default()).unwrap().ratio - target).abs())
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
}

/// The capped schedule drops primes above `sqrt(x)`, so `log log n` exceeds
/// `log sqrt(x)` by about `log 2` and the gap closes only like
/// `log 2 / log sqrt(x)`; it is not monotone between grid points.
#[test]
fn exponential_champion_gap_follows_square_root_cut() {
    let target = SIX_OVER_PI_SQUARED * EXP_GAMMA;
    let f = MultFn::sigma_over_id(&DivisorSystem::exponential());
    let mut devs = Vec::new();
    for x in [10_000u64, 100_000, 1_000_000, 10_000_000] {
        let pt = champion_at(&f, x, DEFAULT_EPS, &Sieve::default()).unwrap();
        let half_log = 0.5 * (x as f64).ln();
        let leading = target * std::f64::consts::LN_2 / (half_log + std::f64::consts::LN_2);
        assert!(pt.ratio < target, "x = {x}");
        assert!(target - pt.ratio < leading, "x = {x}: {} vs {leading}", target - pt.ratio);
        devs.push(target - pt.ratio);
    }
    assert!(devs[3] < devs[0], "{devs:?}");
}

#[test]
fn exponential_schedule_uses_squares_below_root() {
    let f = MultFn::sigma_over_id(&DivisorSystem::exponential());
    let s = default_schedule(&f, 1_000_000, 2, &Sieve::default()).unwrap();
    assert!(s.entries.iter().filter(|&&(p, _)| p <= 1000).all(|&(_, e)| e == 2));
}

/// Second implementation: `sigma(n)` by trial division of every `n`.
fn sigma_brute(n: u64) -> u64 {
    let mut total = 0;
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            total += d;
            if d * d != n {
                total += n / d;
            }
        }
        d += 1;
    }
    total
}

#[test]
fn scan_matches_brute_force() {
    let f = MultFn::sigma_over_id(&DivisorSystem::standard());
    let recs = empirical_scan(&f, 10_000).unwrap();
    let mut best = 0.0f64;
    let mut expected = Vec::new();
    for n in 16..=10_000u64 {
        let v = sigma_brute(n) as f64 / n as f64;
        if v > best {
            best = v;
            expected.push(n);
        }
    }
    assert_eq!(recs.iter().map(|r| r.n).collect::<Vec<_>>(), expected);
}

#[test]
fn scan_records_respect_upper_constant() {
    let f = MultFn::sigma_over_id(&DivisorSystem::standard());
    for r in empirical_scan(&f, 1_000_000).unwrap().iter().filter(|r| r.n >= 1000) {
        assert!(r.ratio <= EXP_GAMMA * 1.02, "{r:?}");
    }
}
