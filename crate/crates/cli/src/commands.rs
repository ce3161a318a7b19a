use num_bigint::BigUint;
use serde_json::{json, Value};

use maxorder::arith::{phi_a, phi_reconstruction};
use maxorder::constants::EXP_NEG_GAMMA;
use maxorder::constructions::{
    build_counterexample, champion_series, counterexample_probes, counterexample_scan, empirical_scan,
    phi_champion_series, unbounded_witness, CounterexampleOptions, SeriesRow, WitnessOptions,
};
use maxorder::divisors::{check_multiplicative, Verdict};
use maxorder::extremal::{maximal_order_constant, minimal_order_constant_phi, rho, ConstantReport};
use maxorder::{factorize, DivisorSystem, Error, MultFn, PhiCache, PrimeSetFilter, RhoValue};

use crate::config::{FunctionError, Order, RunConfig, NU_CEILING};
use crate::output::{num, opt_num, Report};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Precondition(_) | Error::InvalidSystem { .. } => EXIT_CONFIG,
            Error::Resource(_) | Error::SieveCeiling { .. } => EXIT_RESOURCE,
            Error::Contract(_)
            | Error::NotMultiplicative(_)
            | Error::Unsolvable { .. }
            | Error::InfiniteLocalFactor { .. }
            | Error::Hypothesis { .. }
            | Error::Schedule { .. } => EXIT_AUDIT,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<FunctionError> for CliError {
    fn from(e: FunctionError) -> Self {
        match e {
            FunctionError::Config(m) => CliError::config(m),
            FunctionError::Library(e) => e.into(),
        }
    }
}

type Outcome = Result<Report, CliError>;

fn system(cfg: &RunConfig) -> Result<DivisorSystem, CliError> {
    cfg.build_system().map_err(CliError::config)
}

fn function(cfg: &RunConfig, system: &DivisorSystem) -> Result<MultFn, CliError> {
    Ok(cfg.build_function(system)?)
}

fn filter(cfg: &RunConfig) -> Result<Option<PrimeSetFilter>, CliError> {
    cfg.build_filter().map_err(CliError::config)
}

pub fn cmd_rho(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let f = function(cfg, &sys)?;
    let mut report = Report::new("rho", vec!["p", "rho", "status", "attained_at"]);
    report.set("function", json!(f.name()));
    for p in cfg.sieve().primes_up_to(cfg.analysis.prime_bound)?.iter() {
        let est = rho(&f, p, cfg.analysis.scan_limit);
        let value = match est.value {
            RhoValue::Finite(v) => num(v),
            RhoValue::Infinite => json!("inf"),
        };
        let status = serde_json::to_value(est.status).expect("status serializes");
        report.push(vec![json!(p), value, status, json!(est.attained_at)]);
    }
    Ok(report)
}

fn constant_json(report: &mut Report, c: &ConstantReport, cutoff: u64) {
    report.set("kind", serde_json::to_value(c.kind).expect("kind serializes"));
    report.set("subject", json!(c.subject));
    report.set("constant_lower", num(c.constant.lower));
    report.set("constant_upper", num(c.constant.upper));
    report.set("product_lower", num(c.product.lower));
    report.set("product_upper", num(c.product.upper));
    report.set("certified", json!(c.constant.certified));
    report.set("tail_source", serde_json::to_value(c.constant.tail_source).expect("tail serializes"));
    report.set("cutoff", json!(cutoff));
    report.set(
        "hypothesis_audit",
        json!({
            "primes_checked": c.audit.primes_checked,
            "extreme_local_factor": num(c.audit.extreme_local_factor),
            "max_e_p": c.audit.max_e_p,
            "passed": c.audit.passed,
        }),
    );
    if let Some((lo, hi)) = c.prefactor {
        report.set("prefactor", json!([num(lo), num(hi)]));
    }
    report.set("asserted", serde_json::to_value(c.asserted).expect("flag serializes"));
    report.set("assertion_flags", json!(c.flags));
}

fn compute_constant(
    cfg: &RunConfig,
    sys: &DivisorSystem,
) -> Result<(ConstantReport, Option<PrimeSetFilter>), CliError> {
    let opts = cfg.analysis_options();
    let cutoff = cfg.analysis.cutoff;
    match cfg.analysis.order {
        Order::Minimal => Ok((minimal_order_constant_phi(sys, cutoff, &opts)?, None)),
        Order::Maximal => {
            let f = function(cfg, sys)?;
            let s = filter(cfg)?;
            Ok((maximal_order_constant(&f, cutoff, s.as_ref(), &opts)?, s))
        }
    }
}

pub fn cmd_constant(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let (c, s) = compute_constant(cfg, &sys)?;
    let mut report = Report::new("constant", vec!["quantity", "lower", "upper"]);
    report.push(vec![json!("constant"), num(c.constant.lower), num(c.constant.upper)]);
    report.push(vec![json!("product"), num(c.product.lower), num(c.product.upper)]);
    constant_json(&mut report, &c, cfg.analysis.cutoff);
    if !c.audit.passed {
        report.failure = Some("hypothesis audit failed".into());
    }
    let target = cfg.analysis.witness_target;
    if target > 0.0 {
        let s = s.ok_or_else(|| CliError::config("witness_target needs a [filter] section"))?;
        let f = function(cfg, &sys)?;
        let x_max = cfg.analysis.x_grid.last().copied().unwrap_or(1_000_000);
        let opts = WitnessOptions { nu_ceiling: NU_CEILING, sieve: cfg.sieve(), ..WitnessOptions::up_to(x_max) };
        let w = unbounded_witness(&f, &s, target, &opts)?;
        report.push(vec![json!("witness_ratio"), num(w.ratio), num(w.ratio)]);
        report.set(
            "witness",
            json!({
                "n1": w.n1.factors(),
                "x": w.x,
                "level": w.level,
                "log_n2": num(w.log_n2),
                "log_f": num(w.log_f_n1 + w.log_f_n2),
                "ratio": num(w.ratio),
                "target": num(w.target),
            }),
        );
    }
    Ok(report)
}

fn series_report(rows: &[SeriesRow]) -> Report {
    let mut report = Report::new("champion", vec!["x", "big_p", "log_n", "ratio", "target", "deviation"]);
    for r in rows {
        let p = &r.point;
        report.push(vec![
            json!(p.x),
            json!(p.big_p),
            num(p.log_n),
            num(p.ratio),
            opt_num(r.target),
            opt_num(r.deviation),
        ]);
    }
    report
}

pub fn cmd_champion(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let grid = &cfg.analysis.x_grid;
    let sieve = cfg.sieve();
    let rows = match cfg.analysis.order {
        Order::Minimal => {
            let target = minimal_order_constant_phi(&sys, cfg.analysis.cutoff, &cfg.analysis_options())
                .map(|c| c.constant.midpoint())
                .unwrap_or(EXP_NEG_GAMMA);
            phi_champion_series(&sys, grid, Some(target), &sieve)?
        }
        Order::Maximal => {
            let f = function(cfg, &sys)?;
            let target = maximal_order_constant(&f, cfg.analysis.cutoff, None, &cfg.analysis_options())
                .ok()
                .filter(|c| c.constant.upper.is_finite())
                .map(|c| c.constant.midpoint());
            champion_series(&f, grid, cfg.analysis.eps, target, &sieve)?
        }
    };
    Ok(series_report(&rows))
}

pub fn cmd_scan(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let f = function(cfg, &sys)?;
    let mut report = Report::new("scan", vec!["n", "f", "ratio"]);
    for r in empirical_scan(&f, cfg.analysis.n_max)? {
        report.push(vec![json!(r.n), num(r.f), num(r.ratio)]);
    }
    report.set("function", json!(f.name()));
    Ok(report)
}

pub fn cmd_counterexample(cfg: &RunConfig) -> Outcome {
    let s = match filter(cfg)? {
        Some(s) => s,
        None => PrimeSetFilter::residue(4, [3], false)?,
    };
    let cx = &cfg.counterexample;
    let opts = CounterexampleOptions { nu_ceiling: cx.nu_ceiling, sieve: cfg.sieve() };
    let cf = build_counterexample(&s, cx.j_max, cx.bound, &opts)?;
    let probes = counterexample_probes(&cf, &cx.heights, &opts.sieve)?;
    let scan = counterexample_scan(&cf, &probes);
    let mut report =
        Report::new("counterexample", vec!["height", "log_n", "f", "ratio", "k", "f_n1", "factorial_bound_ok"]);
    for r in &scan.rows {
        report.push(vec![
            num(r.height),
            num(r.log_n),
            num(r.f),
            num(r.ratio),
            json!(r.k),
            num(r.f_n1),
            json!(r.factorial_bound_ok),
        ]);
    }
    let schedule: Vec<Value> = cf
        .schedule()
        .iter()
        .map(|q| json!({"j": q.j, "p": q.p, "nu": q.nu, "log_q": num(q.log_q), "log_g": num(q.log_g)}))
        .collect();
    report.set("filter", json!(s.label()));
    report.set("schedule", Value::Array(schedule));
    let maxima: Vec<Value> = scan.height_maxima.iter().map(|&(h, r)| json!([num(h), num(r)])).collect();
    report.set("height_maxima", Value::Array(maxima));
    report.set("maxima_non_increasing", json!(scan.maxima_non_increasing));
    report.set("factorial_bound_ok", json!(scan.factorial_bound_ok));
    if !scan.factorial_bound_ok {
        report.failure = Some("f(n_1) exceeds k! on some probe".into());
    } else if !scan.maxima_non_increasing {
        report.failure = Some("running maxima increase across heights".into());
    }
    Ok(report)
}

pub fn cmd_phi(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let cache = PhiCache::new(sys);
    let a = &cfg.analysis;
    if !a.n_list.is_empty() {
        let mut report = Report::new("phi", vec!["n", "phi_a", "ratio"]);
        for &n in &a.n_list {
            let v = phi_a(&cache, &factorize(n))?;
            report.push(vec![json!(n), json!(v.to_string()), num(n as f64 / biguint_f64(&v))]);
        }
        return Ok(report);
    }
    let mut report = Report::new("phi", vec!["p", "nu", "phi_a"]);
    for &p in &a.primes {
        if !maxorder::primes::is_prime(p) {
            return Err(CliError::config(format!("{p} is not prime")));
        }
        for nu in 0..=a.nu_max {
            report.push(vec![json!(p), json!(nu), json!(cache.phi(p, nu)?.to_string())]);
        }
    }
    Ok(report)
}

fn biguint_f64(v: &BigUint) -> f64 {
    v.to_string().parse().unwrap_or(f64::INFINITY)
}

pub fn cmd_check(cfg: &RunConfig) -> Outcome {
    let sys = system(cfg)?;
    let bound = cfg.analysis.check_bound;
    let witness = check_multiplicative(&sys, bound)?;
    let mut report = Report::new("check", vec!["audit", "bound", "checked", "passed", "detail"]);
    let violated = witness.verdict == Verdict::Violated;
    let detail = witness
        .violation
        .as_ref()
        .map(|v| format!("n1={} n2={} divisor={}", v.n1, v.n2, v.divisor))
        .unwrap_or_default();
    report.push(vec![
        json!("multiplicative"),
        json!(bound),
        json!(witness.pairs_checked),
        json!(!violated),
        json!(detail),
    ]);
    report.set("system_witness", serde_json::to_value(&witness).expect("witness serializes"));

    let reconstruction = match sys.phi_solvability() {
        Err(e @ Error::Unsolvable { .. }) => {
            report.push(vec![json!("reconstruction"), json!(bound), json!(0), json!("skipped"), json!(e.to_string())]);
            json!({"skipped": e.to_string()})
        }
        Err(e) => return Err(e.into()),
        Ok(()) => {
            let cache = PhiCache::new(sys.clone());
            let mut first_bad = None;
            for n in 1..=bound {
                if phi_reconstruction(&cache, &factorize(n))? != BigUint::from(n) {
                    first_bad = Some(n);
                    break;
                }
            }
            let detail = first_bad.map(|n| format!("fails at n={n}")).unwrap_or_default();
            report.push(vec![
                json!("reconstruction"),
                json!(bound),
                json!(first_bad.unwrap_or(bound)),
                json!(first_bad.is_none()),
                json!(detail),
            ]);
            json!({"bound": bound, "first_failure": first_bad, "passed": first_bad.is_none()})
        }
    };
    report.set("reconstruction", reconstruction);
    if violated {
        report.failure = Some(format!("system `{}` is not multiplicative up to {bound}", sys.name()));
    } else if report.rows.last().is_some_and(|r| r[3] == json!(false)) {
        report.failure = Some("reconstruction identity fails".into());
    }
    Ok(report)
}
