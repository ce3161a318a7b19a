//! `rho(p)`, the local factors `(1 - 1/p) rho(p)`, certified enclosures of
//! the Euler products built from them, and the extremal-order constants.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{FnShape, MultFn, RhoHint, RhoValue};
use crate::constants::{EXP_GAMMA, EXP_NEG_GAMMA, FLOAT_SLACK};
use crate::divisors::DivisorSystem;
use crate::primes::{is_prime, Sieve};
use crate::{Error, Result};

pub const DEFAULT_SCAN_LIMIT: u32 = 64;

/// Relative tolerance for the hypothesis audits, which compare floats that
/// are equal in exact arithmetic (e.g. `(1 - 1/p) * p/(p - 1)`).
const AUDIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoStatus {
    /// From a closed form, or a scan backed by a monotonicity certificate.
    Exact,
    /// Maximum over a finite scan; only a lower bound for the sup.
    ScanBounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub p: u64,
    pub value: RhoValue,
    pub attained_at: Option<u32>,
    pub status: RhoStatus,
}

/// `rho(p) = sup_nu f(p^nu)`.
///
/// A declared hint wins. Otherwise `f(p^nu)` is scanned for
/// `0 <= nu <= scan_limit`, or up to the declared monotonicity peak, which
/// makes the result exact.
pub fn rho(f: &MultFn, p: u64, scan_limit: u32) -> RhoEstimate {
    if let Some(RhoHint { value, attained_at }) = f.rho_hint(p) {
        return RhoEstimate { p, value, attained_at, status: RhoStatus::Exact };
    }
    let (limit, status) = match f.monotone_after() {
        Some(peak) => (peak, RhoStatus::Exact),
        None => (scan_limit.max(1), RhoStatus::ScanBounded),
    };
    let (mut best, mut arg) = (1.0, 0);
    for nu in 1..=limit {
        let v = f.value_at(p, nu);
        if v > best {
            best = v;
            arg = nu;
        }
    }
    let value = if best.is_finite() { RhoValue::Finite(best) } else { RhoValue::Infinite };
    RhoEstimate { p, value, attained_at: Some(arg), status }
}

/// `(1 - 1/p) rho(p)`.
pub fn local_factor(f: &MultFn, p: u64) -> Result<f64> {
    match rho(f, p, DEFAULT_SCAN_LIMIT).value {
        RhoValue::Finite(v) => Ok((1.0 - 1.0 / p as f64) * v),
        RhoValue::Infinite => Err(Error::InfiniteLocalFactor { p }),
    }
}

#[derive(Clone)]
pub enum Membership {
    Finite(BTreeSet<u64>),
    Residue { modulus: u64, residues: BTreeSet<u64> },
    Predicate(Arc<dyn Fn(u64) -> bool + Send + Sync>),
}

impl fmt::Debug for Membership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Membership::Finite(s) => f.debug_tuple("Finite").field(s).finish(),
            Membership::Residue { modulus, residues } => {
                f.debug_struct("Residue").field("modulus", modulus).field("residues", residues).finish()
            }
            Membership::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

/// A set `S` of primes, with the caller's claim about `sum_{p in S} 1/p`.
#[derive(Debug, Clone)]
pub struct PrimeSetFilter {
    label: String,
    membership: Membership,
    declared_thin: bool,
}

impl PrimeSetFilter {
    /// A finite set; finite sets are thin.
    pub fn finite(primes: impl IntoIterator<Item = u64>) -> Result<Self> {
        let set: BTreeSet<u64> = primes.into_iter().collect();
        if let Some(&q) = set.iter().find(|&&q| !is_prime(q)) {
            return Err(Error::Precondition(format!("{q} is not prime")));
        }
        let label = format!("{set:?}");
        Ok(PrimeSetFilter { label, membership: Membership::Finite(set), declared_thin: true })
    }

    /// Primes `p` with `p mod modulus` in `residues`.
    pub fn residue(modulus: u64, residues: impl IntoIterator<Item = u64>, declared_thin: bool) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::Precondition("modulus must be positive".into()));
        }
        let residues: BTreeSet<u64> = residues.into_iter().map(|r| r % modulus).collect();
        let filter = PrimeSetFilter {
            label: format!("p mod {modulus} in {residues:?}"),
            membership: Membership::Residue { modulus, residues },
            declared_thin,
        };
        filter.check_declared_thin()?;
        Ok(filter)
    }

    pub fn predicate(
        label: impl Into<String>,
        member: impl Fn(u64) -> bool + Send + Sync + 'static,
        declared_thin: bool,
    ) -> Self {
        PrimeSetFilter { label: label.into(), membership: Membership::Predicate(Arc::new(member)), declared_thin }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn membership(&self) -> &Membership {
        &self.membership
    }

    pub fn declared_thin(&self) -> bool {
        self.declared_thin
    }

    pub fn contains(&self, p: u64) -> bool {
        match &self.membership {
            Membership::Finite(s) => s.contains(&p),
            Membership::Residue { modulus, residues } => residues.contains(&(p % modulus)),
            Membership::Predicate(f) => f(p),
        }
    }

    pub fn finite_members(&self) -> Option<&BTreeSet<u64>> {
        match &self.membership {
            Membership::Finite(s) => Some(s),
            _ => None,
        }
    }

    /// Rejects declarations that are decidably wrong: a finite set declared
    /// fat, or a residue class holding infinitely many primes declared thin.
    pub fn check_declared_thin(&self) -> Result<()> {
        match &self.membership {
            Membership::Finite(_) if !self.declared_thin => {
                Err(Error::Precondition(format!("finite set {} is thin but declared otherwise", self.label)))
            }
            Membership::Residue { modulus, residues } => {
                let fat = residues.iter().any(|&r| num_integer::gcd(r, *modulus) == 1);
                if fat == self.declared_thin {
                    Err(Error::Precondition(format!(
                        "{}: sum of 1/p {} but declared_thin = {}",
                        self.label,
                        if fat { "diverges" } else { "is finite" },
                        self.declared_thin
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// `sum_{p in S, p <= x} 1/p`.
    pub fn reciprocal_sum(&self, primes: &[u64]) -> f64 {
        primes.iter().filter(|&&p| self.contains(p)).map(|&p| 1.0 / p as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSource {
    Envelope,
    ExactHint,
    /// Bounds derived from inequalities every admissible system satisfies.
    Analytic,
    None,
}

/// Enclosure `[lower, upper]` of an infinite product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductEstimate {
    pub lower: f64,
    pub upper: f64,
    pub cutoff: u64,
    pub tail_source: TailSource,
    pub certified: bool,
}

impl ProductEstimate {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    fn scaled(&self, lo: f64, hi: f64) -> ProductEstimate {
        let slack = if self.certified { FLOAT_SLACK } else { 0.0 };
        ProductEstimate { lower: (self.lower * lo - slack).max(0.0), upper: self.upper * hi + slack, ..*self }
    }
}

/// Which upper-bound hypothesis the caller asserts. Neither is decidable by a
/// finite computation; the choice is carried into every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssertedHypothesis {
    /// `R` converges unconditionally.
    #[default]
    UnconditionalConvergence,
    /// `R` converges and `rho(p) <= 1 + o(log p / p)`.
    SmallExcess,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub scan_limit: u32,
    /// Return `[0, inf)` instead of an uncertified partial product.
    pub require_certified: bool,
    pub sieve: Sieve,
    pub asserted: AssertedHypothesis,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            scan_limit: DEFAULT_SCAN_LIMIT,
            require_certified: false,
            sieve: Sieve::default(),
            asserted: AssertedHypothesis::default(),
        }
    }
}

/// Sum of `log((1 - 1/p) rho(p))` over unfiltered `p`, plus its rounding bound
/// and whether every `rho` was exact. Summed in ascending prime order.
fn local_log_sum(
    f: &MultFn,
    primes: &[u64],
    filter: Option<&PrimeSetFilter>,
    scan_limit: u32,
) -> Result<(f64, f64, bool)> {
    let terms: Vec<Result<Option<(f64, bool)>>> = primes
        .par_iter()
        .map(|&p| {
            if filter.is_some_and(|s| s.contains(p)) {
                return Ok(None);
            }
            let est = rho(f, p, scan_limit);
            match est.value {
                RhoValue::Finite(v) => Ok(Some(((-1.0 / p as f64).ln_1p() + v.ln(), est.status == RhoStatus::Exact))),
                RhoValue::Infinite => Err(Error::InfiniteLocalFactor { p }),
            }
        })
        .collect();
    let (mut sum, mut abs, mut count, mut exact) = (0.0, 0.0, 0usize, true);
    for t in terms {
        if let Some((v, ex)) = t? {
            sum += v;
            abs += v.abs();
            count += 1;
            exact &= ex;
        }
    }
    let rounding = (count as f64 + 4.0) * f64::EPSILON * abs;
    Ok((sum, rounding, exact))
}

/// `R = prod_p (1 - 1/p) rho(p)`, or `R_S` when primes in `filter` are
/// skipped. The partial product runs over `p <= cutoff`; the tail comes from
/// the function's envelope: `|log(1 + c_p)| <= 2 |c_p|` once `|c_p| <= 1/2`
/// and `sum_{n > x} n^-2 <= 1/x` give `|log tail| <= 2C / cutoff`.
pub fn r_product(
    f: &MultFn,
    cutoff: u64,
    filter: Option<&PrimeSetFilter>,
    opts: &AnalysisOptions,
) -> Result<ProductEstimate> {
    let table = opts.sieve.primes_up_to(cutoff)?;
    let (sum, rounding, exact) = local_log_sum(f, table.primes(), filter, opts.scan_limit)?;
    let (tail, tail_source) = match f.tail_envelope() {
        Some(env) if cutoff >= env.threshold.max(1) && env.constant == 0.0 => (0.0, TailSource::ExactHint),
        Some(env) if cutoff >= env.threshold.max(1) && env.constant / cutoff as f64 <= 0.5 => {
            (2.0 * env.constant / cutoff as f64, TailSource::Envelope)
        }
        _ => (0.0, TailSource::None),
    };
    let certified = exact && tail_source != TailSource::None;
    if !certified && opts.require_certified {
        return Ok(ProductEstimate {
            lower: 0.0,
            upper: f64::INFINITY,
            cutoff,
            tail_source: TailSource::None,
            certified: false,
        });
    }
    let slack = if certified { FLOAT_SLACK } else { 0.0 };
    Ok(ProductEstimate {
        lower: ((sum - tail - rounding).exp() - slack).max(0.0),
        upper: (sum + tail + rounding).exp() + slack,
        cutoff,
        tail_source,
        certified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKind {
    /// `limsup f(n) / log log n`.
    Maximal,
    /// `liminf phi_A(n) log log n / n`.
    MinimalPhi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisAudit {
    pub primes_checked: usize,
    /// Largest `(1 - 1/p) rho(p)` (maximal) or smallest `(1 - 1/p)^-1 inf`
    /// factor (minimal) seen.
    pub extreme_local_factor: f64,
    /// Largest exponent needed to witness the lower-bound hypothesis.
    pub max_e_p: u32,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub kind: ConstantKind,
    pub subject: String,
    /// Enclosure of the extremal constant itself.
    pub constant: ProductEstimate,
    /// Enclosure of the Euler product alone.
    pub product: ProductEstimate,
    /// `prod_{p in S} (1 - 1/p)` when a prime set is excluded.
    pub prefactor: Option<(f64, f64)>,
    pub audit: HypothesisAudit,
    pub asserted: AssertedHypothesis,
    pub flags: Vec<String>,
}

/// Checks, for `p <= cutoff` outside `S`, that `rho(p) <= (1 - 1/p)^-1` and
/// that some `e <= scan_limit` has `f(p^e) >= 1 + 1/p`.
fn audit_maximal(
    f: &MultFn,
    primes: &[u64],
    filter: Option<&PrimeSetFilter>,
    scan_limit: u32,
) -> Result<HypothesisAudit> {
    let checks: Vec<Result<Option<(f64, u32)>>> = primes
        .par_iter()
        .map(|&p| {
            if filter.is_some_and(|s| s.contains(p)) {
                return Ok(None);
            }
            let pf = p as f64;
            let rho_p = match rho(f, p, scan_limit).value {
                RhoValue::Finite(v) => v,
                RhoValue::Infinite => return Err(Error::InfiniteLocalFactor { p }),
            };
            let factor = (1.0 - 1.0 / pf) * rho_p;
            if factor > 1.0 + AUDIT_TOLERANCE {
                return Err(Error::Hypothesis { p, detail: format!("rho(p) = {rho_p} exceeds (1 - 1/p)^-1") });
            }
            let need = (1.0 + 1.0 / pf) * (1.0 - AUDIT_TOLERANCE);
            match (1..=scan_limit.max(1)).find(|&nu| f.value_at(p, nu) >= need) {
                Some(e) => Ok(Some((factor, e))),
                None => Err(Error::Hypothesis {
                    p,
                    detail: format!("no exponent e <= {scan_limit} with f(p^e) >= 1 + 1/p"),
                }),
            }
        })
        .collect();
    let mut audit = HypothesisAudit { primes_checked: 0, extreme_local_factor: 0.0, max_e_p: 0, passed: true };
    for c in checks {
        if let Some((factor, e)) = c? {
            audit.primes_checked += 1;
            audit.extreme_local_factor = audit.extreme_local_factor.max(factor);
            audit.max_e_p = audit.max_e_p.max(e);
        }
    }
    Ok(audit)
}

/// `e^gamma R` (or `e^gamma prod_{p in S}(1 - 1/p) R_S` with a thin prime set
/// `S`), the maximal-order constant of `f`. The hypotheses are audited for
/// every prime up to `cutoff`.
pub fn maximal_order_constant(
    f: &MultFn,
    cutoff: u64,
    filter: Option<&PrimeSetFilter>,
    opts: &AnalysisOptions,
) -> Result<ConstantReport> {
    if let Some(s) = filter {
        if !s.declared_thin() {
            return Err(Error::Precondition(format!(
                "prime set {} must be thin (sum of 1/p finite) to be excluded",
                s.label()
            )));
        }
    }
    let table = opts.sieve.primes_up_to(cutoff)?;
    let audit = audit_maximal(f, table.primes(), filter, opts.scan_limit)?;
    let product = r_product(f, cutoff, filter, opts)?;
    let mut flags = vec![hypothesis_flag(opts.asserted)];
    if !product.certified {
        flags.push(if f.tail_envelope().is_none() {
            "uncertified: no tail envelope".to_string()
        } else {
            "uncertified: rho(p) is scan-bounded for some p".to_string()
        });
    }
    let prefactor = filter.map(|s| match s.finite_members() {
        Some(members) => {
            let log: f64 = members.iter().map(|&p| (-1.0 / p as f64).ln_1p()).sum();
            let round = (members.len() as f64 + 4.0) * f64::EPSILON * log.abs();
            ((log - round).exp(), (log + round).exp())
        }
        None => {
            flags.push(format!("uncertified: product over {} truncated at {cutoff}", s.label()));
            let log: f64 = table.iter().filter(|&p| s.contains(p)).map(|p| (-1.0 / p as f64).ln_1p()).sum();
            (0.0, log.exp())
        }
    });
    let (pre_lo, pre_hi) = prefactor.unwrap_or((1.0, 1.0));
    let mut constant = product.scaled(EXP_GAMMA * pre_lo, EXP_GAMMA * pre_hi);
    if prefactor.is_some() && filter.is_some_and(|s| s.finite_members().is_none()) {
        constant.certified = false;
    }
    Ok(ConstantReport {
        kind: ConstantKind::Maximal,
        subject: f.name().to_string(),
        constant,
        product,
        prefactor,
        audit,
        asserted: opts.asserted,
        flags,
    })
}

fn hypothesis_flag(asserted: AssertedHypothesis) -> String {
    match asserted {
        AssertedHypothesis::UnconditionalConvergence => {
            "asserted, not machine-checked: R converges unconditionally".to_string()
        }
        AssertedHypothesis::SmallExcess => {
            "asserted, not machine-checked: R converges and rho(p) <= 1 + o(log p / p)".to_string()
        }
    }
}

/// Smallest `e` in `1..=limit` with `e - 1 in AE_p(e)`.
fn predecessor_exponent(system: &DivisorSystem, p: u64, limit: u32) -> Option<u32> {
    (1..=limit).find(|&e| system.contains(p, e, e - 1))
}

/// `e^-gamma prod_p (1 - 1/p)^-1 inf_nu phi_A(p^nu) / p^nu`.
///
/// Each local factor `m_p` is enclosed exactly from a closed form when the
/// system has one; otherwise between `p(p-2)/(p-1)^2` (from
/// `phi_A(p^nu) >= p^nu - p^(nu-1) - ... - 1`) and the scanned minimum. For
/// `p = 2` there is no lower bound and the factor may be zero. The tail
/// beyond `cutoff` lies in `[exp(-2/(cutoff-1)), exp(1/(cutoff-1))]` because
/// `1 - 1/(p-1)^2 <= m_p <= 1 + 1/(p-1)^2` whenever an exponent `e` with
/// `e - 1 in AE_p(e)` exists.
pub fn minimal_order_constant_phi(
    system: &DivisorSystem,
    cutoff: u64,
    opts: &AnalysisOptions,
) -> Result<ConstantReport> {
    if cutoff < 3 {
        return Err(Error::Precondition(format!("cutoff must be at least 3, got {cutoff}")));
    }
    let f = MultFn::id_over_phi(system)?;
    let audit_limit = cutoff.max(system.special_prime_bound());
    let table = opts.sieve.primes_up_to(audit_limit)?;
    // beyond the special primes the rule is the same everywhere, so one
    // representative prime covers the whole tail
    let mut representative = audit_limit + 1;
    while !is_prime(representative) {
        representative += 1;
    }
    let mut primes_checked = 0;
    let mut max_e_p = 0;
    for p in table.iter().filter(|&p| p > 2).chain(std::iter::once(representative)) {
        match predecessor_exponent(system, p, opts.scan_limit) {
            Some(e) => {
                primes_checked += 1;
                max_e_p = max_e_p.max(e);
            }
            None => {
                return Err(Error::Hypothesis {
                    p,
                    detail: format!("no exponent e <= {} with e - 1 in AE_p(e)", opts.scan_limit),
                })
            }
        }
    }

    let bounds: Vec<Result<(f64, f64, bool)>> =
        table.up_to(cutoff).par_iter().map(|&p| phi_local_bounds(&f, p, opts.scan_limit)).collect();
    let (mut log_lo, mut log_hi, mut abs, mut all_exact) = (0.0, 0.0, 0.0, true);
    let mut zero_lower = false;
    let mut zero_upper = false;
    let mut smallest: f64 = f64::INFINITY;
    for b in bounds {
        let (lo, hi, exact) = b?;
        all_exact &= exact;
        smallest = smallest.min(hi);
        if lo == 0.0 {
            zero_lower = true;
        } else {
            log_lo += lo.ln();
            abs += lo.ln().abs();
        }
        if hi == 0.0 {
            zero_upper = true;
        } else {
            log_hi += hi.ln();
        }
    }
    let rounding = (table.len() as f64 + 4.0) * f64::EPSILON * abs.max(log_hi.abs());
    let (tail_lo, tail_hi, tail_source) = match f.tail_envelope() {
        Some(env) if all_exact && env.constant == 0.0 && cutoff >= env.threshold => (0.0, 0.0, TailSource::ExactHint),
        Some(env) if all_exact && cutoff >= env.threshold && env.constant / cutoff as f64 <= 0.5 => {
            let t = 2.0 * env.constant / cutoff as f64;
            (-t, t, TailSource::Envelope)
        }
        _ => {
            let x = (cutoff - 1) as f64;
            (-2.0 / x, 1.0 / x, TailSource::Analytic)
        }
    };
    let lower = if zero_lower { 0.0 } else { ((log_lo + tail_lo - rounding).exp() - FLOAT_SLACK).max(0.0) };
    let upper = if zero_upper { 0.0 } else { (log_hi + tail_hi + rounding).exp() + FLOAT_SLACK };
    let product = ProductEstimate { lower, upper, cutoff, tail_source, certified: true };
    let constant = product.scaled(EXP_NEG_GAMMA, EXP_NEG_GAMMA);
    let mut flags = Vec::new();
    if zero_lower {
        flags.push("the factor at p = 2 has no positive lower bound; the constant may vanish".to_string());
    }
    Ok(ConstantReport {
        kind: ConstantKind::MinimalPhi,
        subject: f.name().to_string(),
        constant,
        product,
        prefactor: None,
        audit: HypothesisAudit { primes_checked, extreme_local_factor: smallest, max_e_p, passed: true },
        asserted: opts.asserted,
        flags,
    })
}

/// Enclosure of `m_p = (1 - 1/p)^-1 inf_nu phi_A(p^nu)/p^nu`; the flag says
/// whether it came from a closed form.
fn phi_local_bounds(f: &MultFn, p: u64, scan_limit: u32) -> Result<(f64, f64, bool)> {
    let pf = p as f64;
    let scale = pf / (pf - 1.0);
    if let Some(hint) = f.rho_hint(p) {
        return Ok(match hint.value {
            RhoValue::Finite(v) => (scale / v, scale / v, true),
            RhoValue::Infinite => (0.0, 0.0, true),
        });
    }
    let mut best_log = 0.0f64;
    for nu in 1..=scan_limit.max(1) {
        let l = f.log_value_at(p, nu);
        if l.is_nan() {
            return Err(Error::Contract(format!("n/phi_A undefined at p = {p}, nu = {nu}")));
        }
        best_log = best_log.max(l);
    }
    let hi = scale * (-best_log).exp();
    let lo = if p == 2 { 0.0 } else { pf * (pf - 2.0) / ((pf - 1.0) * (pf - 1.0)) };
    Ok((lo.min(hi), hi, false))
}

/// Exponents `2 <= a_1 < a_2 < ...` with
/// `(1 - 1/p) rho(p) = 1 - p^-a_1 + p^-a_2 - ...`, for `f = sigma_A / id`.
///
/// `rho(p)` is a base-`p` number with digits in `{0, 1}`. When the sup is
/// attained at `nu*` the digits are read off `AE_p(nu*)` exactly; otherwise
/// they are extracted greedily from the floating value. The exponents are
/// the positions `1..=depth` where the digit sequence changes.
pub fn alternating_decomposition(f: &MultFn, p: u64, depth: u32) -> Result<Vec<u32>> {
    let FnShape::SigmaOverId(system) = f.shape() else {
        return Err(Error::Contract(format!("`{}` is not of the form sigma_A / id", f.name())));
    };
    let est = rho(f, p, DEFAULT_SCAN_LIMIT);
    if est.status != RhoStatus::Exact {
        return Err(Error::Contract(format!("rho({p}) for `{}` is not certified", f.name())));
    }
    let digits: Vec<bool> = match (est.attained_at, est.value) {
        (Some(nu), _) => (0..=depth).map(|i| i <= nu && system.contains(p, nu, nu - i)).collect(),
        (None, RhoValue::Finite(v)) => {
            let pf = p as f64;
            let usable = ((12.0 / pf.log10()).floor() as u32).min(depth);
            let mut rest = v;
            (0..=usable)
                .map(|i| {
                    let w = pf.powi(-(i as i32));
                    let bit = rest >= w - 1e-15;
                    if bit {
                        rest -= w;
                    }
                    bit
                })
                .collect()
        }
        (None, RhoValue::Infinite) => return Err(Error::InfiniteLocalFactor { p }),
    };
    if !digits[0] {
        return Err(Error::Contract(format!("rho({p}) has no leading unit digit")));
    }
    Ok((1..digits.len()).filter(|&i| digits[i] != digits[i - 1]).map(|i| i as u32).collect())
}

/// `1 - p^-a_1 + p^-a_2 - ...`.
pub fn alternating_sum(p: u64, exponents: &[u32]) -> f64 {
    let pf = p as f64;
    exponents.iter().enumerate().fold(1.0, |acc, (k, &a)| {
        let term = pf.powi(-(a as i32));
        if k % 2 == 0 {
            acc - term
        } else {
            acc + term
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::SIX_OVER_PI_SQUARED;
    use crate::divisors::{BuiltinKind, ExponentTable};

    fn sigma(kind: BuiltinKind) -> MultFn {
        MultFn::sigma_over_id(&DivisorSystem::builtin(kind))
    }

    #[test]
    fn rho_examples() {
        let u = sigma(BuiltinKind::Unitary);
        for p in [2u64, 3, 5, 97] {
            let hinted = rho(&u, p, 64);
            let scanned = rho(&u.clone().without_metadata(), p, 64);
            assert_eq!(hinted.status, RhoStatus::Exact);
            assert_eq!(scanned.status, RhoStatus::ScanBounded);
            assert_eq!(scanned.attained_at, Some(1));
            assert!((scanned.value.to_f64() - (1.0 + 1.0 / p as f64)).abs() < 1e-15);
            assert_eq!(hinted.value, scanned.value);
        }
        let s = rho(&sigma(BuiltinKind::Standard), 2, 64);
        assert_eq!(s.value, RhoValue::Finite(2.0));
        assert_eq!(s.attained_at, None);
        let e = rho(&sigma(BuiltinKind::Exponential).without_metadata(), 2, 64);
        assert_eq!(e.attained_at, Some(2));
        assert_eq!(e.value, RhoValue::Finite(1.5));
        let monotone = sigma(BuiltinKind::Unitary).without_metadata().with_monotone_after(1);
        assert_eq!(rho(&monotone, 7, 1).status, RhoStatus::Exact);
    }

    #[test]
    fn rho_scan_is_monotone_in_limit() {
        let f = sigma(BuiltinKind::Standard).without_metadata();
        let mut prev = 0.0;
        for limit in 1..40 {
            let v = rho(&f, 3, limit).value.to_f64();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn local_factor_examples() {
        for p in [2u64, 3, 101, 7919] {
            assert!((local_factor(&sigma(BuiltinKind::Standard), p).unwrap() - 1.0).abs() < 1e-12);
            let pf = p as f64;
            let u = local_factor(&sigma(BuiltinKind::Unitary), p).unwrap();
            assert!((u - (1.0 - 1.0 / (pf * pf))).abs() < 1e-15);
        }
        assert_eq!(local_factor(&sigma(BuiltinKind::Unitary), 2).unwrap(), 0.75);
        assert_eq!(local_factor(&MultFn::identity(), 3), Err(Error::InfiniteLocalFactor { p: 3 }));
    }

    #[test]
    fn r_product_examples() {
        let opts = AnalysisOptions::default();
        let s = r_product(&sigma(BuiltinKind::Standard), 10_000, None, &opts).unwrap();
        assert!(s.contains(1.0) && s.width() <= 1e-3 && s.certified);
        let u = r_product(&sigma(BuiltinKind::Unitary), 10_000, None, &opts).unwrap();
        assert!(u.contains(SIX_OVER_PI_SQUARED));
        assert_eq!(u.tail_source, TailSource::Envelope);
        let everything = PrimeSetFilter::predicate("all", |_| true, false);
        let bare = MultFn::from_fn("bare", |_, _| 1.0);
        let empty = r_product(&bare, 1000, Some(&everything), &opts).unwrap();
        assert_eq!((empty.lower, empty.upper), (1.0, 1.0));
        assert!(!empty.certified);
    }

    #[test]
    fn uncertified_paths() {
        let f = sigma(BuiltinKind::Unitary).without_metadata();
        let opts = AnalysisOptions::default();
        let e = r_product(&f, 1000, None, &opts).unwrap();
        assert!(!e.certified && e.tail_source == TailSource::None);
        let strict = AnalysisOptions { require_certified: true, ..opts };
        let e = r_product(&f, 1000, None, &strict).unwrap();
        assert_eq!((e.lower, e.upper), (0.0, f64::INFINITY));
        let r = maximal_order_constant(&f, 1000, None, &opts).unwrap();
        assert!(r.flags.iter().any(|s| s == "uncertified: no tail envelope"));
    }

    #[test]
    fn enclosures_nest_and_contain() {
        let f = sigma(BuiltinKind::Unitary);
        let opts = AnalysisOptions::default();
        let mut prev: Option<ProductEstimate> = None;
        for cutoff in [1_000u64, 10_000, 100_000, 1_000_000] {
            let e = r_product(&f, cutoff, None, &opts).unwrap();
            assert!(e.contains(SIX_OVER_PI_SQUARED));
            if let Some(pe) = prev {
                assert!(e.width() < pe.width());
                assert!(e.lower <= pe.upper && pe.lower <= e.upper);
            }
            prev = Some(e);
        }
    }

    #[test]
    fn filter_consistency() {
        let f = sigma(BuiltinKind::Unitary).without_metadata();
        let opts = AnalysisOptions::default();
        let s = PrimeSetFilter::finite([2, 5, 13]).unwrap();
        let with = r_product(&f, 5000, Some(&s), &opts).unwrap().lower;
        let without = r_product(&f, 5000, None, &opts).unwrap().lower;
        let removed: f64 = [2u64, 5, 13].iter().map(|&p| local_factor(&f, p).unwrap()).product();
        assert!((with - without / removed).abs() < 1e-12);
    }

    #[test]
    fn maximal_constants() {
        let opts = AnalysisOptions::default();
        let s = maximal_order_constant(&sigma(BuiltinKind::Standard), 10_000, None, &opts).unwrap();
        assert!(s.constant.contains(EXP_GAMMA));
        assert_eq!(s.audit.max_e_p, 1);
        for kind in [BuiltinKind::Unitary, BuiltinKind::Exponential] {
            let r = maximal_order_constant(&sigma(kind), 100_000, None, &opts).unwrap();
            assert!(r.constant.contains(SIX_OVER_PI_SQUARED * EXP_GAMMA), "{kind}");
        }
        // excluding {2}: e^gamma (1/2) prod_{p>2}(1 - 1/p^2) = e^gamma (1/2)(6/pi^2)(4/3)
        let two = PrimeSetFilter::finite([2]).unwrap();
        let r = maximal_order_constant(&sigma(BuiltinKind::Unitary), 100_000, Some(&two), &opts).unwrap();
        let expected = EXP_GAMMA * 0.5 * SIX_OVER_PI_SQUARED * 4.0 / 3.0;
        assert!(r.constant.contains(expected));
        let fat = PrimeSetFilter::residue(4, [3], false).unwrap();
        assert!(maximal_order_constant(&sigma(BuiltinKind::Unitary), 100, Some(&fat), &opts).is_err());
    }

    #[test]
    fn hypothesis_violation_names_prime() {
        let f = MultFn::from_fn("too-big-at-3", |p, _| if p == 3 { 2.0 } else { 1.0 + 1.0 / p as f64 });
        let err = maximal_order_constant(&f, 100, None, &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { p: 3, .. }));
        let g = MultFn::from_fn("too-small", |p, _| if p == 5 { 1.0 } else { 1.0 + 1.0 / p as f64 });
        let err = maximal_order_constant(&g, 100, None, &AnalysisOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { p: 5, .. }));
    }

    #[test]
    fn minimal_constants() {
        let opts = AnalysisOptions::default();
        for kind in BuiltinKind::ALL {
            let r = minimal_order_constant_phi(&DivisorSystem::builtin(kind), 10_000, &opts).unwrap();
            assert!(r.constant.contains(EXP_NEG_GAMMA), "{kind}");
            assert!(r.constant.width() < 1e-9);
        }
    }

    #[test]
    fn minimal_constant_without_closed_form_still_encloses() {
        // same rule as the unitary system, but as a table: no closed form
        let sys = DivisorSystem::from_table("unitary-table", ExponentTable::new(BuiltinKind::Unitary)).unwrap();
        let r = minimal_order_constant_phi(&sys, 10_000, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.product.tail_source, TailSource::Analytic);
        assert_eq!(r.constant.lower, 0.0);
        assert!(r.constant.contains(EXP_NEG_GAMMA));
        assert!(r.constant.upper < EXP_NEG_GAMMA * 1.001);
    }

    #[test]
    fn pathological_minimal_constant_vanishes_below() {
        let sys = DivisorSystem::pathological([2, 4, 8, 16]).unwrap();
        let r = minimal_order_constant_phi(&sys, 1000, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.constant.lower, 0.0);
        // m_2 <= 2 * 2^-8 from phi(2^16) = 2^8
        assert!(r.constant.upper < EXP_NEG_GAMMA * 2.0 / 256.0 * 1.01);
        assert!(!r.flags.is_empty());
    }

    #[test]
    fn alternating_examples() {
        for p in [2u64, 3, 7, 101] {
            assert_eq!(alternating_decomposition(&sigma(BuiltinKind::Unitary), p, 40).unwrap(), vec![2]);
            assert!(alternating_decomposition(&sigma(BuiltinKind::Standard), p, 40).unwrap().is_empty());
        }
        let e = alternating_decomposition(&sigma(BuiltinKind::Exponential), 2, 40).unwrap();
        assert_eq!(e[0], 2);
        let stripped = sigma(BuiltinKind::Exponential).without_metadata();
        assert!(alternating_decomposition(&stripped, 2, 40).is_err());
        assert!(alternating_decomposition(&MultFn::one(), 2, 40).is_err());
    }

    #[test]
    fn alternating_round_trip() {
        let mut t = ExponentTable::new(BuiltinKind::Standard);
        t.set_for_exponent(5, [0, 2, 3, 5]).set_for_exponent(6, [0, 6]);
        let sys = DivisorSystem::from_table("holes", t).unwrap();
        let f = MultFn::sigma_over_id(&sys).with_monotone_after(12);
        for p in [2u64, 3, 5, 11] {
            let a = alternating_decomposition(&f, p, 60).unwrap();
            assert!(a.windows(2).all(|w| w[0] < w[1]));
            let lf = local_factor(&f, p).unwrap();
            assert!((alternating_sum(p, &a) - lf).abs() < 1e-12, "p = {p}: {a:?}");
        }
        for kind in BuiltinKind::ALL {
            for p in [2u64, 3, 5, 7] {
                let f = sigma(kind);
                let a = alternating_decomposition(&f, p, 60).unwrap();
                assert!((alternating_sum(p, &a) - local_factor(&f, p).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn thinness_declarations() {
        assert!(PrimeSetFilter::finite([2]).unwrap().check_declared_thin().is_ok());
        assert!(PrimeSetFilter::residue(4, [3], true).is_err());
        assert!(PrimeSetFilter::residue(4, [2], true).is_ok());
        assert!(PrimeSetFilter::residue(4, [3], false).is_ok());
        let s = PrimeSetFilter::finite([2]).unwrap();
        assert_eq!(s.reciprocal_sum(&[2, 3, 5]), 0.5);
    }
}
