//! Multiplicative functions given by their prime-power values, `sigma_A`,
//! and the `phi_A` solver.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::divisors::{a_divisors, BuiltinKind, DivisorSystem};
use crate::primes::{factorize, mobius, Factored};
use crate::{Error, Result};

/// Prime-power value rule `(p, nu) -> f(p^nu)` for `nu >= 1`.
pub type ValueRule = Arc<dyn Fn(u64, u32) -> f64 + Send + Sync>;

/// Per-prime closed form for `rho(p)`.
pub type RhoRule = Arc<dyn Fn(u64) -> RhoHint + Send + Sync>;

/// Above this a single prime-power value pushes [`MultFn::eval`] into log space.
const LOG_SPACE_THRESHOLD: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoValue {
    Finite(f64),
    Infinite,
}

impl RhoValue {
    pub fn to_f64(self) -> f64 {
        match self {
            RhoValue::Finite(v) => v,
            RhoValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, RhoValue::Finite(_))
    }
}

/// Declared value of `rho(p)`, and the exponent attaining it if the sup is a max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoHint {
    pub value: RhoValue,
    pub attained_at: Option<u32>,
}

/// `|(1 - 1/p) rho(p) - 1| <= constant / p^2` for every `p > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub constant: f64,
    pub threshold: u64,
}

/// What a [`MultFn`] was built from, when that matters downstream.
#[derive(Debug, Clone)]
pub enum FnShape {
    Generic,
    /// `sigma_A(n) / n`.
    SigmaOverId(DivisorSystem),
    /// `n / phi_A(n)`.
    IdOverPhi(DivisorSystem),
}

/// A nonnegative multiplicative function with optional analyst metadata.
#[derive(Clone)]
pub struct MultFn {
    name: String,
    value: ValueRule,
    log_value: Option<ValueRule>,
    rho_hint: Option<RhoRule>,
    tail: Option<TailEnvelope>,
    monotone_after: Option<u32>,
    shape: FnShape,
}

impl fmt::Debug for MultFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultFn")
            .field("name", &self.name)
            .field("rho_hint", &self.rho_hint.is_some())
            .field("tail", &self.tail)
            .field("monotone_after", &self.monotone_after)
            .field("shape", &self.shape)
            .finish()
    }
}

impl MultFn {
    pub fn new(name: impl Into<String>, value: ValueRule) -> Self {
        MultFn {
            name: name.into(),
            value,
            log_value: None,
            rho_hint: None,
            tail: None,
            monotone_after: None,
            shape: FnShape::Generic,
        }
    }

    pub fn from_fn(name: impl Into<String>, value: impl Fn(u64, u32) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, Arc::new(value))
    }

    pub fn with_rho_hint(mut self, hint: RhoRule) -> Self {
        self.rho_hint = Some(hint);
        self
    }

    pub fn with_tail_envelope(mut self, envelope: TailEnvelope) -> Self {
        self.tail = Some(envelope);
        self
    }

    /// Declares `f(p^nu)` non-increasing in `nu` for `nu >= peak`, at every prime.
    pub fn with_monotone_after(mut self, peak: u32) -> Self {
        self.monotone_after = Some(peak);
        self
    }

    /// Same values, no metadata.
    pub fn without_metadata(mut self) -> Self {
        self.rho_hint = None;
        self.tail = None;
        self.monotone_after = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &FnShape {
        &self.shape
    }

    pub fn tail_envelope(&self) -> Option<TailEnvelope> {
        self.tail
    }

    pub fn monotone_after(&self) -> Option<u32> {
        self.monotone_after
    }

    pub fn rho_hint(&self, p: u64) -> Option<RhoHint> {
        self.rho_hint.as_ref().map(|h| h(p))
    }

    pub fn has_rho_hint(&self) -> bool {
        self.rho_hint.is_some()
    }

    /// `f(p^nu)`; always `1` at `nu = 0`.
    pub fn value_at(&self, p: u64, nu: u32) -> f64 {
        if nu == 0 {
            1.0
        } else {
            (self.value)(p, nu)
        }
    }

    /// `log f(p^nu)`, exact in log space where the function provides it.
    pub fn log_value_at(&self, p: u64, nu: u32) -> f64 {
        if nu == 0 {
            return 0.0;
        }
        match &self.log_value {
            Some(rule) => rule(p, nu),
            None => (self.value)(p, nu).ln(),
        }
    }

    /// `f(n)`.
    pub fn eval(&self, n: &Factored) -> f64 {
        let values: Vec<f64> = n.factors().iter().map(|&(p, nu)| self.value_at(p, nu)).collect();
        if values.iter().any(|&v| v > LOG_SPACE_THRESHOLD) {
            self.log_eval(n).exp()
        } else {
            values.iter().product()
        }
    }

    /// `log f(n)`.
    pub fn log_eval(&self, n: &Factored) -> f64 {
        n.factors().iter().map(|&(p, nu)| self.log_value_at(p, nu)).sum()
    }

    /// The constant function `1`.
    pub fn one() -> Self {
        MultFn::from_fn("one", |_, _| 1.0)
            .with_rho_hint(Arc::new(|_| RhoHint { value: RhoValue::Finite(1.0), attained_at: Some(0) }))
    }

    /// `f(n) = n`.
    pub fn identity() -> Self {
        MultFn::from_fn("id", |p, nu| (p as f64).powi(nu as i32))
            .with_rho_hint(Arc::new(|_| RhoHint { value: RhoValue::Infinite, attained_at: None }))
    }

    /// `sigma_A(n) / n`, with closed-form `rho` for the built-in systems.
    pub fn sigma_over_id(system: &DivisorSystem) -> Self {
        let sys = system.clone();
        let mut f = MultFn::new(
            format!("sigma_{}/id", system.name()),
            Arc::new(move |p, nu| {
                let pf = p as f64;
                sys.admissible(p, nu).iter().map(|&d| pf.powi(-((nu - d) as i32))).sum()
            }),
        );
        f.shape = FnShape::SigmaOverId(system.clone());
        match system.builtin_kind() {
            Some(BuiltinKind::Standard) => f
                .with_rho_hint(Arc::new(|p| RhoHint {
                    value: RhoValue::Finite(p as f64 / (p as f64 - 1.0)),
                    attained_at: None,
                }))
                .with_tail_envelope(TailEnvelope { constant: 0.0, threshold: 1 }),
            Some(BuiltinKind::Unitary) => f
                .with_rho_hint(Arc::new(|p| RhoHint {
                    value: RhoValue::Finite(1.0 + 1.0 / p as f64),
                    attained_at: Some(1),
                }))
                .with_tail_envelope(TailEnvelope { constant: 1.0, threshold: 1 })
                .with_monotone_after(1),
            Some(BuiltinKind::Exponential) => f
                .with_rho_hint(Arc::new(|p| RhoHint {
                    value: RhoValue::Finite(1.0 + 1.0 / p as f64),
                    attained_at: Some(2),
                }))
                .with_tail_envelope(TailEnvelope { constant: 1.0, threshold: 1 }),
            None => f,
        }
    }

    /// `n / phi_A(n)`. Fails if `phi_A` does not exist for `system`.
    pub fn id_over_phi(system: &DivisorSystem) -> Result<Self> {
        system.phi_solvability()?;
        let cache = Arc::new(PhiCache::new(system.clone()));
        let c1 = Arc::clone(&cache);
        let c2 = Arc::clone(&cache);
        let mut f = MultFn::new(
            format!("id/phi_{}", system.name()),
            Arc::new(move |p, nu| c1.ratio(p, nu).unwrap_or(f64::NAN)),
        );
        f.log_value = Some(Arc::new(move |p, nu| c2.log_ratio(p, nu).unwrap_or(f64::NAN)));
        f.shape = FnShape::IdOverPhi(system.clone());
        let attained = match system.builtin_kind() {
            Some(BuiltinKind::Standard) | Some(BuiltinKind::Unitary) => Some(1),
            Some(BuiltinKind::Exponential) => Some(2),
            None => None,
        };
        if let Some(nu) = attained {
            f = f
                .with_rho_hint(Arc::new(move |p| RhoHint {
                    value: RhoValue::Finite(p as f64 / (p as f64 - 1.0)),
                    attained_at: Some(nu),
                }))
                .with_tail_envelope(TailEnvelope { constant: 0.0, threshold: 1 });
        }
        Ok(f)
    }

    /// Values from explicit tables; unlisted prime powers take `default`.
    pub fn from_tables(
        name: impl Into<String>,
        per_prime: BTreeMap<(u64, u32), f64>,
        per_exponent: BTreeMap<u32, f64>,
        default: f64,
    ) -> Result<Self> {
        let name = name.into();
        let bad = per_prime.values().chain(per_exponent.values()).chain(std::iter::once(&default));
        if let Some(v) = bad.into_iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Precondition(format!("function `{name}` has invalid value {v}")));
        }
        if per_prime.keys().any(|&(_, nu)| nu == 0) || per_exponent.contains_key(&0) {
            return Err(Error::Precondition(format!("function `{name}` overrides f(p^0) = 1")));
        }
        Ok(MultFn::from_fn(name, move |p, nu| {
            per_prime.get(&(p, nu)).or_else(|| per_exponent.get(&nu)).copied().unwrap_or(default)
        }))
    }
}

/// `phi_A(p^nu)` for `0 <= nu <= nu_max`, exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiTable {
    system: String,
    p: u64,
    powers: Vec<BigUint>,
    entries: Vec<BigUint>,
}

impl PhiTable {
    fn new(system: &DivisorSystem, p: u64) -> Self {
        PhiTable { system: system.name().to_string(), p, powers: vec![BigUint::one()], entries: vec![BigUint::one()] }
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn nu_max(&self) -> u32 {
        (self.entries.len() - 1) as u32
    }

    pub fn get(&self, nu: u32) -> Option<&BigUint> {
        self.entries.get(nu as usize)
    }

    pub fn entries(&self) -> &[BigUint] {
        &self.entries
    }

    /// `p^nu / phi_A(p^nu)`.
    pub fn ratio(&self, nu: u32) -> f64 {
        big_ratio(&self.powers[nu as usize], &self.entries[nu as usize])
    }

    pub fn log_ratio(&self, nu: u32) -> f64 {
        big_ln(&self.powers[nu as usize]) - big_ln(&self.entries[nu as usize])
    }

    /// Grows the table to `nu_max`, checking solvability for every new `nu`
    /// before computing anything.
    fn extend(&mut self, system: &DivisorSystem, nu_max: u32) -> Result<()> {
        let start = self.entries.len() as u32;
        if let Some(nu) = (start..=nu_max).find(|&nu| !system.contains(self.p, nu, nu)) {
            return Err(Error::Unsolvable { p: self.p, nu });
        }
        let pb = BigUint::from(self.p);
        for nu in start..=nu_max {
            let power = &self.powers[nu as usize - 1] * &pb;
            let lower: BigUint =
                system.admissible(self.p, nu).into_iter().filter(|&d| d < nu).map(|d| &self.entries[d as usize]).sum();
            if lower >= power {
                return Err(Error::Contract(format!(
                    "phi_A recursion left no positive value at p = {}, nu = {nu}",
                    self.p
                )));
            }
            self.entries.push(&power - lower);
            self.powers.push(power);
        }
        Ok(())
    }
}

/// Solves `sum_{delta in AE_p(nu)} phi_A(p^delta) = p^nu` upward from
/// `phi_A(1) = 1`.
pub fn solve_phi(system: &DivisorSystem, p: u64, nu_max: u32) -> Result<PhiTable> {
    if nu_max < 1 {
        return Err(Error::Precondition("solve_phi needs nu_max >= 1".into()));
    }
    if !system.claims_multiplicative() {
        return Err(Error::NotMultiplicative(system.name().to_string()));
    }
    let mut table = PhiTable::new(system, p);
    table.extend(system, nu_max)?;
    Ok(table)
}

/// Per-system memo of [`PhiTable`]s, grown on demand.
#[derive(Debug)]
pub struct PhiCache {
    system: DivisorSystem,
    tables: Mutex<HashMap<u64, PhiTable>>,
}

impl PhiCache {
    pub fn new(system: DivisorSystem) -> Self {
        PhiCache { system, tables: Mutex::new(HashMap::new()) }
    }

    pub fn system(&self) -> &DivisorSystem {
        &self.system
    }

    pub fn with_table<R>(&self, p: u64, nu: u32, read: impl FnOnce(&PhiTable) -> R) -> Result<R> {
        if !self.system.claims_multiplicative() {
            return Err(Error::NotMultiplicative(self.system.name().to_string()));
        }
        let mut tables = self.tables.lock().expect("phi cache poisoned");
        let table = tables.entry(p).or_insert_with(|| PhiTable::new(&self.system, p));
        if table.nu_max() < nu {
            table.extend(&self.system, nu)?;
        }
        Ok(read(table))
    }

    pub fn phi(&self, p: u64, nu: u32) -> Result<BigUint> {
        self.with_table(p, nu, |t| t.entries[nu as usize].clone())
    }

    pub fn ratio(&self, p: u64, nu: u32) -> Result<f64> {
        self.with_table(p, nu, |t| t.ratio(nu))
    }

    pub fn log_ratio(&self, p: u64, nu: u32) -> Result<f64> {
        self.with_table(p, nu, |t| t.log_ratio(nu))
    }
}

/// `phi_A(n)` as the product of its prime-power values.
pub fn phi_a(cache: &PhiCache, n: &Factored) -> Result<BigUint> {
    n.factors().iter().try_fold(BigUint::one(), |acc, &(p, nu)| Ok(acc * cache.phi(p, nu)?))
}

/// `sum_{kappa | nu} mu(nu / kappa) p^kappa`, the exponential-divisor `phi`.
pub fn phi_exponential_closed_form(p: u64, nu: u32) -> BigUint {
    if nu == 0 {
        return BigUint::one();
    }
    let pb = BigInt::from(p);
    let total: BigInt =
        (1..=nu).filter(|k| nu.is_multiple_of(*k)).map(|k| BigInt::from(mobius((nu / k) as u64)) * pb.pow(k)).sum();
    total.to_biguint().expect("closed form is positive")
}

/// `sigma_A(n) = sum_{d in A(n)} d`, as a product of prime-local sums.
pub fn sigma_a(system: &DivisorSystem, n: &Factored) -> Result<BigUint> {
    if !system.claims_multiplicative() {
        return Err(Error::NotMultiplicative(system.name().to_string()));
    }
    let small = n.factors().iter().try_fold(1u128, |acc, &(p, nu)| {
        let local =
            system.admissible(p, nu).into_iter().try_fold(0u128, |s, d| s.checked_add((p as u128).checked_pow(d)?))?;
        acc.checked_mul(local)
    });
    if let Some(v) = small {
        return Ok(BigUint::from(v));
    }
    Ok(n.factors().iter().fold(BigUint::one(), |acc, &(p, nu)| {
        let pb = BigUint::from(p);
        let local: BigUint = system.admissible(p, nu).into_iter().map(|d| pb.pow(d)).sum();
        acc * local
    }))
}

/// Reconstruction `sum_{d in A(n)} phi_A(d)`, which must equal `n`.
pub fn phi_reconstruction(cache: &PhiCache, n: &Factored) -> Result<BigUint> {
    let mut total = BigUint::zero();
    for d in a_divisors(cache.system(), n)? {
        total += phi_a(cache, &d)?;
    }
    Ok(total)
}

/// The inequality at the exponent `e_p` with `e_p - 1 in AE_p(e_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCheck {
    pub e_p: u32,
    /// `f(p^e) = p^e / phi_A(p^e)`.
    pub value: f64,
    /// `p (p - 1) / (p^2 - 2p + 2)`.
    pub value_bound: f64,
    /// `f(p^e) / rho(p)`, with `rho` the best known value.
    pub ratio_to_rho: f64,
    /// `p (p - 2) / (p^2 - 2p + 2)`.
    pub ratio_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiBoundsReport {
    pub p: u64,
    pub nu_max: u32,
    /// `max_{nu <= nu_max} p^nu / phi_A(p^nu)`.
    pub max_ratio: f64,
    /// `(p - 1) / (p - 2)`, a strict upper bound for every ratio.
    pub upper_bound: f64,
    pub worst_upper_margin: f64,
    pub upper_pass: bool,
    pub lower: Option<LowerBoundCheck>,
    pub pass: bool,
}

/// Audits `p^nu / phi_A(p^nu) < (p-1)/(p-2)` for `nu <= nu_max` and, when some
/// `e <= nu_max` has `e - 1 in AE_p(e)`, the lower bound at the smallest such `e`.
/// Comparisons are exact integer comparisons; the floats are for display.
pub fn phi_bounds_check(system: &DivisorSystem, p: u64, nu_max: u32) -> Result<PhiBoundsReport> {
    if p <= 2 {
        return Err(Error::Precondition(format!("phi_bounds_check needs an odd prime, got {p}")));
    }
    let table = solve_phi(system, p, nu_max)?;
    let pb = BigUint::from(p);
    let upper_bound = (p - 1) as f64 / (p - 2) as f64;
    let mut upper_pass = true;
    let mut max_ratio: f64 = 1.0;
    for nu in 0..=nu_max {
        let (power, phi) = (&table.powers[nu as usize], &table.entries[nu as usize]);
        if power * BigUint::from(p - 2) >= phi * BigUint::from(p - 1) {
            upper_pass = false;
        }
        max_ratio = max_ratio.max(table.ratio(nu));
    }
    let rho = match MultFn::id_over_phi(system).ok().and_then(|f| f.rho_hint(p)) {
        Some(RhoHint { value: RhoValue::Finite(v), .. }) => v.max(max_ratio),
        _ => max_ratio,
    };
    let quad = p * p - 2 * p + 2;
    let lower = (1..=nu_max).find(|&e| system.contains(p, e, e - 1)).map(|e| {
        let (power, phi) = (&table.powers[e as usize], &table.entries[e as usize]);
        let exact_ok = power * BigUint::from(quad) >= phi * &pb * BigUint::from(p - 1);
        let value = table.ratio(e);
        let ratio_bound = (p * (p - 2)) as f64 / quad as f64;
        let ratio_to_rho = value / rho;
        LowerBoundCheck {
            e_p: e,
            value,
            value_bound: (p * (p - 1)) as f64 / quad as f64,
            ratio_to_rho,
            ratio_bound,
            pass: exact_ok && ratio_to_rho >= ratio_bound * (1.0 - 1e-12),
        }
    });
    let pass = upper_pass && lower.as_ref().is_none_or(|l| l.pass);
    Ok(PhiBoundsReport {
        p,
        nu_max,
        max_ratio,
        upper_bound,
        worst_upper_margin: upper_bound - max_ratio,
        upper_pass,
        lower,
        pass,
    })
}

pub(crate) fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
    }
}

fn big_ratio(a: &BigUint, b: &BigUint) -> f64 {
    let bits = a.bits().max(b.bits());
    if bits <= 1000 {
        a.to_f64().expect("fits") / b.to_f64().expect("fits")
    } else {
        (big_ln(a) - big_ln(b)).exp()
    }
}

/// `sigma_A(n)` summed over the enumerated `A(n)`.
pub fn sigma_a_by_enumeration(system: &DivisorSystem, n: u64) -> Result<BigUint> {
    Ok(a_divisors(system, &factorize(n))?.map(|d| d.to_biguint()).sum())
}
