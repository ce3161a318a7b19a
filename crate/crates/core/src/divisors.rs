//! Multiplicative divisor systems described prime-locally by their sets of
//! admissible exponents `AE_p(nu) = { delta : p^delta in A(p^nu) }`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith::MultFn;
use crate::primes::{factorize, is_prime, Factored, SpfTable};
use crate::{Error, Result};

/// Largest `bound` accepted by [`check_multiplicative`].
pub const CHECK_BOUND_CEILING: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinKind {
    /// All divisors: `AE_p(nu) = {0, ..., nu}`.
    Standard,
    /// Unitary divisors: `AE_p(nu) = {0, nu}`.
    Unitary,
    /// Exponential divisors: `AE_p(nu) = { delta >= 1 : delta | nu }`.
    Exponential,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 3] = [BuiltinKind::Standard, BuiltinKind::Unitary, BuiltinKind::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::Standard => "standard",
            BuiltinKind::Unitary => "unitary",
            BuiltinKind::Exponential => "exponential",
        }
    }

    fn admissible(self, nu: u32) -> Vec<u32> {
        if nu == 0 {
            return vec![0];
        }
        match self {
            BuiltinKind::Standard => (0..=nu).collect(),
            BuiltinKind::Unitary => vec![0, nu],
            BuiltinKind::Exponential => (1..=nu).filter(|d| nu.is_multiple_of(*d)).collect(),
        }
    }

    fn contains(self, nu: u32, delta: u32) -> bool {
        if nu == 0 {
            return delta == 0;
        }
        match self {
            BuiltinKind::Standard => delta <= nu,
            BuiltinKind::Unitary => delta == 0 || delta == nu,
            BuiltinKind::Exponential => delta >= 1 && nu.is_multiple_of(delta),
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(BuiltinKind::Standard),
            "unitary" => Ok(BuiltinKind::Unitary),
            "exponential" => Ok(BuiltinKind::Exponential),
            other => Err(Error::Precondition(format!("unknown divisor system kind `{other}`"))),
        }
    }
}

/// Explicit admissible-exponent overrides on top of a built-in rule.
///
/// Lookup order is `(p, nu)`, then `nu` for every prime, then the base rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentTable {
    base: BuiltinKind,
    per_prime: BTreeMap<(u64, u32), Vec<u32>>,
    per_exponent: BTreeMap<u32, Vec<u32>>,
}

impl ExponentTable {
    pub fn new(base: BuiltinKind) -> Self {
        ExponentTable { base, per_prime: BTreeMap::new(), per_exponent: BTreeMap::new() }
    }

    pub fn base(&self) -> BuiltinKind {
        self.base
    }

    pub fn set_for_prime(&mut self, p: u64, nu: u32, exponents: impl IntoIterator<Item = u32>) -> &mut Self {
        self.per_prime.insert((p, nu), normalized(exponents));
        self
    }

    pub fn set_for_exponent(&mut self, nu: u32, exponents: impl IntoIterator<Item = u32>) -> &mut Self {
        self.per_exponent.insert(nu, normalized(exponents));
        self
    }

    pub fn per_prime(&self) -> &BTreeMap<(u64, u32), Vec<u32>> {
        &self.per_prime
    }

    pub fn per_exponent(&self) -> &BTreeMap<u32, Vec<u32>> {
        &self.per_exponent
    }

    fn lookup(&self, p: u64, nu: u32) -> Option<&[u32]> {
        self.per_prime.get(&(p, nu)).or_else(|| self.per_exponent.get(&nu)).map(Vec::as_slice)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let entries = self
            .per_prime
            .iter()
            .map(|(&(p, nu), set)| (Some(p), nu, set))
            .chain(self.per_exponent.iter().map(|(&nu, set)| (None, nu, set)));
        for (p, nu, set) in entries {
            if let Some(p) = p {
                if !is_prime(p) {
                    return Err(format!("table key {p} is not prime"));
                }
            }
            if nu == 0 && set.as_slice() != [0] {
                return Err(format!("AE_p(0) must be {{0}}, table gives {set:?}"));
            }
            if let Some(&d) = set.iter().find(|&&d| d > nu) {
                return Err(format!("exponent {d} exceeds nu = {nu}"));
            }
        }
        Ok(())
    }
}

fn normalized(exponents: impl IntoIterator<Item = u32>) -> Vec<u32> {
    exponents.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Rule {
    Builtin(BuiltinKind),
    /// Standard at odd primes; at 2, `{0..=nu}` for `nu` in the set and
    /// `{nu}` otherwise.
    Pathological(BTreeSet<u32>),
    Table(ExponentTable),
}

/// Membership test `d in A(n)` for systems that are not given prime-locally.
pub type CompositeRule = Arc<dyn Fn(&Factored, &Factored) -> bool + Send + Sync>;

/// A divisor system `A`. Built through the constructors below; all of them
/// except [`DivisorSystem::non_local`] are multiplicative by construction.
#[derive(Clone)]
pub struct DivisorSystem {
    name: String,
    rule: Rule,
    composite: Option<CompositeRule>,
    claims_multiplicative: bool,
}

impl fmt::Debug for DivisorSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivisorSystem")
            .field("name", &self.name)
            .field("rule", &self.rule)
            .field("composite", &self.composite.is_some())
            .field("claims_multiplicative", &self.claims_multiplicative)
            .finish()
    }
}

impl DivisorSystem {
    pub fn builtin(kind: BuiltinKind) -> Self {
        DivisorSystem {
            name: kind.name().to_string(),
            rule: Rule::Builtin(kind),
            composite: None,
            claims_multiplicative: true,
        }
    }

    pub fn standard() -> Self {
        Self::builtin(BuiltinKind::Standard)
    }

    pub fn unitary() -> Self {
        Self::builtin(BuiltinKind::Unitary)
    }

    pub fn exponential() -> Self {
        Self::builtin(BuiltinKind::Exponential)
    }

    /// The 2-power system whose `phi_A(2^nu) / 2^nu` has no positive lower
    /// bound when the gaps of `n_set` are unbounded.
    pub fn pathological(n_set: impl IntoIterator<Item = u32>) -> Result<Self> {
        let set: BTreeSet<u32> = n_set.into_iter().collect();
        let name = "pathological".to_string();
        if set.is_empty() {
            return Err(Error::InvalidSystem { name, reason: "N must be nonempty".into() });
        }
        if set.contains(&0) {
            return Err(Error::InvalidSystem { name, reason: "N must contain positive integers".into() });
        }
        Ok(DivisorSystem { name, rule: Rule::Pathological(set), composite: None, claims_multiplicative: true })
    }

    pub fn from_table(name: impl Into<String>, table: ExponentTable) -> Result<Self> {
        let name = name.into();
        table.validate().map_err(|reason| Error::InvalidSystem { name: name.clone(), reason })?;
        Ok(DivisorSystem { name, rule: Rule::Table(table), composite: None, claims_multiplicative: true })
    }

    /// A system given by an arbitrary membership test `d in A(n)`. It is not
    /// claimed multiplicative; [`check_multiplicative`] can probe it.
    pub fn non_local(name: impl Into<String>, membership: CompositeRule) -> Self {
        DivisorSystem {
            name: name.into(),
            rule: Rule::Builtin(BuiltinKind::Standard),
            composite: Some(membership),
            claims_multiplicative: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn claims_multiplicative(&self) -> bool {
        self.claims_multiplicative
    }

    pub fn builtin_kind(&self) -> Option<BuiltinKind> {
        match (&self.rule, &self.composite) {
            (Rule::Builtin(k), None) => Some(*k),
            _ => None,
        }
    }

    pub fn pathological_set(&self) -> Option<&BTreeSet<u32>> {
        match &self.rule {
            Rule::Pathological(set) => Some(set),
            _ => None,
        }
    }

    pub fn table(&self) -> Option<&ExponentTable> {
        match &self.rule {
            Rule::Table(t) => Some(t),
            _ => None,
        }
    }

    /// `AE_p(nu)` in increasing order.
    pub fn admissible(&self, p: u64, nu: u32) -> Vec<u32> {
        if let Some(member) = &self.composite {
            let n = Factored::prime_power(p, nu);
            return (0..=nu).filter(|&d| member(&n, &Factored::prime_power(p, d))).collect();
        }
        match &self.rule {
            Rule::Builtin(k) => k.admissible(nu),
            Rule::Pathological(set) => {
                if p != 2 || nu == 0 {
                    BuiltinKind::Standard.admissible(nu)
                } else if set.contains(&nu) {
                    (0..=nu).collect()
                } else {
                    vec![nu]
                }
            }
            Rule::Table(t) => t.lookup(p, nu).map(<[u32]>::to_vec).unwrap_or_else(|| t.base.admissible(nu)),
        }
    }

    /// `delta in AE_p(nu)`.
    pub fn contains(&self, p: u64, nu: u32, delta: u32) -> bool {
        if self.composite.is_some() {
            return self.admissible(p, nu).contains(&delta);
        }
        match &self.rule {
            Rule::Builtin(k) => k.contains(nu, delta),
            Rule::Pathological(set) => {
                if p != 2 || nu == 0 {
                    BuiltinKind::Standard.contains(nu, delta)
                } else if set.contains(&nu) {
                    delta <= nu
                } else {
                    delta == nu
                }
            }
            Rule::Table(t) => match t.lookup(p, nu) {
                Some(set) => set.binary_search(&delta).is_ok(),
                None => t.base.contains(nu, delta),
            },
        }
    }

    /// `d in A(n)`, assuming `d | n`.
    pub fn admits(&self, n: &Factored, d: &Factored) -> bool {
        if let Some(member) = &self.composite {
            return member(n, d);
        }
        n.factors().iter().all(|&(p, nu)| self.contains(p, nu, d.exponent_of(p)))
    }

    /// Largest prime with a rule of its own; beyond it the system is the same
    /// at every prime.
    pub fn special_prime_bound(&self) -> u64 {
        match &self.rule {
            Rule::Builtin(_) => 0,
            Rule::Pathological(_) => 2,
            Rule::Table(t) => t.per_prime.keys().map(|&(p, _)| p).max().unwrap_or(0),
        }
    }

    /// Whether `phi_A` exists, i.e. `nu in AE_p(nu)` everywhere. The rule data
    /// is finite, so this is decidable; the first failure (smallest `nu`, then
    /// smallest `p`, `p = 0` meaning "every prime") is reported.
    pub fn phi_solvability(&self) -> Result<()> {
        if self.composite.is_some() {
            return Err(Error::Contract(format!("system `{}` is not prime-local", self.name)));
        }
        let Rule::Table(t) = &self.rule else {
            return Ok(());
        };
        let mut failures: Vec<(u32, u64)> = t
            .per_prime
            .iter()
            .filter(|((_, nu), set)| set.binary_search(nu).is_err())
            .map(|(&(p, nu), _)| (nu, p))
            .collect();
        for (&nu, set) in &t.per_exponent {
            if set.binary_search(&nu).is_err() {
                // only matters at primes without their own override for nu
                failures.push((nu, 0));
            }
        }
        match failures.into_iter().min() {
            Some((nu, p)) => Err(Error::Unsolvable { p, nu }),
            None => Ok(()),
        }
    }
}

/// Lazy enumeration of `A(n)` in lexicographic exponent order (first prime
/// most significant).
#[derive(Debug, Clone)]
pub struct ADivisors {
    choices: Vec<(u64, Vec<u32>)>,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for ADivisors {
    type Item = Factored;

    fn next(&mut self) -> Option<Factored> {
        if self.done {
            return None;
        }
        let pairs = self
            .choices
            .iter()
            .zip(&self.index)
            .filter_map(|((p, set), &i)| (set[i] > 0).then_some((*p, set[i])))
            .collect();
        let out = Factored::from_sorted_unchecked(pairs);
        self.done = true;
        for k in (0..self.index.len()).rev() {
            self.index[k] += 1;
            if self.index[k] < self.choices[k].1.len() {
                self.done = false;
                break;
            }
            self.index[k] = 0;
        }
        Some(out)
    }
}

/// `A(n) = prod_p { p^delta : delta in AE_p(nu_p) }`.
pub fn a_divisors(system: &DivisorSystem, n: &Factored) -> Result<ADivisors> {
    if !system.claims_multiplicative {
        return Err(Error::NotMultiplicative(system.name.clone()));
    }
    let choices: Vec<(u64, Vec<u32>)> = n.factors().iter().map(|&(p, nu)| (p, system.admissible(p, nu))).collect();
    let done = choices.iter().any(|(_, set)| set.is_empty());
    let index = vec![0; choices.len()];
    Ok(ADivisors { choices, index, done })
}

/// `(f *_A g)(n) = sum_{d in A(n)} f(d) g(n/d)`.
pub fn convolve_at(system: &DivisorSystem, f: &MultFn, g: &MultFn, n: &Factored) -> Result<f64> {
    let mut acc = 0.0;
    for d in a_divisors(system, n)? {
        let rest = n.div(&d).expect("A-divisors divide n");
        acc += f.eval(&d) * g.eval(&rest);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    MultiplicativeUpToBound,
    Violated,
}

/// Coprime `n1, n2` and a divisor that lies in exactly one of `A(n1 n2)` and
/// `A(n1) A(n2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub n1: u64,
    pub n2: u64,
    pub divisor: u64,
    /// True when the divisor is in `A(n1 n2)` but not in the product set.
    pub in_composite: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemWitness {
    pub verdict: Verdict,
    pub violation: Option<Violation>,
    pub bound: u64,
    pub pairs_checked: u64,
}

/// Brute-force `A(n)` from the membership test, over all divisors of `n`.
fn enumerate_members(system: &DivisorSystem, n: &Factored) -> Vec<u64> {
    let standard = DivisorSystem::standard();
    let mut out: Vec<u64> = a_divisors(&standard, n)
        .expect("standard system is multiplicative")
        .filter(|d| system.admits(n, d))
        .map(|d| d.to_u64().expect("divisor of a bounded n"))
        .collect();
    out.sort_unstable();
    out
}

/// Checks `A(n1 n2) = A(n1) A(n2)` for every coprime pair with
/// `n1 * n2 <= bound`, reporting the first violation.
pub fn check_multiplicative(system: &DivisorSystem, bound: u64) -> Result<SystemWitness> {
    if bound > CHECK_BOUND_CEILING {
        return Err(Error::Precondition(format!("check_multiplicative bound {bound} exceeds {CHECK_BOUND_CEILING}")));
    }
    let bound = bound.max(1);
    let spf = SpfTable::new(bound as u32);
    let members: Vec<Vec<u64>> = std::iter::once(Vec::new())
        .chain((1..=bound).map(|n| enumerate_members(system, &spf.factorize(n as u32))))
        .collect();
    let mut pairs_checked = 0;
    for n1 in 1..=bound {
        for n2 in (n1 + 1)..=(bound / n1) {
            if num_integer::gcd(n1, n2) != 1 {
                continue;
            }
            pairs_checked += 1;
            let left = &members[(n1 * n2) as usize];
            let mut right: Vec<u64> =
                members[n1 as usize].iter().flat_map(|&a| members[n2 as usize].iter().map(move |&b| a * b)).collect();
            right.sort_unstable();
            right.dedup();
            if *left != right {
                let only_left = left.iter().find(|d| right.binary_search(d).is_err());
                let only_right = right.iter().find(|d| left.binary_search(d).is_err());
                let (divisor, in_composite) = match (only_left, only_right) {
                    (Some(&a), Some(&b)) if b < a => (b, false),
                    (Some(&a), _) => (a, true),
                    (None, Some(&b)) => (b, false),
                    (None, None) => unreachable!("sets differ"),
                };
                return Ok(SystemWitness {
                    verdict: Verdict::Violated,
                    violation: Some(Violation { n1, n2, divisor, in_composite }),
                    bound,
                    pairs_checked,
                });
            }
        }
    }
    Ok(SystemWitness { verdict: Verdict::MultiplicativeUpToBound, violation: None, bound, pairs_checked })
}

/// `A(n)` for a plain integer, convenience for small cases.
pub fn a_divisors_of(system: &DivisorSystem, n: u64) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = a_divisors(system, &factorize(n))?.map(|d| d.to_u64().expect("divisor of a u64")).collect();
    out.sort_unstable();
    Ok(out)
}
