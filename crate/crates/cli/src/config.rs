//! Run configuration: a TOML file with fixed sections, every key optional,
//! unknown keys rejected. `--print-effective-config` shows the result after
//! defaults and command-line overrides are applied.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use maxorder::constructions::{DEFAULT_NU_CEILING, SCAN_CEILING, SCAN_FLOOR};
use maxorder::divisors::CHECK_BOUND_CEILING;
use maxorder::extremal::{AnalysisOptions, AssertedHypothesis, DEFAULT_SCAN_LIMIT};
use maxorder::primes::DEFAULT_SIEVE_CEILING;
use maxorder::{BuiltinKind, DivisorSystem, ExponentTable, MultFn, PrimeSetFilter, Sieve};

/// Champion margin; small grids need more room than the library default.
pub const CLI_EPS: f64 = 0.01;

/// Largest exponent accepted for phi tables and witnesses.
pub const NU_CEILING: u32 = 4096;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub function: FunctionConfig,
    pub analysis: AnalysisConfig,
    pub filter: Option<FilterConfig>,
    pub counterexample: CounterexampleConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Standard,
    Unitary,
    Exponential,
    Pathological,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub kind: SystemKind,
    /// Exponents `n` with `AE_2(n) = {0..n}` (pathological systems).
    pub n_set: Vec<u32>,
    /// Fallback rule for table systems.
    pub base: BuiltinKind,
    /// Overrides for table systems; `prime` absent means every prime.
    pub exponent: Vec<ExponentOverride>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            kind: SystemKind::Standard,
            n_set: Vec::new(),
            base: BuiltinKind::Standard,
            exponent: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime: Option<u64>,
    pub nu: u32,
    pub exponents: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    /// `sigma_A(n) / n`.
    Sigma,
    /// `n / phi_A(n)`.
    Phi,
    /// Prime-power values from the `value` list.
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionConfig {
    pub kind: FunctionKind,
    /// Table functions: value at prime powers not listed.
    pub default: f64,
    pub value: Vec<ValueOverride>,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        FunctionConfig { kind: FunctionKind::Sigma, default: 1.0, value: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prime: Option<u64>,
    pub nu: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// `minimal` selects the minimal order of `phi_A` for `constant` and
    /// `champion`; the function section is then ignored.
    pub order: Order,
    pub cutoff: u64,
    pub scan_limit: u32,
    pub x_grid: Vec<u64>,
    pub eps: f64,
    /// `rho` table runs over primes up to this bound.
    pub prime_bound: u64,
    pub n_max: u64,
    pub check_bound: u64,
    /// `phi` table: primes and exponent range, or an explicit list of `n`.
    pub primes: Vec<u64>,
    pub nu_max: u32,
    pub n_list: Vec<u64>,
    pub require_certified: bool,
    pub asserted: AssertedHypothesis,
    pub sieve_ceiling: u64,
    /// Thin-set witness: target ratio; 0 disables the witness.
    pub witness_target: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            order: Order::Maximal,
            cutoff: 100_000,
            scan_limit: DEFAULT_SCAN_LIMIT,
            x_grid: vec![10_000, 100_000, 1_000_000],
            eps: CLI_EPS,
            prime_bound: 100,
            n_max: 10_000,
            check_bound: CHECK_BOUND_CEILING,
            primes: vec![2, 3, 5],
            nu_max: 6,
            n_list: Vec::new(),
            require_certified: false,
            asserted: AssertedHypothesis::default(),
            sieve_ceiling: DEFAULT_SIEVE_CEILING,
            witness_target: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Maximal,
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Finite,
    Residue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    #[serde(default)]
    pub primes: Vec<u64>,
    #[serde(default)]
    pub modulus: u64,
    #[serde(default)]
    pub residues: Vec<u64>,
    /// Asserts `sum_{p in S} 1/p < infinity`; checked where decidable.
    #[serde(default = "yes")]
    pub thin: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub j_max: u32,
    pub bound: u64,
    pub nu_ceiling: u32,
    pub heights: Vec<f64>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            j_max: 1,
            bound: 1000,
            nu_ceiling: DEFAULT_NU_CEILING,
            heights: vec![1e2, 1e3, 1e4, 1e5, 1e6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { format: Format::Csv, path: None }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Rejects bounds beyond the library ceilings and inconsistent sections.
    pub fn validate(&self) -> Result<(), String> {
        let a = &self.analysis;
        let ceiling = a.sieve_ceiling;
        let checks: [(bool, String); 10] = [
            (a.cutoff >= 3 && a.cutoff <= ceiling, format!("cutoff must lie in [3, {ceiling}]")),
            (a.scan_limit >= 1 && a.scan_limit <= NU_CEILING, format!("scan_limit must lie in [1, {NU_CEILING}]")),
            (a.eps > 0.0 && a.eps < 1.0, "eps must lie in (0, 1)".into()),
            (a.x_grid.iter().all(|&x| x >= 3 && x <= ceiling), format!("x_grid values must lie in [3, {ceiling}]")),
            (a.x_grid.windows(2).all(|w| w[0] < w[1]), "x_grid must be strictly increasing".into()),
            (a.prime_bound <= ceiling, format!("prime_bound exceeds {ceiling}")),
            (
                (SCAN_FLOOR..=SCAN_CEILING).contains(&a.n_max),
                format!("n_max must lie in [{SCAN_FLOOR}, {SCAN_CEILING}]"),
            ),
            (
                a.check_bound >= 1 && a.check_bound <= CHECK_BOUND_CEILING,
                format!("check_bound must lie in [1, {CHECK_BOUND_CEILING}]"),
            ),
            (a.nu_max >= 1 && a.nu_max <= NU_CEILING, format!("nu_max must lie in [1, {NU_CEILING}]")),
            (ceiling <= DEFAULT_SIEVE_CEILING, format!("sieve_ceiling exceeds {DEFAULT_SIEVE_CEILING}")),
        ];
        if let Some((_, msg)) = checks.into_iter().find(|(ok, _)| !ok) {
            return Err(msg);
        }
        if a.n_list.contains(&0) {
            return Err("n_list entries must be positive".into());
        }
        if self.counterexample.heights.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err("counterexample heights must be positive".into());
        }
        if !(a.witness_target >= 0.0 && a.witness_target.is_finite()) {
            return Err("witness_target must be finite and nonnegative".into());
        }
        Ok(())
    }

    pub fn sieve(&self) -> Sieve {
        Sieve::with_ceiling(self.analysis.sieve_ceiling)
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            scan_limit: self.analysis.scan_limit,
            require_certified: self.analysis.require_certified,
            sieve: self.sieve(),
            asserted: self.analysis.asserted,
        }
    }

    pub fn build_system(&self) -> Result<DivisorSystem, String> {
        let s = &self.system;
        match s.kind {
            SystemKind::Standard => Ok(DivisorSystem::standard()),
            SystemKind::Unitary => Ok(DivisorSystem::unitary()),
            SystemKind::Exponential => Ok(DivisorSystem::exponential()),
            SystemKind::Pathological => DivisorSystem::pathological(s.n_set.iter().copied()).map_err(|e| e.to_string()),
            SystemKind::Table => {
                let mut table = ExponentTable::new(s.base);
                for o in &s.exponent {
                    match o.prime {
                        Some(p) => table.set_for_prime(p, o.nu, o.exponents.iter().copied()),
                        None => table.set_for_exponent(o.nu, o.exponents.iter().copied()),
                    };
                }
                DivisorSystem::from_table("table", table).map_err(|e| e.to_string())
            }
        }
    }

    /// The function under study. `Phi` may fail for an unsolvable system,
    /// which is an audit failure rather than a configuration error.
    pub fn build_function(&self, system: &DivisorSystem) -> Result<MultFn, FunctionError> {
        match self.function.kind {
            FunctionKind::Sigma => Ok(MultFn::sigma_over_id(system)),
            FunctionKind::Phi => MultFn::id_over_phi(system).map_err(FunctionError::Library),
            FunctionKind::Table => {
                let mut per_prime = BTreeMap::new();
                let mut per_exponent = BTreeMap::new();
                for v in &self.function.value {
                    match v.prime {
                        Some(p) => per_prime.insert((p, v.nu), v.value),
                        None => per_exponent.insert(v.nu, v.value),
                    };
                }
                MultFn::from_tables("table", per_prime, per_exponent, self.function.default)
                    .map_err(|e| FunctionError::Config(e.to_string()))
            }
        }
    }

    pub fn build_filter(&self) -> Result<Option<PrimeSetFilter>, String> {
        let Some(f) = &self.filter else { return Ok(None) };
        let filter = match f.kind {
            FilterKind::Finite => {
                if !f.thin {
                    return Err("a finite prime set is thin".into());
                }
                PrimeSetFilter::finite(f.primes.iter().copied())
            }
            FilterKind::Residue => PrimeSetFilter::residue(f.modulus, f.residues.iter().copied(), f.thin),
        };
        filter.map(Some).map_err(|e| e.to_string())
    }
}

pub enum FunctionError {
    Config(String),
    Library(maxorder::Error),
}
