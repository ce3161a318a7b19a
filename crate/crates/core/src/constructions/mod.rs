//! Explicit numbers that realize (or refute) extremal behaviour.
//!
//! * champions `n(x) = prod_{p <= x} p^{e_p}` approaching `e^gamma R`,
//! * brute-force record scans over `16 <= n <= n_max`,
//! * the counterexample function for a fat prime set,
//! * unboundedness witnesses `n_1 n_2` for a thin prime set.
//!
//! Champions are never materialized as integers; they are carried as
//! `log n` and `log f(n)`.

mod champion;
mod counterexample;
mod scan;
mod witness;

pub use champion::{
    build_champion, build_phi_champion, champion_at, champion_series, choose_big_p, default_schedule,
    phi_champion_series, ChampionPoint, ExponentSchedule, Margins, SeriesRow, DEFAULT_EPS,
};
pub use counterexample::{
    build_counterexample, counterexample_probes, counterexample_scan, g_log, CounterexampleFn, CounterexampleOptions,
    CounterexampleReport, Probe, ProbeRow, ScheduledPower, DEFAULT_NU_CEILING,
};
pub use scan::{empirical_scan, ScanRecord, SCAN_CEILING, SCAN_FLOOR};
pub use witness::{unbounded_witness, WitnessOptions, WitnessReport};
