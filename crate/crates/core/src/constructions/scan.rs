use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::MultFn;
use crate::primes::SpfTable;
use crate::{Error, Result};

/// First `n` scanned; `log log 16 > 1`.
pub const SCAN_FLOOR: u64 = 16;
pub const SCAN_CEILING: u64 = 10_000_000;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub n: u64,
    pub f: f64,
    pub ratio: f64,
}

/// Record values of `f(n)` for `16 <= n <= n_max`, each with its ratio
/// `f(n) / log log n`. A record is an `n` whose `f(n)` strictly exceeds
/// every earlier value in the range.
pub fn empirical_scan(f: &MultFn, n_max: u64) -> Result<Vec<ScanRecord>> {
    if !(SCAN_FLOOR..=SCAN_CEILING).contains(&n_max) {
        return Err(Error::Precondition(format!("n_max must lie in [{SCAN_FLOOR}, {SCAN_CEILING}], got {n_max}")));
    }
    let spf = SpfTable::new(n_max as u32);
    let values: Vec<f64> = (SCAN_FLOOR..=n_max)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| chunk.iter().map(|&n| f.eval(&spf.factorize(n as u32))).collect::<Vec<_>>())
        .collect();
    let mut records = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            let n = SCAN_FLOOR + i as u64;
            records.push(ScanRecord { n, f: v, ratio: v / (n as f64).ln().ln() });
        }
    }
    Ok(records)
}
