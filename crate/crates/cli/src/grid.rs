//! `LO:HI:STEP` grids and `N1,N2,...` lists.

use std::str::FromStr;

/// Closed arithmetic grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

const MAX_GRID_LEN: usize = 1_000_000;

impl Grid {
    /// Grid points rounded to 12 decimals, so `-1:1:0.01` yields `-0.99`
    /// rather than `-0.9900000000000001`.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| round12(self.lo + i as f64 * self.step))
            .collect()
    }
}

fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err(format!("expected LO:HI:STEP, got `{s}`"));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if hi < lo {
            return Err(format!("grid is empty: {hi} < {lo}"));
        }
        if step <= 0.0 {
            return Err(format!("grid step must be positive, got {step}"));
        }
        if (hi - lo) / step > MAX_GRID_LEN as f64 {
            return Err(format!("grid has more than {MAX_GRID_LEN} points"));
        }
        Ok(Grid { lo, hi, step })
    }
}

/// Sorted, deduplicated generation list.
pub fn normalize_ns(ns: &[usize]) -> Vec<usize> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    ns
}
