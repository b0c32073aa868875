use std::path::Path;

use brwldp_core::exact::{finite_n_rate, gw_pmf, gw_survival, RateMode, MAX_GRID_POINTS};
use brwldp_core::rates::rate_gw;
use brwldp_core::{Error, Model};
use rayon::prelude::*;

use crate::error::CliResult;
use crate::grid::normalize_ns;
use crate::output::{csv_writer, fmt_f64, fmt_opt};

pub const HEADER: [&str; 7] = [
    "x",
    "n",
    "threshold",
    "probability",
    "rate_estimate",
    "analytic",
    "abs_error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GwRow {
    pub x: f64,
    pub n: usize,
    pub threshold: u64,
    /// `P(Z_n <= threshold | Z_n > 0)`.
    pub probability: f64,
    pub rate_estimate: Option<f64>,
    pub analytic: f64,
    pub abs_error: Option<f64>,
}

/// `floor(e^{xn})`, the population threshold of the lower-deviation event.
pub fn threshold(x: f64, n: usize) -> f64 {
    ((x * n as f64).exp() * (1.0 + 1e-12)).floor()
}

pub fn gw_rows(
    model: &Model,
    xs: &[f64],
    ns: &[usize],
    kcap: Option<usize>,
    mode: RateMode,
) -> CliResult<Vec<GwRow>> {
    let offspring = &model.offspring;
    offspring.require_supercritical()?;
    let cap = kcap.unwrap_or(MAX_GRID_POINTS);
    let ns = normalize_ns(ns);
    let analytic: Vec<f64> = xs
        .iter()
        .map(|&x| rate_gw(offspring, x))
        .collect::<brwldp_core::Result<_>>()?;

    // One truncated pmf per generation, long enough for the largest x.
    let per_n: Vec<(usize, Vec<(u64, f64)>)> = ns
        .par_iter()
        .map(|&n| {
            let ks: Vec<f64> = xs.iter().map(|&x| threshold(x, n)).collect();
            let k_max = ks.iter().copied().fold(1.0, f64::max);
            if k_max > cap as f64 {
                return Err(Error::Budget(format!(
                    "generation {n} needs population threshold {k_max} above kcap {cap}"
                )));
            }
            let pmf = gw_pmf(offspring, n, k_max as usize)?;
            let survival = gw_survival(offspring, n);
            let probs = ks
                .iter()
                .map(|&k| (k as u64, pmf.alive_cumulative(k as usize) / survival))
                .collect();
            Ok((n, probs))
        })
        .collect::<brwldp_core::Result<_>>()?;

    let mut rows = Vec::with_capacity(xs.len() * ns.len());
    for (i, &x) in xs.iter().enumerate() {
        let mut history = Vec::new();
        for (n, probs) in &per_n {
            let (k, p) = probs[i];
            if *n > 0 {
                history.push((*n, p.ln()));
            }
            let rate_estimate = finite_n_rate(&history, mode).ok();
            rows.push(GwRow {
                x,
                n: *n,
                threshold: k,
                probability: p,
                rate_estimate,
                analytic: analytic[i],
                abs_error: rate_estimate.map(|r| crate::output::abs_error(r, analytic[i])),
            });
        }
    }
    rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.x.total_cmp(&b.x)));
    Ok(rows)
}

pub fn run(
    model: &Model,
    xs: &[f64],
    ns: &[usize],
    kcap: Option<usize>,
    mode: RateMode,
    out: Option<&Path>,
) -> CliResult<()> {
    let rows = gw_rows(model, xs, ns, kcap, mode)?;
    let mut w = csv_writer(out)?;
    w.write_record(HEADER)?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.x),
            r.n.to_string(),
            r.threshold.to_string(),
            fmt_f64(r.probability),
            fmt_opt(r.rate_estimate),
            fmt_f64(r.analytic),
            fmt_opt(r.abs_error),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
