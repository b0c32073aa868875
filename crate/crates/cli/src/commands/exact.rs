use std::path::Path;

use brwldp_core::exact::{
    check_grid, finite_n_rate, ind_max_cdf, BrwMaxCdfs, Direction, RateMode,
};
use brwldp_core::rates::{RateCurve, SPEED_MATCH_TOLERANCE};
use brwldp_core::{LatticeCdf, LatticeStep, Model, OffspringLaw};
use rayon::prelude::*;

use crate::error::CliResult;
use crate::grid::normalize_ns;
use crate::output::{csv_writer, fmt_f64, fmt_opt};

pub const HEADER: [&str; 10] = [
    "quantity",
    "x",
    "n",
    "direction",
    "threshold",
    "probability",
    "conditioned",
    "rate_estimate",
    "analytic",
    "abs_error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Maximum {
    Brw,
    Ind,
}

impl Maximum {
    pub fn key(self) -> &'static str {
        match self {
            Maximum::Brw => "brw_max",
            Maximum::Ind => "ind_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRow {
    pub quantity: Maximum,
    pub x: f64,
    pub n: usize,
    pub direction: Direction,
    pub threshold: i64,
    pub probability: f64,
    pub conditioned: bool,
    pub rate_estimate: Option<f64>,
    pub analytic: f64,
    pub abs_error: Option<f64>,
}

/// Upper tail `{M_n >= xn}` at or above the speed, lower tail `{M_n <= xn}`
/// below it, with the lattice threshold rounded inwards.
pub fn event_for(x: f64, n: usize, x_star: f64) -> (Direction, i64) {
    let target = x * n as f64;
    if x >= x_star - SPEED_MATCH_TOLERANCE {
        (Direction::AtLeast, (target - 1e-9).ceil() as i64)
    } else {
        (Direction::AtMost, (target + 1e-9).floor() as i64)
    }
}

/// Exact laws of `M_n` and `M~_n` at each requested generation.
pub fn max_laws(
    step: &LatticeStep,
    offspring: &OffspringLaw,
    ns: &[usize],
) -> brwldp_core::Result<Vec<(LatticeCdf, LatticeCdf)>> {
    let (brw, ind) = rayon::join(
        || -> brwldp_core::Result<Vec<LatticeCdf>> {
            let mut iter = BrwMaxCdfs::new(step, offspring);
            let mut out = Vec::with_capacity(ns.len());
            for &n in ns {
                while iter.current().n < n {
                    iter.advance()?;
                }
                out.push(iter.current().clone());
            }
            Ok(out)
        },
        || {
            ns.par_iter()
                .map(|&n| ind_max_cdf(step, offspring, n))
                .collect::<brwldp_core::Result<Vec<_>>>()
        },
    );
    Ok(brw?.into_iter().zip(ind?).collect())
}

pub fn exact_rows(
    model: &Model,
    xs: &[f64],
    ns: &[usize],
    conditioned: bool,
    mode: RateMode,
) -> CliResult<Vec<ExactRow>> {
    let step = model.step.as_lattice()?;
    let offspring = &model.offspring;
    offspring.require_supercritical()?;
    let curve = RateCurve::new(&model.step, offspring)?;
    let x_star = curve.speed();
    if xs.iter().any(|&x| x < x_star - SPEED_MATCH_TOLERANCE) {
        offspring.require_schroeder()?;
    }
    let ns = normalize_ns(ns);
    for &n in &ns {
        check_grid(n, step)?;
    }
    let laws = max_laws(step, offspring, &ns)?;

    let mut rows = Vec::with_capacity(2 * xs.len() * ns.len());
    for &x in xs {
        for quantity in [Maximum::Brw, Maximum::Ind] {
            let analytic = analytic_rate(&curve, offspring, quantity, x, conditioned)?;
            let mut history: Vec<(usize, f64)> = Vec::new();
            for (n, (brw, ind)) in ns.iter().zip(&laws) {
                let law = match quantity {
                    Maximum::Brw => brw,
                    Maximum::Ind => ind,
                };
                let (direction, threshold) = event_for(x, *n, x_star);
                let probability = if conditioned {
                    law.conditional_prob(direction, threshold)?
                } else {
                    law.unconditional_prob(direction, threshold)
                };
                if *n > 0 {
                    history.push((*n, probability.ln()));
                }
                let rate_estimate = finite_n_rate(&history, mode).ok();
                rows.push(ExactRow {
                    quantity,
                    x,
                    n: *n,
                    direction,
                    threshold,
                    probability,
                    conditioned,
                    rate_estimate,
                    analytic,
                    abs_error: rate_estimate.map(|r| crate::output::abs_error(r, analytic)),
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.x.total_cmp(&b.x))
            .then(a.quantity.cmp(&b.quantity))
    });
    Ok(rows)
}

/// Decay rate the oracle probabilities should approach. Without
/// conditioning, lower-tail events contain extinction and do not decay when
/// `q > 0`.
fn analytic_rate(
    curve: &RateCurve,
    offspring: &OffspringLaw,
    quantity: Maximum,
    x: f64,
    conditioned: bool,
) -> brwldp_core::Result<f64> {
    let lower = x < curve.speed() - SPEED_MATCH_TOLERANCE;
    if lower && !conditioned && offspring.extinction() > 0.0 {
        return Ok(0.0);
    }
    match quantity {
        Maximum::Brw => curve.brw(x),
        Maximum::Ind => curve.ind(x),
    }
}

pub fn run(
    model: &Model,
    xs: &[f64],
    ns: &[usize],
    conditioned: bool,
    mode: RateMode,
    out: Option<&Path>,
) -> CliResult<()> {
    let rows = exact_rows(model, xs, ns, conditioned, mode)?;
    let mut w = csv_writer(out)?;
    w.write_record(HEADER)?;
    for r in &rows {
        w.write_record([
            r.quantity.key().to_string(),
            fmt_f64(r.x),
            r.n.to_string(),
            r.direction.to_string(),
            r.threshold.to_string(),
            fmt_f64(r.probability),
            r.conditioned.to_string(),
            fmt_opt(r.rate_estimate),
            fmt_f64(r.analytic),
            fmt_opt(r.abs_error),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
