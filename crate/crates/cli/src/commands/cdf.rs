use std::path::Path;

use brwldp_core::exact::{brw_max_cdf, check_grid, ind_max_cdf};
use brwldp_core::{LatticeCdf, Model};
use rayon::prelude::*;

use crate::error::CliResult;
use crate::grid::normalize_ns;
use crate::output::{csv_writer, fmt_f64};

pub const HEADER: [&str; 5] = ["n", "y", "cdf_brw", "cdf_ind", "base"];

/// Unconditional CDFs `P(M_n <= y)` and `P(M~_n <= y)` on the full grid.
pub fn run(model: &Model, ns: &[usize], out: Option<&Path>) -> CliResult<()> {
    let step = model.step.as_lattice()?;
    let ns = normalize_ns(ns);
    for &n in &ns {
        check_grid(n, step)?;
    }
    let pairs: Vec<(LatticeCdf, LatticeCdf)> = ns
        .par_iter()
        .map(|&n| {
            Ok((
                brw_max_cdf(step, &model.offspring, n)?,
                ind_max_cdf(step, &model.offspring, n)?,
            ))
        })
        .collect::<brwldp_core::Result<_>>()?;
    let mut w = csv_writer(out)?;
    w.write_record(HEADER)?;
    for (brw, ind) in &pairs {
        for y in brw.lo..=brw.hi {
            w.write_record([
                brw.n.to_string(),
                y.to_string(),
                fmt_f64(brw.cdf(y)),
                fmt_f64(ind.cdf(y)),
                fmt_f64(brw.base),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
