use std::path::Path;

use brwldp_core::rates::{RateCurve, RateRow, SPEED_MATCH_TOLERANCE};
use brwldp_core::Model;
use rayon::prelude::*;

use crate::error::CliResult;
use crate::output::{csv_writer, fmt_f64, fmt_opt};

pub const HEADER: [&str; 5] = ["x", "I", "I_ind", "I_brw", "H_t_star"];

/// Rate-function table over `xs`; with `with_speed` the speed itself is
/// inserted so the curve passes through its zero.
pub fn rate_rows(model: &Model, xs: &[f64], with_speed: bool) -> CliResult<Vec<RateRow>> {
    model.offspring.require_supercritical()?;
    let curve = RateCurve::new(&model.step, &model.offspring)?;
    let mut xs = xs.to_vec();
    if with_speed {
        let x_star = curve.speed();
        if !xs.iter().any(|x| (x - x_star).abs() <= SPEED_MATCH_TOLERANCE) {
            xs.push(x_star);
        }
        xs.sort_by(f64::total_cmp);
    }
    let rows = xs
        .par_iter()
        .map(|&x| curve.row(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rows)
}

pub fn run(model: &Model, xs: &[f64], with_speed: bool, out: Option<&Path>) -> CliResult<()> {
    let rows = rate_rows(model, xs, with_speed)?;
    let mut w = csv_writer(out)?;
    w.write_record(HEADER)?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.x),
            fmt_f64(r.rw),
            fmt_f64(r.ind),
            fmt_f64(r.brw),
            fmt_opt(r.t_star),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
