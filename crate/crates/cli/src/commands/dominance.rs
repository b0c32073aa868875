use std::io::Write;
use std::path::Path;

use brwldp_core::exact::{
    check_dominance, DominanceReport, GapProfile, Violation, DOMINANCE_TOLERANCE,
};
use brwldp_core::Model;

use crate::error::{CliError, CliResult};
use crate::output::fmt_f64;

/// Checks `M_n ⪯ M~_n` from the exact oracles.
pub fn from_model(model: &Model, n_max: usize) -> CliResult<DominanceReport> {
    let step = model.step.as_lattice()?;
    Ok(check_dominance(step, &model.offspring, n_max)?)
}

/// Checks the same property on a `cdf` table (columns `n, y, cdf_brw,
/// cdf_ind, base`), e.g. one produced earlier or edited by hand.
pub fn from_csv(path: &Path, n_max: usize) -> CliResult<DominanceReport> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("{}: missing column `{name}`", path.display())))
    };
    let (cn, cy, cb, ci) = (col("n")?, col("y")?, col("cdf_brw")?, col("cdf_ind")?);
    let mut report = DominanceReport::empty(n_max, DOMINANCE_TOLERANCE);
    let mut current: Option<GapProfile> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> CliResult<&str> {
            rec.get(i)
                .ok_or_else(|| CliError::config(format!("{}: short row {}", path.display(), line + 2)))
        };
        let bad = |what: &str| {
            CliError::config(format!("{}: row {}: bad {what}", path.display(), line + 2))
        };
        let n: usize = field(cn)?.parse().map_err(|_| bad("n"))?;
        if n > n_max {
            continue;
        }
        let y: i64 = field(cy)?.parse().map_err(|_| bad("y"))?;
        let brw: f64 = field(cb)?.parse().map_err(|_| bad("cdf_brw"))?;
        let ind: f64 = field(ci)?.parse().map_err(|_| bad("cdf_ind"))?;
        let gap = brw - ind;
        if -gap > report.tolerance {
            report.violations.push(Violation { n, y, excess: -gap });
        }
        match current {
            Some(ref mut g) if g.n == n => {
                if gap > g.gap {
                    *g = GapProfile { n, y, gap };
                }
            }
            _ => {
                if let Some(g) = current.take() {
                    report.profile.push(g);
                }
                current = Some(GapProfile { n, y, gap });
            }
        }
    }
    report.profile.extend(current);
    if report.profile.is_empty() {
        return Err(CliError::config(format!(
            "{}: no rows with n <= {n_max}",
            path.display()
        )));
    }
    Ok(report)
}

pub fn write_report(report: &DominanceReport, out: &mut dyn Write) -> std::io::Result<()> {
    let checked = report.profile.len();
    writeln!(
        out,
        "dominance M_n <= M~_n for n <= {} ({checked} generations, tolerance {:e})",
        report.n_max, report.tolerance
    )?;
    if let Some(g) = report.largest_gap() {
        writeln!(
            out,
            "largest gap P(M_n <= y) - P(M~_n <= y) = {} at n = {}, y = {}",
            fmt_f64(g.gap),
            g.n,
            g.y
        )?;
    }
    if report.passed() {
        writeln!(out, "result: PASS (0 violations)")?;
    } else {
        let worst = report.max_violation().expect("nonempty");
        writeln!(
            out,
            "result: FAIL ({} violations, worst excess {} at n = {}, y = {})",
            report.violations.len(),
            fmt_f64(worst.excess),
            worst.n,
            worst.y
        )?;
    }
    Ok(())
}

pub fn run(model: &Model, n_max: usize) -> CliResult<()> {
    report_and_check(&from_model(model, n_max)?)
}

pub fn run_csv(path: &Path, n_max: usize) -> CliResult<()> {
    report_and_check(&from_csv(path, n_max)?)
}

/// Prints the report; a violation becomes exit code 1.
fn report_and_check(report: &DominanceReport) -> CliResult<()> {
    let stdout = std::io::stdout();
    write_report(report, &mut stdout.lock()).map_err(|e| CliError::io("<stdout>", e))?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "{} dominance violations",
            report.violations.len()
        )))
    }
}
