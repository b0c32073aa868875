//! Analytic rate functions: the walk rate `I`, the speed `x*`, the
//! Galton–Watson rate, and the rates of the maximum of independent walks and
//! of the branching random walk.

use crate::error::{Error, Result};
use crate::model::{OffspringLaw, StepLaw};
use crate::numeric::{bisect_boundary, golden_section};

const NEWTON_MAX_ITERATIONS: usize = 200;
const SPEED_TOLERANCE: f64 = 1e-12;

/// Points closer than this to `x*` are treated as `x*` itself.
pub const SPEED_MATCH_TOLERANCE: f64 = 1e-10;

/// Default number of grid points for the time-fraction search in [`solve_h`].
pub const DEFAULT_H_GRID: usize = 2048;

/// Value of the walk rate function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub x: f64,
    /// Rate in nats per unit time; `+inf` off the support hull.
    pub value: f64,
    /// Tilt attaining the supremum, when it exists.
    pub argmax_lambda: Option<f64>,
}

/// Cramér rate function `I(x) = sup_l { l x - log E[e^{l X_1}] }`.
pub fn rate_rw(step: &StepLaw, x: f64) -> Result<RatePoint> {
    if !x.is_finite() {
        return Err(Error::domain(format!("rate argument {x} is not finite")));
    }
    match step {
        StepLaw::Gaussian(g) => {
            let var = g.sigma() * g.sigma();
            let d = x - g.mean();
            Ok(RatePoint {
                x,
                value: d * d / (2.0 * var),
                argmax_lambda: Some(d / var),
            })
        }
        StepLaw::Lattice(l) => {
            let (lo, hi) = (l.min_offset() as f64, l.max_offset() as f64);
            let infinite = RatePoint {
                x,
                value: f64::INFINITY,
                argmax_lambda: None,
            };
            if x > hi || x < lo {
                return Ok(infinite);
            }
            if x == hi || x == lo {
                // At an edge of the support the supremum is approached as the
                // tilt diverges and equals -log P(X_1 = x).
                let p = l.prob_of(x as i64);
                let argmax_lambda = if lo == hi { Some(0.0) } else { None };
                return Ok(RatePoint {
                    x,
                    value: -p.ln(),
                    argmax_lambda,
                });
            }
            let lambda = solve_tilt(step, x)?;
            let cgf = step.cgf(lambda)?;
            Ok(RatePoint {
                x,
                value: (lambda * x - cgf.value).max(0.0),
                argmax_lambda: Some(lambda),
            })
        }
    }
}

/// Solves `cgf'(lambda) = x` by Newton steps safeguarded with bisection.
///
/// `x` must lie strictly inside the support hull.
pub fn solve_tilt(step: &StepLaw, x: f64) -> Result<f64> {
    let mean = step.mean();
    if x == mean {
        return Ok(0.0);
    }
    // Bracket the root; the tilted mean is increasing in lambda.
    let (mut lo, mut hi) = if x > mean { (0.0, 1.0) } else { (-1.0, 0.0) };
    loop {
        if x > mean {
            if step.cgf(hi)?.slope > x {
                break;
            }
            lo = hi;
            hi *= 2.0;
        } else {
            if step.cgf(lo)?.slope < x {
                break;
            }
            hi = lo;
            lo *= 2.0;
        }
        if hi.abs() > 1e300 || lo.abs() > 1e300 {
            return Err(Error::Numerical(format!("no finite tilt reaches mean {x}")));
        }
    }
    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let c = step.cgf(lambda)?;
        let residual = c.slope - x;
        if residual == 0.0 {
            return Ok(lambda);
        }
        if residual > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        let newton = lambda - residual / c.curvature;
        let next = if c.curvature > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - lambda).abs() <= 1e-15 * lambda.abs().max(1.0) || hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numerical(format!(
        "tilt equation did not converge for x = {x}"
    )))
}

/// Linear speed `x* = sup{x >= 0 : I(x) <= log m}` of the maximum.
pub fn speed(step: &StepLaw, offspring: &OffspringLaw) -> Result<f64> {
    offspring.require_supercritical()?;
    let log_m = offspring.log_mean();
    let mean = step.mean();
    let below = |x: f64| rate_rw(step, x).map(|r| r.value <= log_m).unwrap_or(false);
    let top = match step.support_max() {
        Some(max) => {
            if below(max) {
                return Ok(max);
            }
            max
        }
        None => {
            let mut hi = mean + 1.0;
            while below(hi) {
                hi = mean + 2.0 * (hi - mean);
            }
            hi
        }
    };
    Ok(bisect_boundary(mean, top, SPEED_TOLERANCE, below))
}

/// Galton–Watson lower-deviation rate `rho (1 - x / log m)` on `[0, log m]`.
pub fn rate_gw(offspring: &OffspringLaw, x: f64) -> Result<f64> {
    offspring.require_supercritical()?;
    let log_m = offspring.log_mean();
    if !(0.0..=log_m).contains(&x) {
        return Err(Error::domain(format!(
            "Galton–Watson rate needs x in [0, log m] = [0, {log_m}], got {x}"
        )));
    }
    Ok(scale_rate(offspring.rho(), 1.0 - x / log_m))
}

/// `rate * factor` with `inf * 0 = 0`.
fn scale_rate(rate: f64, factor: f64) -> f64 {
    if factor <= 0.0 {
        0.0
    } else {
        rate * factor
    }
}

/// Rate function of the maximum of `Z_n` independent walks.
pub fn rate_ind(step: &StepLaw, offspring: &OffspringLaw, x: f64) -> Result<f64> {
    let x_star = speed(step, offspring)?;
    rate_ind_with_speed(step, offspring, x, x_star)
}

pub(crate) fn rate_ind_with_speed(
    step: &StepLaw,
    offspring: &OffspringLaw,
    x: f64,
    x_star: f64,
) -> Result<f64> {
    let log_m = offspring.log_mean();
    let rho = offspring.rho();
    if (x - x_star).abs() <= SPEED_MATCH_TOLERANCE {
        return Ok(0.0);
    }
    let i = rate_rw(step, x)?.value;
    if x > x_star {
        Ok(i - log_m)
    } else if x >= 0.0 {
        Ok(scale_rate(rho, 1.0 - i / log_m))
    } else {
        Ok(offspring.k_star() as f64 * i + rho)
    }
}

/// Minimizer and value of the lower-deviation variational problem for the
/// branching random walk maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalSolution {
    pub x: f64,
    /// Time fraction spent with a minimal population; `None` when the
    /// objective is infinite everywhere.
    pub t_star: Option<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Options for [`solve_h_with`].
#[derive(Debug, Clone, Copy)]
pub struct HSolverOptions {
    pub grid_points: usize,
    pub golden_tolerance: f64,
}

impl Default for HSolverOptions {
    fn default() -> Self {
        HSolverOptions {
            grid_points: DEFAULT_H_GRID,
            golden_tolerance: 1e-12,
        }
    }
}

/// Objective `g(t) = t rho + t I((x - (1 - t) x*) / t)` of the variational
/// problem, `+inf` wherever `I` is.
pub fn h_objective(step: &StepLaw, rho: f64, x_star: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::INFINITY;
    }
    let arg = (x - (1.0 - t) * x_star) / t;
    match rate_rw(step, arg) {
        Ok(r) if r.value.is_finite() => t * rho + t * r.value,
        _ => f64::INFINITY,
    }
}

/// `H(x)` for `x < x*` with default options.
pub fn solve_h(step: &StepLaw, offspring: &OffspringLaw, x: f64) -> Result<VariationalSolution> {
    let x_star = speed(step, offspring)?;
    solve_h_with(step, offspring, x, x_star, HSolverOptions::default())
}

/// Dense grid search over the time fraction followed by golden-section
/// refinement of the best bracket.
///
/// The objective is convex in `t` (a perspective of `I` composed with an
/// affine map), so the bracket around the best grid point contains the
/// minimizer. The upper endpoint and the support-edge feasibility boundary are
/// evaluated exactly; the `t -> 0` limit is `+inf` for every supported step
/// family because `x < x*`.
pub fn solve_h_with(
    step: &StepLaw,
    offspring: &OffspringLaw,
    x: f64,
    x_star: f64,
    opts: HSolverOptions,
) -> Result<VariationalSolution> {
    if x.is_nan() || x >= x_star {
        return Err(Error::domain(format!(
            "H is defined below the speed x* = {x_star}, got x = {x}"
        )));
    }
    let rho = offspring.rho();
    let unset = VariationalSolution {
        x,
        t_star: None,
        value: f64::INFINITY,
        evaluations: 0,
    };
    if rho.is_infinite() {
        return Ok(unset);
    }
    let t_hi = if x > 0.0 { 1.0 - x / x_star } else { 1.0 };
    let g = |t: f64| h_objective(step, rho, x_star, x, t);
    let n = opts.grid_points.max(2);

    let mut evaluations = 0;
    let mut best: Option<(f64, f64)> = None;

    let grid: Vec<f64> = (1..=n).map(|k| t_hi * k as f64 / n as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| g(t)).collect();
    evaluations += n;
    let best_idx = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    if let Some(i) = best_idx {
        consider(grid[i], values[i], &mut best);
    }

    // exact endpoint and feasibility boundary
    let mut candidates = vec![t_hi];
    if let Some(min) = step.support_min() {
        if min < x_star {
            let t_edge = (x_star - x) / (x_star - min);
            if t_edge > 0.0 && t_edge <= t_hi {
                candidates.push(t_edge);
            }
        }
    }
    for t in candidates {
        let v = g(t);
        evaluations += 1;
        consider(t, v, &mut best);
    }

    if let Some(i) = best_idx {
        let a = if i == 0 { 0.0 } else { grid[i - 1] };
        let b = grid.get(i + 1).copied().unwrap_or(t_hi);
        let refined = golden_section(a, b, opts.golden_tolerance, g);
        evaluations += refined.evaluations;
        consider(refined.arg, refined.value, &mut best);
    }

    Ok(match best {
        Some((t, v)) => VariationalSolution {
            x,
            t_star: Some(t),
            value: v,
            evaluations,
        },
        None => VariationalSolution { evaluations, ..unset },
    })
}

/// Keeps the smaller objective value; within `1e-12` keeps the smaller `t`.
fn consider(t: f64, v: f64, best: &mut Option<(f64, f64)>) {
    if !v.is_finite() {
        return;
    }
    match *best {
        Some((bt, bv)) if v > bv + 1e-12 || (v >= bv - 1e-12 && t >= bt) => {}
        _ => *best = Some((t, v)),
    }
}

/// Rate function of the branching random walk maximum.
pub fn rate_brw(step: &StepLaw, offspring: &OffspringLaw, x: f64) -> Result<f64> {
    let x_star = speed(step, offspring)?;
    rate_brw_with_speed(step, offspring, x, x_star)
}

pub(crate) fn rate_brw_with_speed(
    step: &StepLaw,
    offspring: &OffspringLaw,
    x: f64,
    x_star: f64,
) -> Result<f64> {
    if (x - x_star).abs() <= SPEED_MATCH_TOLERANCE {
        Ok(0.0)
    } else if x > x_star {
        Ok(rate_rw(step, x)?.value - offspring.log_mean())
    } else {
        Ok(solve_h_with(step, offspring, x, x_star, HSolverOptions::default())?.value)
    }
}

/// All rate functions of one model at a point, sharing one speed computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub x: f64,
    pub rw: f64,
    pub ind: f64,
    pub brw: f64,
    /// Optimal time fraction when `x < x*` and the problem is finite.
    pub t_star: Option<f64>,
}

/// Precomputed speed for repeated evaluation over a grid.
#[derive(Debug, Clone)]
pub struct RateCurve<'a> {
    step: &'a StepLaw,
    offspring: &'a OffspringLaw,
    x_star: f64,
}

impl<'a> RateCurve<'a> {
    pub fn new(step: &'a StepLaw, offspring: &'a OffspringLaw) -> Result<Self> {
        let x_star = speed(step, offspring)?;
        Ok(RateCurve {
            step,
            offspring,
            x_star,
        })
    }

    pub fn speed(&self) -> f64 {
        self.x_star
    }

    pub fn rw(&self, x: f64) -> Result<f64> {
        Ok(rate_rw(self.step, x)?.value)
    }

    pub fn ind(&self, x: f64) -> Result<f64> {
        rate_ind_with_speed(self.step, self.offspring, x, self.x_star)
    }

    pub fn brw(&self, x: f64) -> Result<f64> {
        rate_brw_with_speed(self.step, self.offspring, x, self.x_star)
    }

    pub fn h(&self, x: f64) -> Result<VariationalSolution> {
        solve_h_with(self.step, self.offspring, x, self.x_star, HSolverOptions::default())
    }

    pub fn row(&self, x: f64) -> Result<RateRow> {
        let (brw, t_star) = if x < self.x_star - SPEED_MATCH_TOLERANCE {
            let h = self.h(x)?;
            (h.value, h.t_star)
        } else {
            (self.brw(x)?, None)
        };
        Ok(RateRow {
            x,
            rw: self.rw(x)?,
            ind: self.ind(x)?,
            brw,
            t_star,
        })
    }
}
