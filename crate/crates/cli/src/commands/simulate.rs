use std::path::Path;

use brwldp_core::exact::{
    brw_max_cdf, gaussian_walk_tail, gw_pmf, gw_survival, ind_max_cdf, rw_cdf, Direction,
};
use brwldp_core::mc::{
    critical_survival_mc, estimate_event, kesten_stigum, simulate, speed_mean, tilted_tail_rw,
    Event, Quantity, SimOptions,
};
use brwldp_core::rates::speed;
use brwldp_core::{EstimateCI, Error, Model, StepLaw};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{csv_writer, fmt_opt, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Mean of the martingale `W_n = Z_n / m^n`.
    KestenStigum,
    /// Mean of `M_n / n` over surviving runs.
    Speed,
    /// Probability of a threshold event for a maximum or the population.
    Event,
    /// Importance-sampled walk tail `P(S_n >= xn)`.
    TiltedTail,
    /// `n P(Z_n > 0)` for a critical law.
    CriticalSurvival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub mode: Mode,
    pub n: usize,
    pub replicates: u64,
    pub seed: u64,
    pub opts: SimOptions,
    pub conditioned: bool,
    pub x: Option<f64>,
    pub quantity: Quantity,
    pub direction: Direction,
    pub threshold: Option<f64>,
}

/// Exact or closed-form value the estimate is compared with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub name: &'static str,
    pub value: f64,
    pub abs_error: f64,
    /// Distance in standard errors.
    pub z_score: f64,
    pub within_ci: bool,
}

impl Reference {
    fn new(name: &'static str, value: f64, est: &EstimateCI) -> Self {
        let abs_error = (est.point - value).abs();
        Reference {
            name,
            value,
            abs_error,
            z_score: if est.stderr > 0.0 { abs_error / est.stderr } else { f64::INFINITY },
            within_ci: est.contains(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub n: usize,
    pub budget: u64,
    #[serde(flatten)]
    pub estimate: EstimateCI,
    /// Finite-n stand-in for conditioning on survival forever.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    pub references: Vec<Reference>,
}

fn need<T>(v: Option<T>, flag: &str, mode: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(format!("--{flag} is required in {mode} mode")))
}

pub fn summarize(model: &Model, cfg: &SimulateConfig) -> CliResult<Summary> {
    let (n, r, seed, opts) = (cfg.n, cfg.replicates, cfg.seed, cfg.opts);
    let mut event_text = None;
    let (estimate, references) = match cfg.mode {
        Mode::KestenStigum => {
            let est = kesten_stigum(&model.offspring, n, r, seed, opts)?;
            let refs = vec![Reference::new("mean_w", 1.0, &est)];
            (est, refs)
        }
        Mode::Speed => {
            model.offspring.require_supercritical()?;
            let est = speed_mean(model, n, r, seed, opts)?;
            let mut refs = vec![Reference::new("speed", speed(&model.step, &model.offspring)?, &est)];
            if let StepLaw::Lattice(step) = &model.step {
                if let Ok(law) = brw_max_cdf(step, &model.offspring, n) {
                    let mean = law.conditional_mean()? / n as f64;
                    refs.push(Reference::new("exact_conditional_mean", mean, &est));
                }
            }
            (est, refs)
        }
        Mode::Event => {
            let threshold = need(cfg.threshold, "threshold", "event")?;
            let event = Event {
                quantity: cfg.quantity,
                direction: cfg.direction,
                threshold,
                conditioned: cfg.conditioned,
            };
            event_text = Some(format!(
                "{} {} {}",
                quantity_key(cfg.quantity),
                cfg.direction,
                threshold
            ));
            let est = estimate_event(model, event, n, r, seed, opts)?;
            let refs = exact_event(model, &event, n)?
                .map(|p| vec![Reference::new("exact_probability", p, &est)])
                .unwrap_or_default();
            (est, refs)
        }
        Mode::TiltedTail => {
            let x = need(cfg.x, "x", "tilted-tail")?;
            let est = tilted_tail_rw(&model.step, x, n, r, seed, opts)?;
            let exact = match &model.step {
                StepLaw::Lattice(step) => {
                    let y = (x * n as f64 - 1e-9).ceil() as i64;
                    rw_cdf(step, n)?.upper_at(y - 1)
                }
                StepLaw::Gaussian(g) => gaussian_walk_tail(g, x, n),
            };
            let refs = vec![Reference::new("exact_tail", exact, &est)];
            (est, refs)
        }
        Mode::CriticalSurvival => {
            let est = critical_survival_mc(&model.offspring, n, r, seed, opts)?;
            let exact = n as f64 * gw_survival(&model.offspring, n);
            let refs = vec![Reference::new("exact_scaled_survival", exact, &est)];
            (est, refs)
        }
    };
    Ok(Summary {
        mode: cfg.mode,
        n,
        budget: opts.budget,
        conditioning: estimate.conditioned.then_some("Z_n > 0"),
        estimate,
        event: event_text,
        references,
    })
}

fn quantity_key(q: Quantity) -> &'static str {
    match q {
        Quantity::BrwMax => "brw_max",
        Quantity::IndMax => "ind_max",
        Quantity::GwCount => "gw_count",
    }
}

/// Oracle probability of `event` for lattice models; `None` when no oracle
/// applies.
fn exact_event(model: &Model, event: &Event, n: usize) -> CliResult<Option<f64>> {
    let y = match event.direction {
        Direction::AtMost => event.threshold.floor(),
        Direction::AtLeast => event.threshold.ceil(),
    };
    let prob = |law: brwldp_core::LatticeCdf| -> brwldp_core::Result<f64> {
        let y = y as i64;
        if event.conditioned {
            law.conditional_prob(event.direction, y)
        } else {
            Ok(law.unconditional_prob(event.direction, y))
        }
    };
    let value = match (event.quantity, &model.step) {
        (Quantity::BrwMax, StepLaw::Lattice(step)) => prob(brw_max_cdf(step, &model.offspring, n)?)?,
        (Quantity::IndMax, StepLaw::Lattice(step)) => prob(ind_max_cdf(step, &model.offspring, n)?)?,
        (Quantity::GwCount, _) => {
            if y < 0.0 {
                return Ok(Some(if event.direction == Direction::AtMost { 0.0 } else { 1.0 }));
            }
            let pmf = gw_pmf(&model.offspring, n, y as usize)?;
            let below = match event.direction {
                Direction::AtMost => y as usize,
                Direction::AtLeast => (y as usize).saturating_sub(1),
            };
            let survival = gw_survival(&model.offspring, n);
            let at_most = if event.conditioned {
                pmf.alive_cumulative(below) / survival
            } else {
                pmf.cumulative(below)
            };
            match event.direction {
                Direction::AtMost => at_most,
                Direction::AtLeast if y == 0.0 => 1.0,
                Direction::AtLeast => 1.0 - at_most,
            }
        }
        _ => return Ok(None),
    };
    Ok(Some(value))
}

/// Per-replicate snapshots of the process a mode simulates.
pub fn write_snapshots(model: &Model, cfg: &SimulateConfig, path: &Path) -> CliResult<()> {
    let quantity = match cfg.mode {
        Mode::KestenStigum | Mode::CriticalSurvival => Quantity::GwCount,
        Mode::Speed => Quantity::BrwMax,
        Mode::Event => cfg.quantity,
        Mode::TiltedTail => {
            return Err(CliError::config(
                "--snapshots is not available in tilted-tail mode (no population is simulated)",
            ))
        }
    };
    let runs = simulate(model, quantity, cfg.n, cfg.replicates, cfg.seed, cfg.opts)?;
    let mut w = csv_writer(Some(path))?;
    w.write_record(["replicate", "n", "population", "max_position", "martingale_w", "censored"])?;
    for (i, run) in runs.iter().enumerate() {
        match run {
            Ok(s) => w.write_record([
                i.to_string(),
                s.n.to_string(),
                s.population.to_string(),
                fmt_opt(s.max_position),
                crate::output::fmt_f64(s.martingale_w),
                "false".into(),
            ])?,
            Err(_) => w.write_record([
                i.to_string(),
                cfg.n.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "true".into(),
            ])?,
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn run(
    model: &Model,
    cfg: &SimulateConfig,
    out: Option<&Path>,
    snapshots: Option<&Path>,
) -> CliResult<Summary> {
    let summary = summarize(model, cfg).map_err(|e| match e {
        CliError::Core(Error::NoReplicates(msg)) => CliError::Core(Error::NoReplicates(format!(
            "{msg}; raise --budget or lower --n"
        ))),
        other => other,
    })?;
    write_json(out, &summary)?;
    if let Some(p) = snapshots {
        write_snapshots(model, cfg, p)?;
    }
    Ok(summary)
}
