//! Monte Carlo samplers against the exact lattice oracles.

use brwldp_core::exact::{brw_max_cdf, gw_survival, ind_max_cdf, rw_cdf};
use brwldp_core::mc::{
    critical_survival_mc, kesten_stigum, simulate, tilted_tail_rw, BrwSampler, Quantity,
    SimOptions,
};
use brwldp_core::{LatticeCdf, LatticeStep, Model, OffspringLaw, StepLaw};

/// DKW band half-width holding with probability `1 - alpha`.
fn dkw_epsilon(replicates: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * replicates as f64)).sqrt()
}

fn model(weights: &[f64]) -> Model {
    Model::new(
        OffspringLaw::new(weights).unwrap(),
        StepLaw::Lattice(LatticeStep::rademacher()),
    )
}

/// Largest gap between the empirical and exact CDFs of a maximum, with
/// extinct replicates at `-inf`.
fn ks_distance(model: &Model, quantity: Quantity, law: &LatticeCdf, opts: SimOptions, r: u64) -> f64 {
    let runs = simulate(model, quantity, law.n, r, 2024, opts).unwrap();
    let maxima: Vec<Option<i64>> = runs
        .into_iter()
        .map(|run| run.unwrap().max_position.map(|m| m as i64))
        .collect();
    let mut worst: f64 = 0.0;
    for y in law.lo - 1..=law.hi {
        let below = maxima.iter().filter(|m| m.is_none_or(|v| v <= y)).count();
        worst = worst.max((below as f64 / r as f64 - law.cdf(y)).abs());
    }
    worst
}

#[test]
fn brw_maximum_matches_oracle_in_distribution() {
    let r = 20_000;
    let eps = dkw_epsilon(r, 1e-6);
    for weights in [&[0.0, 0.5, 0.5][..], &[0.25, 0.0, 0.75][..]] {
        let m = model(weights);
        let step = m.step.as_lattice().unwrap();
        for n in [1usize, 8] {
            let law = brw_max_cdf(step, &m.offspring, n).unwrap();
            for sampler in [BrwSampler::Particles, BrwSampler::Occupation] {
                let opts = SimOptions { sampler, ..SimOptions::default() };
                let d = ks_distance(&m, Quantity::BrwMax, &law, opts, r);
                assert!(d < eps, "{weights:?} n = {n} {sampler:?}: {d} >= {eps}");
            }
        }
    }
}

#[test]
fn independent_maximum_matches_oracle_in_distribution() {
    let r = 20_000;
    let m = model(&[0.25, 0.0, 0.75]);
    let law = ind_max_cdf(m.step.as_lattice().unwrap(), &m.offspring, 10).unwrap();
    let d = ks_distance(&m, Quantity::IndMax, &law, SimOptions::default(), r);
    assert!(d < dkw_epsilon(r, 1e-6));
}

#[test]
fn tilted_tail_is_unbiased_across_cells() {
    let steps = [
        LatticeStep::rademacher(),
        LatticeStep::new(&[-1, 2], &[0.6, 0.4]).unwrap(),
    ];
    let r = 20_000;
    let mut cells = 0;
    for (k, step) in steps.iter().enumerate() {
        let law = StepLaw::Lattice(step.clone());
        let mean = step.mean();
        for n in [10usize, 50] {
            for frac in [0.2, 0.4, 0.6, 0.8, 0.9] {
                let x = mean + frac * (step.max_offset() as f64 - mean);
                let y = (x * n as f64 - 1e-9).ceil() as i64;
                let exact = rw_cdf(step, n).unwrap().upper_at(y - 1);
                let seed = 100 * k as u64 + n as u64 + (frac * 10.0) as u64;
                let e = tilted_tail_rw(&law, x, n, r, seed, SimOptions::default()).unwrap();
                let z = (e.point - exact).abs() / e.stderr;
                assert!(z < 4.5, "step {k} n = {n} x = {x}: {} vs {exact} (z = {z})", e.point);
                cells += 1;
            }
        }
    }
    assert_eq!(cells, 20);
}

#[test]
fn kesten_stigum_mean_is_one() {
    let offspring = OffspringLaw::new(&[0.25, 0.0, 0.75]).unwrap();
    let e = kesten_stigum(&offspring, 15, 50_000, 3, SimOptions::default()).unwrap();
    assert!((e.point - 1.0).abs() < 4.0 * e.stderr, "{e:?}");
}

#[test]
fn critical_survival_interval_covers_exact_value() {
    let law = OffspringLaw::new(&[0.5, 0.0, 0.5]).unwrap();
    let n = 50;
    let exact = n as f64 * gw_survival(&law, n);
    let e = critical_survival_mc(&law, n, 100_000, 17, SimOptions::default()).unwrap();
    assert!(e.contains(exact), "{e:?} vs {exact}");
}
