//! Offspring and step-size laws and the constants derived from them.

use serde_json::Value;

use crate::error::{Assumption, Error, Result};

const MASS_TOLERANCE: f64 = 1e-12;
const EXTINCTION_TOLERANCE: f64 = 1e-14;
const MAX_FIXED_POINT_ITERATIONS: usize = 100_000_000;

/// Finite-support reproduction law of a Galton–Watson process.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    weights: Vec<f64>,
    mean: f64,
    extinction: f64,
    rho: f64,
    k_star: usize,
    schroeder: bool,
}

impl OffspringLaw {
    /// Builds the law from `weights[k] = P(Z_1 = k)`.
    ///
    /// Trailing zero weights are dropped. The extinction probability is the
    /// limit of the pgf iterates started at zero, which converge monotonically
    /// to the smallest fixed point.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidModel("offspring weights are empty".into()));
        }
        if let Some((k, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidModel(format!(
                "offspring weight p({k}) = {w} is not a nonnegative number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "offspring weights sum to {total}, not 1"
            )));
        }
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        let weights = weights[..=last].to_vec();
        if weights.len() == 2 && weights[0] == 0.0 {
            return Err(Error::InvalidModel(
                "offspring law is the point mass at 1 (m = 1, degenerate)".into(),
            ));
        }

        let mean: f64 = weights.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        let k_star = weights
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, &w)| w > 0.0)
            .map(|(k, _)| k)
            .unwrap_or(0);
        let schroeder = weights[0] + weights.get(1).copied().unwrap_or(0.0) > 0.0;

        let mut law = OffspringLaw {
            weights,
            mean,
            extinction: 1.0,
            rho: 0.0,
            k_star,
            schroeder,
        };
        law.extinction = law.solve_extinction()?;
        let slope = law.pgf_derivative(law.extinction);
        law.rho = if slope > 0.0 { -slope.ln() } else { f64::INFINITY };
        Ok(law)
    }

    fn solve_extinction(&self) -> Result<f64> {
        if self.mean <= 1.0 {
            return Ok(1.0);
        }
        let mut s = 0.0;
        for _ in 0..MAX_FIXED_POINT_ITERATIONS {
            let next = self.pgf(s);
            if next - s <= EXTINCTION_TOLERANCE {
                return Ok(next);
            }
            s = next;
        }
        Err(Error::Numerical(
            "extinction fixed-point iteration did not converge".into(),
        ))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest child count with positive weight.
    pub fn max_children(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| (k as f64 - self.mean).powi(2) * w)
            .sum()
    }

    pub fn extinction(&self) -> f64 {
        self.extinction
    }

    /// `-log E[Z_1 q^(Z_1 - 1)]`; `+inf` in the Böttcher case.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    pub fn is_schroeder(&self) -> bool {
        self.schroeder
    }

    pub fn log_mean(&self) -> f64 {
        self.mean.ln()
    }

    pub fn require_supercritical(&self) -> Result<()> {
        if self.mean > 1.0 {
            Ok(())
        } else {
            Err(Error::assumption(
                Assumption::Supercritical,
                format!("reproduction mean m = {} is not above 1", self.mean),
            ))
        }
    }

    pub fn require_schroeder(&self) -> Result<()> {
        if self.schroeder {
            Ok(())
        } else {
            Err(Error::assumption(
                Assumption::Schroeder,
                "p(0) + p(1) = 0 (Böttcher case), lower deviations of the BRW maximum are not covered",
            ))
        }
    }

    /// Probability generating function `E[u^{Z_1}]` for `u` in `[0, 1]`.
    pub fn pgf_eval(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("pgf argument {u} outside [0, 1]")));
        }
        Ok(self.pgf(u))
    }

    /// Unchecked Horner evaluation of the pgf.
    pub(crate) fn pgf(&self, u: f64) -> f64 {
        self.weights.iter().rev().fold(0.0, |acc, &w| acc * u + w)
    }

    pub fn pgf_derivative(&self, u: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &w)| acc * u + k as f64 * w)
    }

    /// `pgf(base + delta) - pgf(base)` without cancellation.
    ///
    /// Every term of the expansion is nonnegative for `base, delta >= 0`, so
    /// the result keeps full relative precision even when `delta` is far below
    /// the spacing of doubles near `pgf(base)`. With `base = 1 - delta` this
    /// evaluates `1 - pgf(1 - delta)`.
    pub fn pgf_increment(&self, base: f64, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let upper = base + delta;
        // partial = sum_{i<k} upper^i base^(k-1-i)
        let mut partial = 1.0;
        let mut base_pow = 1.0;
        let mut acc = 0.0;
        for &w in &self.weights[1..] {
            acc += w * partial;
            base_pow *= base;
            partial = upper * partial + base_pow;
        }
        delta * acc
    }
}

/// Cumulant generating function value and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cgf {
    pub value: f64,
    /// Mean of the tilted law.
    pub slope: f64,
    /// Variance of the tilted law.
    pub curvature: f64,
}

/// Step law supported on finitely many integers.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeStep {
    offsets: Vec<i64>,
    probs: Vec<f64>,
}

impl LatticeStep {
    /// Offsets must be strictly increasing. Zero-probability offsets are
    /// dropped so that the stored support is exact.
    pub fn new(offsets: &[i64], probs: &[f64]) -> Result<Self> {
        if offsets.is_empty() || offsets.len() != probs.len() {
            return Err(Error::InvalidModel(format!(
                "lattice step needs matching nonempty offsets and probs (got {} and {})",
                offsets.len(),
                probs.len()
            )));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "lattice offsets must be strictly increasing".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidModel(format!(
                "lattice probability {p} is not a nonnegative number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "lattice probabilities sum to {total}, not 1"
            )));
        }
        let (offsets, probs) = offsets
            .iter()
            .zip(probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&o, &p)| (o, p))
            .unzip();
        Ok(LatticeStep { offsets, probs })
    }

    /// Symmetric ±1 steps.
    pub fn rademacher() -> Self {
        LatticeStep {
            offsets: vec![-1, 1],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_offset(&self) -> i64 {
        self.offsets[0]
    }

    pub fn max_offset(&self) -> i64 {
        *self.offsets.last().unwrap()
    }

    pub fn prob_of(&self, offset: i64) -> f64 {
        self.offsets
            .iter()
            .position(|&o| o == offset)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn mean(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.probs)
            .map(|(&o, &p)| o as f64 * p)
            .sum()
    }

    /// Log-sum-exp evaluation, factored around the largest exponent.
    pub fn cgf(&self, lambda: f64) -> Result<Cgf> {
        let exponents: Vec<f64> = self
            .offsets
            .iter()
            .zip(&self.probs)
            .map(|(&o, &p)| lambda * o as f64 + p.ln())
            .collect();
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = exponents.iter().map(|e| (e - top).exp()).collect();
        let total: f64 = scaled.iter().sum();
        let value = top + total.ln();
        let slope = self
            .offsets
            .iter()
            .zip(&scaled)
            .map(|(&o, &w)| o as f64 * w)
            .sum::<f64>()
            / total;
        let curvature = self
            .offsets
            .iter()
            .zip(&scaled)
            .map(|(&o, &w)| (o as f64 - slope).powi(2) * w)
            .sum::<f64>()
            / total;
        if !value.is_finite() || !slope.is_finite() || !curvature.is_finite() {
            return Err(Error::Numerical(format!(
                "cumulant generating function not finite at lambda = {lambda}"
            )));
        }
        Ok(Cgf {
            value,
            slope,
            curvature,
        })
    }

    /// Exponentially tilted law `p_j e^{lambda o_j - cgf(lambda)}`.
    pub fn tilted(&self, lambda: f64) -> Result<LatticeStep> {
        let value = self.cgf(lambda)?.value;
        let probs = self
            .offsets
            .iter()
            .zip(&self.probs)
            .map(|(&o, &p)| (lambda * o as f64 + p.ln() - value).exp())
            .collect();
        Ok(LatticeStep {
            offsets: self.offsets.clone(),
            probs,
        })
    }

    /// Shifts the law to mean zero when the shift is an integer.
    pub fn centered(&self) -> Result<LatticeStep> {
        let mean = self.mean();
        let shift = mean.round();
        if (mean - shift).abs() > MASS_TOLERANCE {
            return Err(Error::domain(format!(
                "centering by {mean} is not representable on the integer lattice"
            )));
        }
        let shift = shift as i64;
        Ok(LatticeStep {
            offsets: self.offsets.iter().map(|o| o - shift).collect(),
            probs: self.probs.clone(),
        })
    }
}

/// Normal step law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStep {
    mean: f64,
    sigma: f64,
}

impl GaussianStep {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !mean.is_finite() {
            return Err(Error::InvalidModel(format!(
                "gaussian step needs finite mean and sigma > 0 (got mean {mean}, sigma {sigma})"
            )));
        }
        Ok(GaussianStep { mean, sigma })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cgf(&self, lambda: f64) -> Cgf {
        let var = self.sigma * self.sigma;
        Cgf {
            value: lambda * self.mean + 0.5 * lambda * lambda * var,
            slope: self.mean + lambda * var,
            curvature: var,
        }
    }
}

/// Step-size law of the walk.
#[derive(Debug, Clone, PartialEq)]
pub enum StepLaw {
    Lattice(LatticeStep),
    Gaussian(GaussianStep),
}

impl StepLaw {
    pub fn mean(&self) -> f64 {
        match self {
            StepLaw::Lattice(l) => l.mean(),
            StepLaw::Gaussian(g) => g.mean(),
        }
    }

    pub fn cgf(&self, lambda: f64) -> Result<Cgf> {
        match self {
            StepLaw::Lattice(l) => l.cgf(lambda),
            StepLaw::Gaussian(g) => Ok(g.cgf(lambda)),
        }
    }

    /// Upper end of the support; `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            StepLaw::Lattice(l) => Some(l.max_offset() as f64),
            StepLaw::Gaussian(_) => None,
        }
    }

    pub fn support_min(&self) -> Option<f64> {
        match self {
            StepLaw::Lattice(l) => Some(l.min_offset() as f64),
            StepLaw::Gaussian(_) => None,
        }
    }

    pub fn as_lattice(&self) -> Result<&LatticeStep> {
        match self {
            StepLaw::Lattice(l) => Ok(l),
            StepLaw::Gaussian(_) => Err(Error::assumption(
                Assumption::Lattice,
                "exact oracles need an integer-lattice step law",
            )),
        }
    }
}

/// An offspring law paired with a step law.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub offspring: OffspringLaw,
    pub step: StepLaw,
}

impl Model {
    pub fn new(offspring: OffspringLaw, step: StepLaw) -> Self {
        Model { offspring, step }
    }

    /// Parses the JSON model description
    /// `{"offspring": {"weights": [..]}, "step": {"kind": .., ..}}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::ModelFile {
            key: "<root>".into(),
            reason: e.to_string(),
        })?;
        let offspring = field(&root, "offspring", "offspring")?;
        let weights = number_list(field(offspring, "weights", "offspring.weights")?, "offspring.weights")?;
        let offspring = OffspringLaw::new(&weights).map_err(|e| Error::ModelFile {
            key: "offspring.weights".into(),
            reason: e.to_string(),
        })?;

        let step = field(&root, "step", "step")?;
        let kind = field(step, "kind", "step.kind")?
            .as_str()
            .ok_or_else(|| bad_key("step.kind", "expected a string"))?;
        let step = match kind {
            "lattice" => {
                let offsets = field(step, "offsets", "step.offsets")?
                    .as_array()
                    .ok_or_else(|| bad_key("step.offsets", "expected an array of integers"))?
                    .iter()
                    .map(|v| v.as_i64().ok_or_else(|| bad_key("step.offsets", "expected an array of integers")))
                    .collect::<Result<Vec<_>>>()?;
                let probs = number_list(field(step, "probs", "step.probs")?, "step.probs")?;
                StepLaw::Lattice(LatticeStep::new(&offsets, &probs).map_err(|e| Error::ModelFile {
                    key: "step".into(),
                    reason: e.to_string(),
                })?)
            }
            "gaussian" => {
                let sigma = field(step, "sigma", "step.sigma")?
                    .as_f64()
                    .ok_or_else(|| bad_key("step.sigma", "expected a number"))?;
                let mean = match step.get("mean") {
                    None => 0.0,
                    Some(v) => v.as_f64().ok_or_else(|| bad_key("step.mean", "expected a number"))?,
                };
                StepLaw::Gaussian(GaussianStep::new(mean, sigma).map_err(|e| Error::ModelFile {
                    key: "step.sigma".into(),
                    reason: e.to_string(),
                })?)
            }
            other => {
                return Err(bad_key(
                    "step.kind",
                    &format!("unknown kind `{other}` (expected `lattice` or `gaussian`)"),
                ))
            }
        };
        Ok(Model { offspring, step })
    }
}

fn bad_key(key: &str, reason: &str) -> Error {
    Error::ModelFile {
        key: key.into(),
        reason: reason.into(),
    }
}

fn field<'a>(value: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    value.get(name).ok_or_else(|| bad_key(path, "missing"))
}

fn number_list(value: &Value, path: &str) -> Result<Vec<f64>> {
    value
        .as_array()
        .ok_or_else(|| bad_key(path, "expected an array of numbers"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| bad_key(path, "expected an array of numbers")))
        .collect()
}
