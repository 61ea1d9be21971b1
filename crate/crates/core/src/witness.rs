//! Witness construction and evaluation.
//!
//! A witness is a unit vector `W` over the observables. Its operator is
//! `-sum_a W_a A_a`, its separable bound `B_sep` is the minimum of
//! `-sum_a W_a A_a(n)` over rotator configurations, and the data violate it
//! by `B_sep - <W>` when that is positive.

use crate::error::{Error, Result};
use crate::model::{CouplingVector, QuantumDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessMode {
    FromGradient,
    #[default]
    FromCouplings,
}

impl WitnessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WitnessMode::FromGradient => "from_gradient",
            WitnessMode::FromCouplings => "from_couplings",
        }
    }
}

impl fmt::Display for WitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WitnessMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from_gradient" | "gradient" => Ok(WitnessMode::FromGradient),
            "from_couplings" | "couplings" => Ok(WitnessMode::FromCouplings),
            other => Err(Error::Config(format!("unknown witness mode '{other}'"))),
        }
    }
}

fn unit(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::NoWitness(format!(
            "{what} has zero or non-finite norm"
        )));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// `W = -g / |g|`.
pub fn witness_from_gradient(final_gradient: &[f64]) -> Result<Vec<f64>> {
    let w = unit(final_gradient, "gradient")?;
    Ok(w.into_iter().map(|x| -x).collect())
}

/// `W = K / |K|`.
pub fn witness_from_couplings(final_couplings: &CouplingVector) -> Result<Vec<f64>> {
    unit(final_couplings.as_slice(), "coupling vector")
}

/// Quantum expectation of the witness operator, `-sum_a W_a <A_a>`.
pub fn quantum_value(coefficients: &[f64], dataset: &QuantumDataset) -> Result<f64> {
    if coefficients.len() != dataset.len() {
        return Err(Error::ShapeMismatch {
            what: "witness coefficients",
            expected: dataset.len(),
            actual: coefficients.len(),
        });
    }
    Ok(-coefficients
        .iter()
        .zip(dataset.values())
        .map(|(w, v)| w * v)
        .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub coefficients: Vec<f64>,
    pub mode: WitnessMode,
    pub n_sites: usize,
    /// Extensive separable bound.
    pub separable_bound: f64,
    /// Extensive quantum value.
    pub quantum_value: f64,
    /// `separable_bound - quantum_value`; positive when violated.
    pub violation: f64,
    /// `1 - separable_bound / quantum_value`, absent when the quantum value is zero.
    pub noise_robustness: Option<f64>,
}

impl WitnessReport {
    pub fn from_values(
        coefficients: Vec<f64>,
        mode: WitnessMode,
        n_sites: usize,
        separable_bound: f64,
        quantum_value: f64,
    ) -> Self {
        let noise_robustness = if quantum_value != 0.0 {
            Some(1.0 - separable_bound / quantum_value)
        } else {
            None
        };
        WitnessReport {
            coefficients,
            mode,
            n_sites,
            separable_bound,
            quantum_value,
            violation: separable_bound - quantum_value,
            noise_robustness,
        }
    }

    pub fn violated(&self) -> bool {
        self.violation > 0.0
    }

    pub fn bound_per_site(&self) -> f64 {
        self.separable_bound / self.n_sites as f64
    }

    pub fn quantum_value_per_site(&self) -> f64 {
        self.quantum_value / self.n_sites as f64
    }

    pub fn violation_per_site(&self) -> f64 {
        self.violation / self.n_sites as f64
    }
}

/// Evaluates a unit-norm witness against `dataset` with an extensive
/// `separable_bound`.
pub fn evaluate_witness(
    coefficients: &[f64],
    dataset: &QuantumDataset,
    separable_bound: f64,
    mode: WitnessMode,
) -> Result<WitnessReport> {
    let norm = coefficients.iter().map(|w| w * w).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidData(format!(
            "witness coefficients must have unit norm, got {norm}"
        )));
    }
    let q = quantum_value(coefficients, dataset)?;
    Ok(WitnessReport::from_values(
        coefficients.to_vec(),
        mode,
        dataset.n_sites(),
        separable_bound,
        q,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCheck {
    pub passed: bool,
    pub reference_violation: f64,
    pub best_trial_violation: f64,
    pub failures: usize,
    pub trials: usize,
}

/// Compares the violation of `coefficients` with that of `trials` random
/// unit directions over the same observables. `bound_fn` returns the
/// extensive separable bound of a unit witness; a trial fails when its
/// violation exceeds the reference by more than `2 * tolerance`.
pub fn witness_optimality_check<F>(
    coefficients: &[f64],
    dataset: &QuantumDataset,
    mut bound_fn: F,
    trials: usize,
    tolerance: f64,
    seed: u64,
) -> Result<OptimalityCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let violation = |w: &[f64], b: f64| -> Result<f64> { Ok(b - quantum_value(w, dataset)?) };
    let reference = violation(coefficients, bound_fn(coefficients)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..trials {
        let w = random_direction(&mut rng, coefficients.len());
        let v = violation(&w, bound_fn(&w)?)?;
        best = best.max(v);
        if v > reference + 2.0 * tolerance {
            failures += 1;
        }
    }
    Ok(OptimalityCheck {
        passed: failures == 0,
        reference_violation: reference,
        best_trial_violation: best,
        failures,
        trials,
    })
}

/// Uniform random unit vector in `dim` dimensions.
pub fn random_direction<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = unit(&v, "direction") {
            return u;
        }
    }
}
