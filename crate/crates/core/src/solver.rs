//! Inverse solver: fits the couplings of the classical rotator model to the
//! quantum data by Nesterov-accelerated gradient descent on the convex cost
//! `L(K) = log Z(K) - sum_a K_a <A_a>_data`.
//!
//! The gradient `g_a = <A_a>_K - <A_a>_data` is a Monte Carlo estimate. Data a
//! separable state can reproduce drive `g` to zero within the uncertainties.
//! Entangled data leave a finite residual `g` while `|K|` runs away; the
//! residual direction and the runaway couplings both define witnesses.

use crate::error::{Error, Result};
use crate::model::{
    Axis, ClassicalHamiltonian, CouplingVector, ObservableSet, QuantumDataset, Symmetry,
};
use crate::sampler::{MomentEstimate, Sampler, SamplerConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Componentwise tolerance on `g`, in combined standard deviations.
    pub compat_tolerance_sigmas: f64,
    pub runaway_norm: f64,
    pub plateau_window: usize,
    pub plateau_rel_change: f64,
    /// Sampler precision per iteration; `None` picks 0.1 for isotropic data
    /// and 0.05 otherwise.
    pub eta: Option<f64>,
    /// Per-site uncertainty used for observables declared exact.
    pub uncertainty_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 0.01,
            max_iterations: 3000,
            compat_tolerance_sigmas: 3.0,
            runaway_norm: 1e3,
            plateau_window: 20,
            plateau_rel_change: 0.01,
            eta: None,
            uncertainty_floor: 1e-3,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("compat_tolerance_sigmas", self.compat_tolerance_sigmas),
            ("runaway_norm", self.runaway_norm),
            ("plateau_rel_change", self.plateau_rel_change),
            ("uncertainty_floor", self.uncertainty_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_iterations == 0 || self.plateau_window == 0 {
            return Err(Error::Config(
                "max_iterations and plateau_window must be positive".into(),
            ));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::Config("eta must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// The sampler precision used for `dataset`.
    pub fn eta_for(&self, dataset: &QuantumDataset) -> f64 {
        self.eta.unwrap_or_else(|| default_eta(dataset))
    }
}

fn default_eta(dataset: &QuantumDataset) -> f64 {
    let isotropic = dataset.symmetry() == Symmetry::Su2
        || dataset.observables().iter().all(|o| o.axis == Axis::Iso);
    if isotropic {
        0.1
    } else {
        0.05
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compatible,
    WitnessFound,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Compatible => "compatible",
            Verdict::WitnessFound => "witness_found",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compatible" => Ok(Verdict::Compatible),
            "witness_found" => Ok(Verdict::WitnessFound),
            "inconclusive" => Ok(Verdict::Inconclusive),
            other => Err(Error::Config(format!("unknown verdict '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitVerdict {
    pub verdict: Verdict,
    pub grad_norm: f64,
    pub coupling_norm: f64,
    /// `max_a |g_a| / sqrt(sigma_data_a^2 + Err_a^2)`.
    pub sigma_distance: f64,
    pub iterations: usize,
    /// Some observable was declared exact and the uncertainty floor was used.
    pub uncertainty_floor_applied: bool,
    pub budget_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub iter: usize,
    pub grad_norm: f64,
    pub coupling_norm: f64,
    pub mc_steps: u64,
    pub acceptance: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrajectory {
    pub records: Vec<FitRecord>,
    /// Couplings at which the final gradient was evaluated.
    pub final_couplings: CouplingVector,
    pub final_gradient: Vec<f64>,
    pub final_errors: Vec<f64>,
}

/// Averages `values` over observables that `symmetry` declares equivalent.
/// Under SU(2) the three diagonal correlators at one distance, and the three
/// field components, form a class. Errors are combined as for a mean of
/// independent estimates.
pub fn symmetrize(set: &ObservableSet, symmetry: Symmetry, values: &mut [f64], errors: &mut [f64]) {
    if symmetry != Symmetry::Su2 {
        return;
    }
    let mut seen = vec![false; set.len()];
    for i in 0..set.len() {
        let o = set.get(i);
        if seen[i] || o.axis == Axis::Iso {
            continue;
        }
        let class: Vec<usize> = Axis::CARTESIAN
            .iter()
            .filter_map(|&a| set.position(o.kind, a, o.distance))
            .collect();
        for &j in &class {
            seen[j] = true;
        }
        if class.len() < 2 {
            continue;
        }
        let k = class.len() as f64;
        let mean = class.iter().map(|&j| values[j]).sum::<f64>() / k;
        let err = class
            .iter()
            .map(|&j| errors[j] * errors[j])
            .sum::<f64>()
            .sqrt()
            / k;
        for &j in &class {
            values[j] = mean;
            errors[j] = err;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient of the cost at `couplings`, with one-sigma Monte Carlo errors.
pub fn gradient(
    dataset: &QuantumDataset,
    couplings: &CouplingVector,
    sampler_config: &SamplerConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let targets = dataset.values();
    let ham = ClassicalHamiltonian::new(dataset.set().clone(), couplings.clone())?;
    let mut sampler = Sampler::new(dataset.set().clone(), sampler_config.clone())?;
    let est = sampler.estimate(&ham, Some(&targets))?;
    Ok(gradient_from(dataset, &targets, &est))
}

fn gradient_from(
    dataset: &QuantumDataset,
    targets: &[f64],
    est: &MomentEstimate,
) -> (Vec<f64>, Vec<f64>) {
    let mut g: Vec<f64> = est.means.iter().zip(targets).map(|(m, t)| m - t).collect();
    let mut err = est.errors.clone();
    symmetrize(dataset.set(), dataset.symmetry(), &mut g, &mut err);
    (g, err)
}

/// Extensive data uncertainties with the floor applied to exact entries.
fn data_sigmas(dataset: &QuantumDataset, floor: f64) -> (Vec<f64>, bool) {
    let mut applied = false;
    let sig = dataset
        .per_site_uncertainties()
        .iter()
        .zip(dataset.set().orbit_terms())
        .map(|(&u, t)| {
            let u = if u == 0.0 {
                applied = true;
                floor
            } else {
                u
            };
            u * t as f64
        })
        .collect();
    (sig, applied)
}

fn sigma_distance(g: &[f64], err: &[f64], data_sigma: &[f64]) -> f64 {
    g.iter()
        .zip(err)
        .zip(data_sigma)
        .map(|((g, e), s)| g.abs() / (s * s + e * e).sqrt())
        .fold(0.0, f64::max)
}

/// Runs the fit; see [`fit_separable_with`].
pub fn fit_separable(
    dataset: &QuantumDataset,
    fit_config: &FitConfig,
    sampler_config: &SamplerConfig,
) -> Result<(FitVerdict, FitTrajectory)> {
    fit_separable_with(dataset, fit_config, sampler_config, |_| {})
}

/// Runs NAG from `K = 0`:
/// `y = K_t + mu_t (K_t - K_{t-1})`, `K_{t+1} = y - epsilon g(y)`,
/// `mu_t = (t - 1) / (t + 2)`.
///
/// Stops with `compatible` once every `|g_a|` is within
/// `compat_tolerance_sigmas` combined standard deviations, with
/// `witness_found` once `|K|` exceeds `runaway_norm` while the windowed mean
/// of `|g|` changes by less than `plateau_rel_change` between consecutive
/// windows, and with `inconclusive` after `max_iterations`.
///
/// A gradient estimate that exhausts the sampler budget is first tested for
/// compatibility, then retried once with a doubled cap; the retried estimate
/// is used whatever its precision. `on_record` sees every trajectory row as
/// it is produced.
pub fn fit_separable_with<F: FnMut(&FitRecord)>(
    dataset: &QuantumDataset,
    fit_config: &FitConfig,
    sampler_config: &SamplerConfig,
    mut on_record: F,
) -> Result<(FitVerdict, FitTrajectory)> {
    fit_config.validate()?;
    let mut scfg = sampler_config.clone();
    scfg.target_eta = fit_config.eta_for(dataset);
    let mut sampler = Sampler::new(dataset.set().clone(), scfg.clone())?;

    let targets = dataset.values();
    let (data_sigma, floor_applied) = data_sigmas(dataset, fit_config.uncertainty_floor);
    let dim = dataset.len();
    let start = Instant::now();

    let mut k = vec![0.0; dim];
    let mut k_prev = k.clone();
    let mut records: Vec<FitRecord> = Vec::new();
    let mut retries = 0usize;
    let mut last: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for t in 1..=fit_config.max_iterations {
        let mu = (t as f64 - 1.0) / (t as f64 + 2.0);
        let y: Vec<f64> = k
            .iter()
            .zip(&k_prev)
            .map(|(a, b)| a + mu * (a - b))
            .collect();
        let ham =
            ClassicalHamiltonian::new(dataset.set().clone(), CouplingVector::new(y.clone())?)?;

        let mut est = sampler.estimate_with_cap(&ham, Some(&targets), scfg.max_steps)?;
        let mut steps = est.mc_steps_used;
        let (mut g, mut err) = gradient_from(dataset, &targets, &est);
        if est.budget_exceeded
            && sigma_distance(&g, &err, &data_sigma) > fit_config.compat_tolerance_sigmas
        {
            retries += 1;
            est = sampler.estimate_with_cap(&ham, Some(&targets), 2 * scfg.max_steps)?;
            steps += est.mc_steps_used;
            (g, err) = gradient_from(dataset, &targets, &est);
        }

        let grad_norm = norm(&g);
        let record = FitRecord {
            iter: t,
            grad_norm,
            coupling_norm: norm(&y),
            mc_steps: steps,
            acceptance: est.acceptance_rate,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_record(&record);
        records.push(record);

        let dist = sigma_distance(&g, &err, &data_sigma);
        let verdict = if dist <= fit_config.compat_tolerance_sigmas {
            Some(Verdict::Compatible)
        } else if norm(&y) > fit_config.runaway_norm && plateaued(&records, fit_config) {
            Some(Verdict::WitnessFound)
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(finish(
                verdict,
                y,
                g,
                err,
                dist,
                records,
                floor_applied,
                retries,
            ));
        }

        let next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(y, g)| y - fit_config.epsilon * g)
            .collect();
        k_prev = std::mem::replace(&mut k, next);
        last = Some((y, g, err));
    }

    let (y, g, err) = last.expect("at least one iteration");
    let dist = sigma_distance(&g, &err, &data_sigma);
    Ok(finish(
        Verdict::Inconclusive,
        y,
        g,
        err,
        dist,
        records,
        floor_applied,
        retries,
    ))
}

fn plateaued(records: &[FitRecord], cfg: &FitConfig) -> bool {
    let w = cfg.plateau_window;
    if records.len() < 2 * w {
        return false;
    }
    let mean = |rs: &[FitRecord]| rs.iter().map(|r| r.grad_norm).sum::<f64>() / rs.len() as f64;
    let n = records.len();
    let recent = mean(&records[n - w..]);
    let before = mean(&records[n - 2 * w..n - w]);
    before > 0.0 && ((recent - before) / before).abs() < cfg.plateau_rel_change
}

#[allow(clippy::too_many_arguments)]
fn finish(
    verdict: Verdict,
    couplings: Vec<f64>,
    g: Vec<f64>,
    err: Vec<f64>,
    sigma_distance: f64,
    records: Vec<FitRecord>,
    floor_applied: bool,
    retries: usize,
) -> (FitVerdict, FitTrajectory) {
    let fv = FitVerdict {
        verdict,
        grad_norm: norm(&g),
        coupling_norm: norm(&couplings),
        sigma_distance,
        iterations: records.len(),
        uncertainty_floor_applied: floor_applied,
        budget_retries: retries,
    };
    let traj = FitTrajectory {
        records,
        final_couplings: CouplingVector::new(couplings).expect("finite couplings"),
        final_gradient: g,
        final_errors: err,
    };
    (fv, traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Metadata, ObservableSpec};

    fn fast_sampler(seed: u64) -> SamplerConfig {
        SamplerConfig {
            seed,
            chains: 2,
            thermalization_sweeps: 200,
            rethermalization_sweeps: 20,
            max_steps: 40_000,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn zero_everything_gives_zero_gradient() {
        let set = ObservableSet::heisenberg(4, 2).unwrap();
        let ds = QuantumDataset::new(set, vec![0.0, 0.0], vec![0.0, 0.0], Metadata::new()).unwrap();
        let (g, e) = gradient(&ds, &CouplingVector::zeros(2), &fast_sampler(1)).unwrap();
        for (g, e) in g.iter().zip(&e) {
            assert!(g.abs() < 4.0 * e + 1e-12, "{g} +- {e}");
        }
    }

    #[test]
    fn uniform_measure_gradient_is_minus_data() {
        let c = -0.4;
        let set = ObservableSet::heisenberg(6, 1).unwrap();
        let ds = QuantumDataset::new(set, vec![c], vec![0.0], Metadata::new()).unwrap();
        let (g, e) = gradient(&ds, &CouplingVector::zeros(1), &fast_sampler(2)).unwrap();
        assert!(
            (g[0] - (-6.0 * c)).abs() < 4.0 * e[0],
            "{} +- {}",
            g[0],
            e[0]
        );
    }

    #[test]
    fn su2_averaging_ties_axes() {
        let set = ObservableSet::new(
            4,
            vec![
                ObservableSpec::pair(Axis::X, 1),
                ObservableSpec::pair(Axis::Y, 1),
                ObservableSpec::pair(Axis::Z, 1),
                ObservableSpec::pair(Axis::Iso, 2),
            ],
        )
        .unwrap();
        let mut v = vec![1.0, 2.0, 3.0, 7.0];
        let mut e = vec![0.3, 0.3, 0.3, 0.1];
        symmetrize(&set, Symmetry::Su2, &mut v, &mut e);
        assert_eq!(&v[..3], &[2.0, 2.0, 2.0]);
        assert_eq!(v[3], 7.0);
        assert!((e[0] - 0.3 / 3f64.sqrt()).abs() < 1e-15);
        let mut w = vec![1.0, 2.0, 3.0, 7.0];
        symmetrize(&set, Symmetry::Ising, &mut w, &mut e);
        assert_eq!(w, vec![1.0, 2.0, 3.0, 7.0]);
    }

    #[test]
    fn default_eta_depends_on_data() {
        let h = QuantumDataset::new(
            ObservableSet::heisenberg(4, 1).unwrap(),
            vec![0.0],
            vec![0.0],
            Metadata::new(),
        )
        .unwrap();
        let i = QuantumDataset::new(
            ObservableSet::ising(4, 1).unwrap(),
            vec![0.0; 4],
            vec![0.0; 4],
            Metadata::new(),
        )
        .unwrap();
        let cfg = FitConfig::default();
        assert_eq!(cfg.eta_for(&h), 0.1);
        assert_eq!(cfg.eta_for(&i), 0.05);
    }

    #[test]
    fn plateau_detection() {
        let cfg = FitConfig {
            plateau_window: 3,
            ..FitConfig::default()
        };
        let rec = |g: f64| FitRecord {
            iter: 0,
            grad_norm: g,
            coupling_norm: 0.0,
            mc_steps: 0,
            acceptance: 0.0,
            seconds: 0.0,
        };
        let flat: Vec<_> = [2.0, 2.0, 2.0, 2.0, 2.0, 2.001]
            .into_iter()
            .map(rec)
            .collect();
        assert!(plateaued(&flat, &cfg));
        let falling: Vec<_> = [3.0, 2.8, 2.6, 2.4, 2.2, 2.0]
            .into_iter()
            .map(rec)
            .collect();
        assert!(!plateaued(&falling, &cfg));
        assert!(!plateaued(&flat[..5], &cfg));
    }

    #[test]
    fn singlet_fit_runs_away() {
        let set = ObservableSet::heisenberg(2, 1).unwrap();
        let ds = QuantumDataset::new(set, vec![-3.0], vec![0.0], Metadata::new()).unwrap();
        let (v, traj) = fit_separable(&ds, &FitConfig::default(), &fast_sampler(5)).unwrap();
        assert_eq!(v.verdict, Verdict::WitnessFound);
        assert!(traj.final_couplings.as_slice()[0] < -1e3);
        // residual approaches the separable gap of 2 from above
        assert!(traj.final_gradient[0] > 2.0 && traj.final_gradient[0] < 2.05);
    }
}
