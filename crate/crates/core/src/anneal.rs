//! Separable bounds: the minimum over rotator configurations of the
//! classical witness functional `W_cl(n) = -sum_a W_a A_a(n)`.
//!
//! [`separable_bound`] anneals `exp(-beta W_cl)` with the sampler's update
//! kernel along a geometric beta ramp and polishes the best configurations by
//! aligning each rotator with its local field. [`exact_bound_small`] is a
//! dense-grid oracle for two or three sites.

use crate::error::{Error, Result};
use crate::model::{ClassicalHamiltonian, CouplingVector, ObservableSet, RotatorConfiguration};
use crate::sampler::{metropolis_update_beta, overrelaxation_update, ChainRng, ProposalState};
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smallest non-zero inverse temperature of the default ramp.
const BETA_FLOOR: f64 = 1e-2;
const POLISH_TOL: f64 = 1e-12;
const POLISH_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    /// Points on the geometric part of the ramp.
    pub beta_steps: usize,
    pub sweeps_per_beta: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Keep the per-sweep energies of every restart.
    pub record_trace: bool,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            beta_start: 0.0,
            beta_end: 1000.0,
            beta_steps: 200,
            sweeps_per_beta: 20,
            restarts: 8,
            seed: 0,
            record_trace: false,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_start >= 0.0 && self.beta_end > self.beta_start && self.beta_end.is_finite())
        {
            return Err(Error::Config("need beta_end > beta_start >= 0".into()));
        }
        if self.beta_steps < 2 || self.sweeps_per_beta == 0 || self.restarts == 0 {
            return Err(Error::Config(
                "beta_steps >= 2, sweeps_per_beta >= 1 and restarts >= 1 are required".into(),
            ));
        }
        Ok(())
    }

    /// `beta_start` (normally 0) followed by a geometric grid ending at `beta_end`.
    pub fn betas(&self) -> Vec<f64> {
        let lo = if self.beta_start > 0.0 {
            self.beta_start
        } else {
            BETA_FLOOR.min(self.beta_end)
        };
        let mut out = Vec::with_capacity(self.beta_steps + 1);
        if self.beta_start == 0.0 {
            out.push(0.0);
        }
        let ratio = (self.beta_end / lo).ln() / (self.beta_steps - 1) as f64;
        out.extend((0..self.beta_steps).map(|k| lo * (ratio * k as f64).exp()));
        *out.last_mut().expect("non-empty") = self.beta_end;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealOutcome {
    /// Polished minimum of `W_cl` (extensive).
    pub bound: f64,
    pub config: RotatorConfiguration,
    /// Lowest `W_cl` recorded during the ramps, before polishing.
    pub annealed_min: f64,
    /// Polished minimum of each restart, in restart order.
    pub restart_minima: Vec<f64>,
    /// Energy after every sweep, per restart, when requested.
    pub trace: Option<Vec<Vec<f64>>>,
}

impl AnnealOutcome {
    pub fn bound_per_site(&self) -> f64 {
        self.bound / self.config.len() as f64
    }
}

fn witness_hamiltonian(coefficients: &[f64], set: &ObservableSet) -> Result<ClassicalHamiltonian> {
    ClassicalHamiltonian::new(set.clone(), CouplingVector::new(coefficients.to_vec())?)
}

struct RestartResult {
    polished: f64,
    config: RotatorConfiguration,
    recorded_min: f64,
    trace: Vec<f64>,
}

/// Anneals `W_cl = -sum_a W_a A_a` over rotator configurations on the ring
/// described by `set` and returns the lowest value found.
pub fn separable_bound(
    coefficients: &[f64],
    set: &ObservableSet,
    schedule: &AnnealSchedule,
) -> Result<AnnealOutcome> {
    schedule.validate()?;
    let ham = witness_hamiltonian(coefficients, set)?;
    let betas = schedule.betas();
    let results: Vec<RestartResult> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| anneal_once(&ham, &betas, schedule, r))
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.polished < results[best].polished {
            best = i;
        }
    }
    let annealed_min = results
        .iter()
        .map(|r| r.recorded_min)
        .fold(f64::INFINITY, f64::min);
    let restart_minima = results.iter().map(|r| r.polished).collect();
    let trace = schedule
        .record_trace
        .then(|| results.iter().map(|r| r.trace.clone()).collect());
    let RestartResult {
        polished, config, ..
    } = results.into_iter().nth(best).expect("restarts >= 1");
    Ok(AnnealOutcome {
        bound: polished,
        config,
        annealed_min,
        restart_minima,
        trace,
    })
}

fn anneal_once(
    ham: &ClassicalHamiltonian,
    betas: &[f64],
    schedule: &AnnealSchedule,
    restart: usize,
) -> RestartResult {
    let n = ham.n_sites();
    let mut rng = ChainRng::seed_from_u64(schedule.seed);
    rng.set_stream(restart as u64);
    let mut config = RotatorConfiguration::random(n, &mut rng);
    let mut e = ham.energy_of(&config);
    let mut best_e = e;
    let mut best = config.clone();
    let mut trace = Vec::new();
    let mut proposal = ProposalState::new(PI, 100);

    for &beta in betas {
        for _ in 0..schedule.sweeps_per_beta {
            for _ in 0..n {
                let site = rng.random_range(0..n);
                let moved = metropolis_update_beta(
                    &mut config,
                    ham,
                    site,
                    &mut rng,
                    proposal.cone_angle,
                    beta,
                );
                proposal.record(moved.is_some());
                if let Some(d) = moved {
                    e += d;
                    if e < best_e {
                        best_e = e;
                        best.clone_from(&config);
                    }
                }
                let site = rng.random_range(0..n);
                overrelaxation_update(&mut config, ham, site, &mut rng);
            }
            e = ham.energy_of(&config);
            if schedule.record_trace {
                trace.push(e);
            }
        }
    }
    // the incremental energy can drift slightly below the true value
    best_e = best_e.min(ham.energy_of(&best));
    let recorded_min = best_e.min(e);

    let (p_best, e_best) = polished(ham, best);
    let (p_last, e_last) = polished(ham, config);
    let (config, polished) = if e_last < e_best {
        (p_last, e_last)
    } else {
        (p_best, e_best)
    };
    RestartResult {
        polished,
        config,
        recorded_min,
        trace,
    }
}

fn polished(
    ham: &ClassicalHamiltonian,
    mut config: RotatorConfiguration,
) -> (RotatorConfiguration, f64) {
    let e = polish(ham, &mut config);
    (config, e)
}

/// Aligns every rotator with its local field, sweep after sweep, until a
/// sweep lowers the energy by less than `1e-12`. Never raises the energy.
/// Returns the final energy.
pub fn polish(ham: &ClassicalHamiltonian, config: &mut RotatorConfiguration) -> f64 {
    let mut e = ham.energy_of(config);
    for _ in 0..POLISH_MAX_SWEEPS {
        for site in 0..config.len() {
            align(ham, config, site);
        }
        let e_new = ham.energy_of(config);
        let gain = e - e_new;
        e = e_new;
        if gain < POLISH_TOL {
            break;
        }
    }
    e
}

fn align(ham: &ClassicalHamiltonian, config: &mut RotatorConfiguration, site: usize) {
    let h = ham.local_field(config, site);
    if let Some(u) = vec3::normalized(&h) {
        if vec3::norm(&h) > 1e-12 {
            config.set(site, u);
        }
    }
}

/// Result of the dense-grid oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactBound {
    pub value: f64,
    pub config: RotatorConfiguration,
    /// Every start reaching the minimum moved some rotator by more than one grid cell.
    pub coarse: bool,
}

/// `resolution` quasi-uniform points on the unit sphere.
pub fn fibonacci_sphere(resolution: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let m = resolution as f64;
    (0..resolution)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [rho * phi.cos(), rho * phi.sin(), z]
        })
        .collect()
}

/// Global minimum of `W_cl` for rings of at most three sites: the first
/// `N - 1` rotators range over a Fibonacci grid of `resolution` points each,
/// the last one is aligned with its local field, and every grid point is
/// polished. `coarse` is set when every start that reaches the minimum
/// travelled more than one grid cell while polishing.
pub fn exact_bound_small(
    coefficients: &[f64],
    set: &ObservableSet,
    resolution: usize,
) -> Result<ExactBound> {
    let n = set.n_sites();
    if n > 3 {
        return Err(Error::Config(format!(
            "the grid oracle handles at most 3 sites, got {n}"
        )));
    }
    if resolution < 4 {
        return Err(Error::Config("grid resolution must be at least 4".into()));
    }
    let ham = witness_hamiltonian(coefficients, set)?;
    let grid = fibonacci_sphere(resolution);
    let cell = (4.0 * PI / resolution as f64).sqrt();
    let free = n - 1;
    let total = resolution.pow(free as u32);

    let start_config = |idx: usize| {
        let mut k = idx;
        let mut vecs = Vec::with_capacity(n);
        for _ in 0..free {
            vecs.push(grid[k % resolution]);
            k /= resolution;
        }
        vecs.push([0.0, 0.0, 1.0]);
        let mut config = RotatorConfiguration::new(vecs).expect("unit grid points");
        align(&ham, &mut config, n - 1);
        config
    };
    let travel = |a: &RotatorConfiguration, b: &RotatorConfiguration| {
        (0..free)
            .map(|i| vec3::dot(&a.get(i), &b.get(i)).clamp(-1.0, 1.0).acos())
            .fold(0.0, f64::max)
    };
    let runs: Vec<(f64, f64)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let start = start_config(idx);
            let mut config = start.clone();
            let e = polish(&ham, &mut config);
            (e, travel(&config, &start))
        })
        .collect();

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 < runs[best].0 {
            best = i;
        }
    }
    let value = runs[best].0;
    let tie = 1e-9 * (1.0 + value.abs());
    let coarse = runs
        .iter()
        .filter(|r| r.0 <= value + tie)
        .map(|r| r.1)
        .fold(f64::INFINITY, f64::min)
        > cell;
    let mut config = start_config(best);
    polish(&ham, &mut config);
    Ok(ExactBound {
        value,
        config,
        coarse,
    })
}
