//! Decides whether measured one- and two-qubit expectation values of a
//! translation-invariant qubit ring can be reproduced by a fully separable
//! state, and builds the optimal entanglement witness when they cannot.
//!
//! Separable states of `N` qubits are Boltzmann distributions over classical
//! rotators (unit Bloch vectors). Fitting the couplings of that classical
//! model to the quantum data is a convex maximum-entropy problem, solved here
//! with Nesterov-accelerated gradient descent on Monte Carlo moments. A
//! gradient that cannot be driven to zero certifies entanglement, and its
//! direction (or the runaway couplings) defines the witness, whose separable
//! bound is the ground-state energy of a classical rotator chain.
//!
//! Module map:
//!
//! * [`model`]: observables, datasets, rotator configurations, classical Hamiltonian.
//! * [`sampler`]: Metropolis + overrelaxation Monte Carlo with binned error bars.
//! * [`solver`]: the accelerated inverse solver and its verdict.
//! * [`witness`]: witness construction, evaluation and noise robustness.
//! * [`anneal`]: separable bounds by simulated annealing, plus a small-N exact oracle.
//! * [`quantum`]: exact diagonalization data and reference criteria (PIEW, concurrence, QFI).
//! * [`io`]: CSV/JSON file formats.

pub mod anneal;
pub mod error;
pub mod io;
pub mod model;
pub mod quantum;
pub mod sampler;
pub mod solver;
pub mod stats;
pub mod vec3;
pub mod witness;

pub use anneal::{exact_bound_small, separable_bound, AnnealOutcome, AnnealSchedule, ExactBound};
pub use error::{Error, Result};
pub use model::{
    energy, evaluate_observable, local_energy_change, Axis, ClassicalHamiltonian, CouplingVector,
    Metadata, ObservableKind, ObservableSet, ObservableSpec, QuantumDataset, RotatorConfiguration,
    Symmetry,
};
pub use quantum::{
    concurrence, ed_dataset, piew_value, qfi, PiewReport, SpinModel, SpinModelSpec, ThermalState,
};
pub use sampler::{estimate_moments, MomentEstimate, Sampler, SamplerConfig};
pub use solver::{
    fit_separable, fit_separable_with, gradient, FitConfig, FitRecord, FitTrajectory, FitVerdict,
    Verdict,
};
pub use witness::{
    evaluate_witness, witness_from_couplings, witness_from_gradient, witness_optimality_check,
    OptimalityCheck, WitnessMode, WitnessReport,
};
