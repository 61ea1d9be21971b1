//! Desk-scale quantum data and reference entanglement criteria.
//!
//! [`ed_dataset`] diagonalizes the spin-1/2 Heisenberg or transverse-field
//! Ising ring exactly and returns thermal correlators in the dataset
//! convention. The criteria ([`piew_value`], [`concurrence`], [`qfi`]) are
//! the standard alternatives the data-driven witness is compared with.

mod criteria;
mod ed;

pub use criteria::{concurrence, piew_value, qfi, PiewReport};
pub use ed::{ed_dataset, SpinModel, SpinModelSpec, ThermalState, MAX_ED_SITES};
