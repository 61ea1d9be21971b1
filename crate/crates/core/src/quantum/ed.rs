use crate::error::{Error, Result};
use crate::model::{Axis, Metadata, ObservableKind, ObservableSet, QuantumDataset};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const MAX_ED_SITES: usize = 14;
/// Eigenstates with smaller Boltzmann weight are dropped from the state.
const WEIGHT_CUTOFF: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinModel {
    /// `H = J sum_i S_i . S_{i+1}`.
    #[serde(alias = "heisenberg")]
    HeisenbergXxx,
    /// `H = -J sum_i (S^z_i S^z_{i+1} + g S^x_i)`.
    #[serde(alias = "ising")]
    TransverseFieldIsing,
}

impl SpinModel {
    pub fn as_str(self) -> &'static str {
        match self {
            SpinModel::HeisenbergXxx => "heisenberg",
            SpinModel::TransverseFieldIsing => "ising",
        }
    }
}

impl fmt::Display for SpinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heisenberg" | "heisenberg_xxx" => Ok(SpinModel::HeisenbergXxx),
            "ising" | "transverse_field_ising" => Ok(SpinModel::TransverseFieldIsing),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinModelSpec {
    pub model: SpinModel,
    pub n_sites: usize,
    /// `T / J`.
    pub temperature: f64,
    /// Transverse field, Ising only.
    pub g: f64,
    pub r_max: usize,
    /// Per-site uncertainty attached to every generated value.
    pub uncertainty_floor: f64,
}

impl SpinModelSpec {
    pub fn heisenberg(n_sites: usize, temperature: f64, r_max: usize) -> Self {
        SpinModelSpec {
            model: SpinModel::HeisenbergXxx,
            n_sites,
            temperature,
            g: 0.0,
            r_max,
            uncertainty_floor: 1e-4,
        }
    }

    pub fn ising(n_sites: usize, temperature: f64, g: f64, r_max: usize) -> Self {
        SpinModelSpec {
            model: SpinModel::TransverseFieldIsing,
            g,
            ..Self::heisenberg(n_sites, temperature, r_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites > MAX_ED_SITES {
            return Err(Error::DimensionOverflow {
                n_sites: self.n_sites,
                max: MAX_ED_SITES,
            });
        }
        if self.n_sites < 2 {
            return Err(Error::Config(
                "exact diagonalization needs at least 2 sites".into(),
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.r_max == 0 || 2 * self.r_max > self.n_sites {
            return Err(Error::Config(format!(
                "r_max must lie in 1..={}",
                self.n_sites / 2
            )));
        }
        if !self.g.is_finite() || !(self.uncertainty_floor >= 0.0) {
            return Err(Error::Config(
                "g and uncertainty_floor must be finite, floor >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Observables reported for this model.
    pub fn observables(&self) -> Result<ObservableSet> {
        match self.model {
            SpinModel::HeisenbergXxx => ObservableSet::heisenberg(self.n_sites, self.r_max),
            SpinModel::TransverseFieldIsing => ObservableSet::ising(self.n_sites, self.r_max),
        }
    }
}

#[inline]
fn z_sign(state: usize, site: usize) -> f64 {
    if state >> site & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Ring bonds at distance 1, each unordered pair once.
fn bonds(n: usize) -> Vec<(usize, usize)> {
    let terms = if n == 2 { 1 } else { n };
    (0..terms).map(|i| (i, (i + 1) % n)).collect()
}

fn hamiltonian(spec: &SpinModelSpec) -> DMatrix<f64> {
    let n = spec.n_sites;
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let bonds = bonds(n);
    for s in 0..dim {
        for &(i, j) in &bonds {
            let zz = z_sign(s, i) * z_sign(s, j);
            let t = s ^ (1 << i) ^ (1 << j);
            match spec.model {
                SpinModel::HeisenbergXxx => {
                    h[(s, s)] += 0.25 * zz;
                    // (xx + yy) / 4 connects antiparallel pairs with 1/2
                    if zz < 0.0 {
                        h[(t, s)] += 0.5;
                    }
                }
                SpinModel::TransverseFieldIsing => h[(s, s)] -= 0.25 * zz,
            }
        }
        if spec.model == SpinModel::TransverseFieldIsing {
            for i in 0..n {
                h[(s ^ (1 << i), s)] -= 0.5 * spec.g;
            }
        }
    }
    h
}

/// A mixture `sum_n p_n |v_n><v_n|` of real states, stored on its support.
#[derive(Debug, Clone)]
pub struct ThermalState {
    n_sites: usize,
    energies: Vec<f64>,
    /// Columns are the states `v_n`.
    vectors: DMatrix<f64>,
    weights: Vec<f64>,
}

impl ThermalState {
    /// Gibbs state of `spec` by dense diagonalization.
    pub fn thermal(spec: &SpinModelSpec) -> Result<Self> {
        spec.validate()?;
        let eig = SymmetricEigen::new(hamiltonian(spec));
        let e0 = eig.eigenvalues.min();
        let boltz: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|e| (-(e - e0) / spec.temperature).exp())
            .collect();
        let z: f64 = boltz.iter().sum();
        let keep: Vec<usize> = (0..boltz.len())
            .filter(|&k| boltz[k] / z > WEIGHT_CUTOFF)
            .collect();
        let kept: f64 = keep.iter().map(|&k| boltz[k]).sum();
        let vectors = eig.eigenvectors.select_columns(&keep);
        Ok(ThermalState {
            n_sites: spec.n_sites,
            energies: keep.iter().map(|&k| eig.eigenvalues[k]).collect(),
            vectors,
            weights: keep.iter().map(|&k| boltz[k] / kept).collect(),
        })
    }

    /// A pure state given by its real amplitudes in the `sigma^z` basis
    /// (bit `i` of the index set means site `i` points down).
    pub fn from_pure(n_sites: usize, amplitudes: &[f64]) -> Result<Self> {
        let dim = 1usize << n_sites;
        if amplitudes.len() != dim {
            return Err(Error::ShapeMismatch {
                what: "state amplitudes",
                expected: dim,
                actual: amplitudes.len(),
            });
        }
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidData("zero state vector".into()));
        }
        Ok(ThermalState {
            n_sites,
            energies: vec![0.0],
            vectors: DMatrix::from_columns(&[v / norm]),
            weights: vec![1.0],
        })
    }

    pub fn maximally_mixed(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        ThermalState {
            n_sites,
            energies: vec![0.0; dim],
            vectors: DMatrix::identity(dim, dim),
            weights: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub(crate) fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    fn mix(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.weights
            .iter()
            .zip(self.vectors.column_iter())
            .map(|(p, v)| p * f(v.as_slice()))
            .sum()
    }

    /// `<sigma^a_i>`.
    pub fn field(&self, axis: Axis, i: usize) -> f64 {
        match axis {
            Axis::X => self.mix(|v| (0..v.len()).map(|s| v[s] * v[s ^ (1 << i)]).sum()),
            Axis::Z => self.mix(|v| (0..v.len()).map(|s| v[s] * v[s] * z_sign(s, i)).sum()),
            // imaginary operator, real states
            Axis::Y => 0.0,
            Axis::Iso => f64::NAN,
        }
    }

    /// `<sigma^a_i sigma^a_j>`, or the sum over the three axes for iso.
    pub fn pair(&self, axis: Axis, i: usize, j: usize) -> f64 {
        let mask = (1 << i) | (1 << j);
        match axis {
            Axis::X => self.mix(|v| (0..v.len()).map(|s| v[s] * v[s ^ mask]).sum()),
            Axis::Y => self.mix(|v| {
                (0..v.len())
                    .map(|s| -z_sign(s, i) * z_sign(s, j) * v[s] * v[s ^ mask])
                    .sum()
            }),
            Axis::Z => self.mix(|v| {
                (0..v.len())
                    .map(|s| z_sign(s, i) * z_sign(s, j) * v[s] * v[s])
                    .sum()
            }),
            Axis::Iso => Axis::CARTESIAN.iter().map(|&a| self.pair(a, i, j)).sum(),
        }
    }

    /// Per-term values of every observable in `set`, averaged over the orbit.
    pub fn expectations(&self, set: &ObservableSet) -> Result<Vec<f64>> {
        if set.n_sites() != self.n_sites {
            return Err(Error::ShapeMismatch {
                what: "observable set sites",
                expected: self.n_sites,
                actual: set.n_sites(),
            });
        }
        let n = self.n_sites;
        Ok(set
            .observables()
            .iter()
            .map(|o| {
                let terms = o.orbit_terms(n);
                let total: f64 = (0..terms)
                    .map(|i| match o.kind {
                        ObservableKind::Field => self.field(o.axis, i),
                        ObservableKind::Pair => self.pair(o.axis, i, (i + o.distance) % n),
                    })
                    .sum();
                total / terms as f64
            })
            .collect())
    }

    /// Applies the real part `M` of the collective spin `J_a = sum_i sigma^a_i / 2`
    /// (`J_a = M` for x, z and `J_y = i M`) to `v`.
    pub(crate) fn apply_collective(&self, axis: Axis, v: &[f64], out: &mut [f64]) {
        let n = self.n_sites;
        for (s, o) in out.iter_mut().enumerate() {
            *o = 0.0;
            for i in 0..n {
                let t = s ^ (1 << i);
                *o += match axis {
                    Axis::X => 0.5 * v[t],
                    Axis::Z => 0.5 * z_sign(s, i) * v[s],
                    // sigma^y = i a with a|0> = |1>, a|1> = -|0>
                    Axis::Y => -0.5 * z_sign(s, i) * v[t],
                    Axis::Iso => f64::NAN,
                };
            }
        }
    }

    /// `<J_a^2>`.
    pub fn collective_second_moment(&self, axis: Axis) -> f64 {
        let mut buf = vec![0.0; self.vectors.nrows()];
        self.mix(|v| {
            self.apply_collective(axis, v, &mut buf);
            buf.iter().map(|x| x * x).sum()
        })
    }
}

/// Thermal dataset of `spec`: iso correlators for the Heisenberg ring,
/// `m_x` and per-axis correlators for the Ising ring, `r = 1..=r_max`.
pub fn ed_dataset(spec: &SpinModelSpec) -> Result<QuantumDataset> {
    let state = ThermalState::thermal(spec)?;
    let set = spec.observables()?;
    let values = state.expectations(&set)?;
    let unc = vec![spec.uncertainty_floor; values.len()];
    let mut meta = Metadata::new()
        .with("model", spec.model.as_str())
        .with("temperature", spec.temperature.to_string());
    meta = match spec.model {
        SpinModel::HeisenbergXxx => meta.with("symmetry", "su2"),
        SpinModel::TransverseFieldIsing => {
            meta.with("g", spec.g.to_string()).with("symmetry", "ising")
        }
    };
    meta.set("source", "ed");
    QuantumDataset::new(set, values, unc, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singlet_ground_state() {
        let ds = ed_dataset(&SpinModelSpec::heisenberg(2, 0.01, 1)).unwrap();
        assert!((ds.per_site_values()[0] + 3.0).abs() < 1e-10);
        let st = ThermalState::thermal(&SpinModelSpec::heisenberg(2, 0.01, 1)).unwrap();
        for a in Axis::CARTESIAN {
            assert!((st.pair(a, 0, 1) + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn two_site_closed_form() {
        for t in [0.3, 1.0, 2.5, 10.0] {
            let ds = ed_dataset(&SpinModelSpec::heisenberg(2, t, 1)).unwrap();
            let b = 1.0 / t;
            let expected = (-3.0 * b.exp() + 3.0) / (b.exp() + 3.0);
            assert!((ds.per_site_values()[0] - expected).abs() < 1e-12, "T={t}");
        }
    }

    #[test]
    fn ising_pair_ferromagnet() {
        let ds = ed_dataset(&SpinModelSpec::ising(2, 0.01, 0.0, 1)).unwrap();
        let set = ds.set();
        let z = set.position(ObservableKind::Pair, Axis::Z, 1).unwrap();
        let mx = set.position(ObservableKind::Field, Axis::X, 0).unwrap();
        assert!((ds.per_site_values()[z] - 1.0).abs() < 1e-10);
        assert!(ds.per_site_values()[mx].abs() < 1e-12);
    }

    #[test]
    fn declared_symmetries_hold() {
        let st = ThermalState::thermal(&SpinModelSpec::heisenberg(6, 0.7, 3)).unwrap();
        for i in 0..6 {
            for a in Axis::CARTESIAN {
                assert!(st.field(a, i).abs() < 1e-12);
            }
            for r in 1..=3 {
                let j = (i + r) % 6;
                let x = st.pair(Axis::X, i, j);
                assert!((st.pair(Axis::Y, i, j) - x).abs() < 1e-12);
                assert!((st.pair(Axis::Z, i, j) - x).abs() < 1e-12);
            }
        }
        let st = ThermalState::thermal(&SpinModelSpec::ising(6, 0.5, 0.8, 3)).unwrap();
        for i in 0..6 {
            assert!(st.field(Axis::Z, i).abs() < 1e-12);
            assert!(st.field(Axis::Y, i).abs() < 1e-12);
            assert!(st.field(Axis::X, i) > 0.0);
        }
    }

    #[test]
    fn sum_rule_matches_collective_spin() {
        for spec in [
            SpinModelSpec::heisenberg(6, 1.0, 3),
            SpinModelSpec::ising(6, 0.8, 1.2, 3),
        ] {
            let st = ThermalState::thermal(&spec).unwrap();
            for a in Axis::CARTESIAN {
                let mut total = 0.0;
                for i in 0..6 {
                    for j in 0..6 {
                        total += if i == j { 1.0 } else { st.pair(a, i, j) };
                    }
                }
                let direct = 4.0 * st.collective_second_moment(a);
                assert!((total - direct).abs() < 1e-8, "{a}: {total} vs {direct}");
            }
        }
    }

    #[test]
    fn rejects_oversized_rings() {
        let spec = SpinModelSpec::heisenberg(16, 1.0, 2);
        assert!(matches!(
            ed_dataset(&spec),
            Err(Error::DimensionOverflow { .. })
        ));
    }
}
