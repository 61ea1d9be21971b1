//! Observables, quantum datasets, rotator configurations and the classical
//! rotator Hamiltonian `H(n) = -sum_a K_a A_a(n)`.
//!
//! Every observable is a translation-orbit sum on a periodic ring of `N`
//! sites. A pair correlator at distance `r` sums `n_i . n_{i+r}` (or a single
//! Cartesian component of it) over `i = 0..N` when `2r < N`, and over
//! `i = 0..N/2` when `2r == N`, so every unordered pair of sites at that
//! distance appears exactly once.

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    /// `x + y + z`, used for SU(2)-symmetric correlators.
    Iso,
}

impl Axis {
    pub const CARTESIAN: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Cartesian component index, `None` for [`Axis::Iso`].
    pub fn component(self) -> Option<usize> {
        match self {
            Axis::X => Some(0),
            Axis::Y => Some(1),
            Axis::Z => Some(2),
            Axis::Iso => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::Iso => "iso",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            "iso" => Ok(Axis::Iso),
            other => Err(Error::InvalidData(format!("unknown axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Field,
    Pair,
}

impl ObservableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservableKind::Field => "field",
            ObservableKind::Pair => "pair",
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "field" => Ok(ObservableKind::Field),
            "pair" | "pair-correlator" => Ok(ObservableKind::Pair),
            other => Err(Error::InvalidData(format!(
                "unknown observable kind '{other}'"
            ))),
        }
    }
}

/// One extensive, translation-invariant observable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub label: String,
    pub kind: ObservableKind,
    pub axis: Axis,
    /// Lattice offset; 0 for fields.
    pub distance: usize,
}

impl ObservableSpec {
    pub fn field(axis: Axis) -> Self {
        ObservableSpec {
            label: format!("m_{axis}"),
            kind: ObservableKind::Field,
            axis,
            distance: 0,
        }
    }

    pub fn pair(axis: Axis, distance: usize) -> Self {
        let label = match axis {
            Axis::Iso => format!("C({distance})"),
            a => format!("C_{a}({distance})"),
        };
        ObservableSpec {
            label,
            kind: ObservableKind::Pair,
            axis,
            distance,
        }
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidObservable {
                label: self.label.clone(),
                reason,
            })
        };
        match self.kind {
            ObservableKind::Field => {
                if self.distance != 0 {
                    return bad("fields must have distance 0".into());
                }
                if self.axis == Axis::Iso {
                    return bad("axis iso is only allowed for pair correlators".into());
                }
            }
            ObservableKind::Pair => {
                if self.distance == 0 || 2 * self.distance > n_sites {
                    return bad(format!(
                        "distance {} outside 1..={} for {} sites",
                        self.distance,
                        n_sites / 2,
                        n_sites
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of terms in the translation orbit.
    pub fn orbit_terms(&self, n_sites: usize) -> usize {
        match self.kind {
            ObservableKind::Field => n_sites,
            ObservableKind::Pair => pair_terms(n_sites, self.distance),
        }
    }

    /// Largest admissible magnitude of a single orbit term.
    pub fn term_bound(&self) -> f64 {
        if self.axis == Axis::Iso {
            3.0
        } else {
            1.0
        }
    }
}

#[inline]
fn pair_terms(n_sites: usize, distance: usize) -> usize {
    if 2 * distance == n_sites {
        n_sites / 2
    } else {
        n_sites
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Field(usize),
    Pair {
        distance_slot: usize,
        component: Option<usize>,
    },
}

/// A validated list of observables on a ring of `n_sites` sites.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    n_sites: usize,
    observables: Vec<ObservableSpec>,
    distances: Vec<usize>,
    slots: Vec<Slot>,
}

impl PartialEq for ObservableSet {
    fn eq(&self, other: &Self) -> bool {
        self.n_sites == other.n_sites && self.observables == other.observables
    }
}

impl ObservableSet {
    pub fn new(n_sites: usize, observables: Vec<ObservableSpec>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidData("a ring needs at least one site".into()));
        }
        for obs in &observables {
            obs.validate(n_sites)?;
        }
        let mut distances: Vec<usize> = observables
            .iter()
            .filter(|o| o.kind == ObservableKind::Pair)
            .map(|o| o.distance)
            .collect();
        distances.sort_unstable();
        distances.dedup();
        let slots = observables
            .iter()
            .map(|o| match o.kind {
                ObservableKind::Field => Slot::Field(o.axis.component().expect("validated")),
                ObservableKind::Pair => Slot::Pair {
                    distance_slot: distances.binary_search(&o.distance).expect("collected"),
                    component: o.axis.component(),
                },
            })
            .collect();
        Ok(ObservableSet {
            n_sites,
            observables,
            distances,
            slots,
        })
    }

    /// Iso correlators at distances `1..=r_max`.
    pub fn heisenberg(n_sites: usize, r_max: usize) -> Result<Self> {
        Self::new(
            n_sites,
            (1..=r_max)
                .map(|r| ObservableSpec::pair(Axis::Iso, r))
                .collect(),
        )
    }

    /// Field along x plus per-axis correlators at distances `1..=r_max`.
    pub fn ising(n_sites: usize, r_max: usize) -> Result<Self> {
        let mut obs = vec![ObservableSpec::field(Axis::X)];
        for r in 1..=r_max {
            for axis in Axis::CARTESIAN {
                obs.push(ObservableSpec::pair(axis, r));
            }
        }
        Self::new(n_sites, obs)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn observables(&self) -> &[ObservableSpec] {
        &self.observables
    }

    pub fn get(&self, index: usize) -> &ObservableSpec {
        &self.observables[index]
    }

    pub fn max_distance(&self) -> usize {
        self.distances.last().copied().unwrap_or(0)
    }

    pub fn position(&self, kind: ObservableKind, axis: Axis, distance: usize) -> Option<usize> {
        self.observables
            .iter()
            .position(|o| o.kind == kind && o.axis == axis && o.distance == distance)
    }

    pub fn orbit_terms(&self) -> Vec<usize> {
        self.observables
            .iter()
            .map(|o| o.orbit_terms(self.n_sites))
            .collect()
    }

    fn check_config(&self, config: &RotatorConfiguration) -> Result<()> {
        if config.len() != self.n_sites {
            return Err(Error::ShapeMismatch {
                what: "rotator configuration sites",
                expected: self.n_sites,
                actual: config.len(),
            });
        }
        Ok(())
    }

    /// Evaluates every observable on `config` into `out`. Cost is
    /// `O(N * distinct distances)`.
    pub fn measure_into(&self, config: &RotatorConfiguration, out: &mut [f64]) {
        debug_assert_eq!(config.len(), self.n_sites);
        debug_assert_eq!(out.len(), self.observables.len());
        let n = self.n_sites;
        let v = &config.vectors;
        let mut magnetization = [0.0; 3];
        for s in v {
            magnetization[0] += s[0];
            magnetization[1] += s[1];
            magnetization[2] += s[2];
        }
        // per-distance, per-component orbit sums; few distances, so a small vec
        let mut pair_sums = vec![[0.0; 3]; self.distances.len()];
        for (slot, &r) in self.distances.iter().enumerate() {
            let terms = pair_terms(n, r);
            let mut acc = [0.0; 3];
            for i in 0..terms {
                let a = &v[i];
                let b = &v[(i + r) % n];
                acc[0] += a[0] * b[0];
                acc[1] += a[1] * b[1];
                acc[2] += a[2] * b[2];
            }
            pair_sums[slot] = acc;
        }
        for (o, slot) in out.iter_mut().zip(&self.slots) {
            *o = match *slot {
                Slot::Field(c) => magnetization[c],
                Slot::Pair {
                    distance_slot,
                    component: Some(c),
                } => pair_sums[distance_slot][c],
                Slot::Pair {
                    distance_slot,
                    component: None,
                } => {
                    let s = pair_sums[distance_slot];
                    s[0] + s[1] + s[2]
                }
            };
        }
    }

    pub fn measure(&self, config: &RotatorConfiguration) -> Result<Vec<f64>> {
        self.check_config(config)?;
        let mut out = vec![0.0; self.len()];
        self.measure_into(config, &mut out);
        Ok(out)
    }
}

/// Symmetry class declared by a dataset; it licenses assumptions about
/// observables that were not measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    /// Spin-rotation invariant: zero fields, axis-isotropic diagonal correlators.
    Su2,
    /// Transverse-field Ising: only `m_x` may be non-zero, correlators diagonal in the axes.
    Ising,
}

impl Symmetry {
    pub fn as_str(self) -> &'static str {
        match self {
            Symmetry::None => "none",
            Symmetry::Su2 => "su2",
            Symmetry::Ising => "ising",
        }
    }
}

impl FromStr for Symmetry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(Symmetry::None),
            "su2" => Ok(Symmetry::Su2),
            "ising" => Ok(Symmetry::Ising),
            other => Err(Error::InvalidData(format!("unknown symmetry '{other}'"))),
        }
    }
}

/// Ordered free-form provenance (`key=value`, no whitespace in either).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata(Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Replaces an existing key in place, otherwise appends.
    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.0.push((key, value)),
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.set(key, value);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Measured expectation values ("quantum data").
///
/// Values are stored per orbit term (the correlator of one pair, or the
/// magnetization of one site) as they appear at I/O boundaries;
/// [`QuantumDataset::values`] returns the extensive orbit sums used by the
/// algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumDataset {
    set: ObservableSet,
    per_term: Vec<f64>,
    uncertainty_per_term: Vec<f64>,
    metadata: Metadata,
}

impl QuantumDataset {
    pub fn new(
        set: ObservableSet,
        per_term: Vec<f64>,
        uncertainty_per_term: Vec<f64>,
        metadata: Metadata,
    ) -> Result<Self> {
        for (what, len) in [
            ("values", per_term.len()),
            ("uncertainties", uncertainty_per_term.len()),
        ] {
            if len != set.len() {
                return Err(Error::ShapeMismatch {
                    what,
                    expected: set.len(),
                    actual: len,
                });
            }
        }
        for (i, obs) in set.observables().iter().enumerate() {
            let v = per_term[i];
            let u = uncertainty_per_term[i];
            if !v.is_finite() || v.abs() > obs.term_bound() + 1e-9 {
                return Err(Error::InvalidData(format!(
                    "{}: per-site value {v} outside [-{b}, {b}]",
                    obs.label,
                    b = obs.term_bound()
                )));
            }
            if !u.is_finite() || u < 0.0 {
                return Err(Error::InvalidData(format!(
                    "{}: uncertainty {u} must be finite and non-negative",
                    obs.label
                )));
            }
        }
        if let Some(s) = metadata.get("symmetry") {
            s.parse::<Symmetry>()?;
        }
        Ok(QuantumDataset {
            set,
            per_term,
            uncertainty_per_term,
            metadata,
        })
    }

    /// Builds a dataset from extensive (orbit-sum) values.
    pub fn from_extensive(
        set: ObservableSet,
        values: &[f64],
        uncertainties: &[f64],
        metadata: Metadata,
    ) -> Result<Self> {
        let terms = set.orbit_terms();
        if values.len() != terms.len() || uncertainties.len() != terms.len() {
            return Err(Error::ShapeMismatch {
                what: "extensive values",
                expected: terms.len(),
                actual: values.len().min(uncertainties.len()),
            });
        }
        let per_term = values
            .iter()
            .zip(&terms)
            .map(|(v, &t)| v / t as f64)
            .collect();
        let unc = uncertainties
            .iter()
            .zip(&terms)
            .map(|(v, &t)| v / t as f64)
            .collect();
        Self::new(set, per_term, unc, metadata)
    }

    pub fn set(&self) -> &ObservableSet {
        &self.set
    }

    pub fn n_sites(&self) -> usize {
        self.set.n_sites()
    }

    pub fn observables(&self) -> &[ObservableSpec] {
        self.set.observables()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Extensive orbit-sum values.
    pub fn values(&self) -> Vec<f64> {
        self.per_term
            .iter()
            .zip(self.set.orbit_terms())
            .map(|(v, t)| v * t as f64)
            .collect()
    }

    /// Extensive uncertainties (per-term uncertainty times orbit length).
    pub fn uncertainties(&self) -> Vec<f64> {
        self.uncertainty_per_term
            .iter()
            .zip(self.set.orbit_terms())
            .map(|(v, t)| v * t as f64)
            .collect()
    }

    pub fn per_site_values(&self) -> &[f64] {
        &self.per_term
    }

    pub fn per_site_uncertainties(&self) -> &[f64] {
        &self.uncertainty_per_term
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.metadata
    }

    pub fn symmetry(&self) -> Symmetry {
        self.metadata
            .get("symmetry")
            .and_then(|s| s.parse().ok())
            .unwrap_or_default()
    }

    /// Per-term value of the observable matching `(kind, axis, distance)`.
    pub fn lookup(&self, kind: ObservableKind, axis: Axis, distance: usize) -> Option<f64> {
        self.set
            .position(kind, axis, distance)
            .map(|i| self.per_term[i])
    }
}

/// `N` unit Bloch vectors, one per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec3>", into = "Vec<Vec3>")]
pub struct RotatorConfiguration {
    vectors: Vec<Vec3>,
}

impl RotatorConfiguration {
    /// Normalizes every vector; zero or non-finite vectors are rejected.
    pub fn new(vectors: Vec<Vec3>) -> Result<Self> {
        let vectors = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                vec3::normalized(v).ok_or_else(|| {
                    Error::InvalidData(format!("rotator {i} has zero or non-finite length"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RotatorConfiguration { vectors })
    }

    pub fn uniform(n_sites: usize, direction: Vec3) -> Self {
        let d = vec3::normalized(&direction).expect("direction must be non-zero");
        RotatorConfiguration {
            vectors: vec![d; n_sites],
        }
    }

    pub fn random<R: Rng + ?Sized>(n_sites: usize, rng: &mut R) -> Self {
        RotatorConfiguration {
            vectors: (0..n_sites).map(|_| vec3::random_unit(rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    pub fn get(&self, site: usize) -> Vec3 {
        self.vectors[site]
    }

    /// Stores `v / |v|` at `site`.
    pub fn set(&mut self, site: usize, v: Vec3) {
        self.vectors[site] = vec3::normalized(&v).expect("rotator must be non-zero");
    }

    /// Configuration translated by `shift` sites: site `i` takes the vector of `i + shift`.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.vectors.len();
        RotatorConfiguration {
            vectors: (0..n).map(|i| self.vectors[(i + shift) % n]).collect(),
        }
    }

    pub fn max_norm_error(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| (vec3::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Vec3>> for RotatorConfiguration {
    type Error = Error;
    fn try_from(vectors: Vec<Vec3>) -> Result<Self> {
        Self::new(vectors)
    }
}

impl From<RotatorConfiguration> for Vec<Vec3> {
    fn from(c: RotatorConfiguration) -> Self {
        c.vectors
    }
}

/// Couplings `K_a`, aligned index-for-index with an [`ObservableSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector(Vec<f64>);

impl CouplingVector {
    pub fn new(couplings: Vec<f64>) -> Result<Self> {
        if let Some(i) = couplings.iter().position(|k| !k.is_finite()) {
            return Err(Error::InvalidData(format!("coupling {i} is not finite")));
        }
        Ok(CouplingVector(couplings))
    }

    pub fn zeros(len: usize) -> Self {
        CouplingVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|k| k * k).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone)]
struct Bond {
    distance: usize,
    coupling: Vec3,
    half_orbit: bool,
}

/// `H(n) = -sum_a K_a A_a(n)`, compiled into a uniform field and per-distance
/// anisotropic bond couplings for O(bonds) local updates.
#[derive(Debug, Clone)]
pub struct ClassicalHamiltonian {
    set: ObservableSet,
    couplings: CouplingVector,
    field: Vec3,
    bonds: Vec<Bond>,
}

impl ClassicalHamiltonian {
    pub fn new(set: ObservableSet, couplings: CouplingVector) -> Result<Self> {
        if couplings.len() != set.len() {
            return Err(Error::ShapeMismatch {
                what: "couplings",
                expected: set.len(),
                actual: couplings.len(),
            });
        }
        let n = set.n_sites();
        let mut field = [0.0; 3];
        let mut bonds: Vec<Bond> = set
            .distances
            .iter()
            .map(|&r| Bond {
                distance: r,
                coupling: [0.0; 3],
                half_orbit: 2 * r == n,
            })
            .collect();
        for (k, slot) in couplings.as_slice().iter().zip(&set.slots) {
            match *slot {
                Slot::Field(c) => field[c] += k,
                Slot::Pair {
                    distance_slot,
                    component: Some(c),
                } => bonds[distance_slot].coupling[c] += k,
                Slot::Pair {
                    distance_slot,
                    component: None,
                } => {
                    for c in 0..3 {
                        bonds[distance_slot].coupling[c] += k;
                    }
                }
            }
        }
        Ok(ClassicalHamiltonian {
            set,
            couplings,
            field,
            bonds,
        })
    }

    pub fn zero(set: ObservableSet) -> Self {
        let len = set.len();
        Self::new(set, CouplingVector::zeros(len)).expect("shapes agree")
    }

    pub fn set(&self) -> &ObservableSet {
        &self.set
    }

    pub fn couplings(&self) -> &CouplingVector {
        &self.couplings
    }

    pub fn n_sites(&self) -> usize {
        self.set.n_sites()
    }

    /// Local field `h_i = -dH/dn_i`. `H` is linear in each rotator, so
    /// `H = -h_i . n_i + (terms without n_i)`.
    #[inline]
    pub fn local_field(&self, config: &RotatorConfiguration, site: usize) -> Vec3 {
        let n = config.vectors.len();
        let v = &config.vectors;
        let mut h = self.field;
        for bond in &self.bonds {
            let j = &v[(site + bond.distance) % n];
            let mut s = *j;
            if !bond.half_orbit {
                let k = &v[(site + n - bond.distance) % n];
                s = [s[0] + k[0], s[1] + k[1], s[2] + k[2]];
            }
            h[0] += bond.coupling[0] * s[0];
            h[1] += bond.coupling[1] * s[1];
            h[2] += bond.coupling[2] * s[2];
        }
        h
    }

    /// Energy from the compiled couplings, without shape checks.
    pub fn energy_of(&self, config: &RotatorConfiguration) -> f64 {
        let n = config.vectors.len();
        let v = &config.vectors;
        let mut e = 0.0;
        for s in v {
            e -= vec3::dot(&self.field, s);
        }
        for bond in &self.bonds {
            let terms = pair_terms(n, bond.distance);
            let j = bond.coupling;
            for i in 0..terms {
                let a = &v[i];
                let b = &v[(i + bond.distance) % n];
                e -= j[0] * a[0] * b[0] + j[1] * a[1] * b[1] + j[2] * a[2] * b[2];
            }
        }
        e
    }

    #[inline]
    pub(crate) fn delta_energy(
        &self,
        config: &RotatorConfiguration,
        site: usize,
        proposed: &Vec3,
    ) -> f64 {
        let h = self.local_field(config, site);
        let old = config.vectors[site];
        -vec3::dot(&h, &vec3::sub(proposed, &old))
    }
}

/// Orbit-sum value `A(config)` of a single observable.
pub fn evaluate_observable(config: &RotatorConfiguration, obs: &ObservableSpec) -> Result<f64> {
    let n = config.len();
    obs.validate(n)?;
    let v = config.vectors();
    Ok(match obs.kind {
        ObservableKind::Field => {
            let c = obs.axis.component().expect("validated");
            v.iter().map(|s| s[c]).sum()
        }
        ObservableKind::Pair => {
            let r = obs.distance;
            (0..pair_terms(n, r))
                .map(|i| {
                    let a = &v[i];
                    let b = &v[(i + r) % n];
                    match obs.axis.component() {
                        Some(c) => a[c] * b[c],
                        None => vec3::dot(a, b),
                    }
                })
                .sum()
        }
    })
}

/// `H(config) = -sum_a K_a A_a(config)`.
pub fn energy(config: &RotatorConfiguration, hamiltonian: &ClassicalHamiltonian) -> Result<f64> {
    hamiltonian.set.check_config(config)?;
    let mut e = 0.0;
    for (obs, k) in hamiltonian
        .set
        .observables()
        .iter()
        .zip(hamiltonian.couplings.as_slice())
    {
        e -= k * evaluate_observable(config, obs)?;
    }
    Ok(e)
}

/// `H(config with site replaced) - H(config)`, in O(bonds) time.
pub fn local_energy_change(
    config: &RotatorConfiguration,
    hamiltonian: &ClassicalHamiltonian,
    site: usize,
    proposed: &Vec3,
) -> Result<f64> {
    hamiltonian.set.check_config(config)?;
    if site >= config.len() {
        return Err(Error::SiteOutOfRange {
            site,
            n_sites: config.len(),
        });
    }
    let p = vec3::normalized(proposed)
        .ok_or_else(|| Error::InvalidData("proposed rotator has zero length".into()))?;
    Ok(hamiltonian.delta_energy(config, site, &p))
}
