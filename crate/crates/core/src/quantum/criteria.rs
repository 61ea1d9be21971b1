use super::ed::ThermalState;
use crate::error::{Error, Result};
use crate::model::{Axis, ObservableKind, QuantumDataset, Symmetry};
use nalgebra::{Complex, DMatrix, Matrix2, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

type C64 = Complex<f64>;

/// Normalized permutationally invariant witness
/// `(N - 1)^{-1/2} sum_a sum_{i != j} sigma^a_i sigma^a_j` (ordered pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiewReport {
    pub n_sites: usize,
    pub value: f64,
    /// `-N / sqrt(N - 1)`.
    pub bound: f64,
    /// `bound - value`; positive when violated.
    pub violation: f64,
}

impl PiewReport {
    pub fn bound_for(n_sites: usize) -> f64 {
        let n = n_sites as f64;
        -n / (n - 1.0).sqrt()
    }
}

/// Per-term diagonal correlator `<sigma^a_i sigma^a_{i+r}>` summed over the
/// three axes, from iso or per-axis entries.
fn iso_term(dataset: &QuantumDataset, r: usize) -> Option<f64> {
    if let Some(v) = dataset.lookup(ObservableKind::Pair, Axis::Iso, r) {
        return Some(v);
    }
    Axis::CARTESIAN
        .iter()
        .map(|&a| dataset.lookup(ObservableKind::Pair, a, r))
        .sum()
}

pub fn piew_value(dataset: &QuantumDataset) -> Result<PiewReport> {
    let n = dataset.n_sites();
    if n < 2 {
        return Err(Error::IncompleteData(
            "the witness needs at least two sites".into(),
        ));
    }
    let mut ordered = 0.0;
    for r in 1..=n / 2 {
        let term = iso_term(dataset, r).ok_or_else(|| {
            Error::IncompleteData(format!("correlators at distance {r} are missing"))
        })?;
        let orbit = if 2 * r == n { n / 2 } else { n };
        ordered += 2.0 * orbit as f64 * term;
    }
    let value = ordered / ((n - 1) as f64).sqrt();
    let bound = PiewReport::bound_for(n);
    Ok(PiewReport {
        n_sites: n,
        value,
        bound,
        violation: bound - value,
    })
}

fn pauli() -> [Matrix2<C64>; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Matrix2::new(l, o, o, l),
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Correlation tensor `T[a][b] = <sigma^a (x) sigma^b>` (index 0 is the
/// identity) of a pair at `distance`, with unmeasured entries filled in only
/// where the dataset's symmetry fixes them.
fn pair_tensor(dataset: &QuantumDataset, distance: usize) -> Result<[[f64; 4]; 4]> {
    let sym = dataset.symmetry();
    if sym == Symmetry::None {
        return Err(Error::IncompleteData(
            "cross-axis correlators are not measured and no symmetry is declared".into(),
        ));
    }
    let mut t = [[0.0; 4]; 4];
    t[0][0] = 1.0;
    for (k, &a) in Axis::CARTESIAN.iter().enumerate() {
        let field = match dataset.lookup(ObservableKind::Field, a, 0) {
            Some(v) => v,
            None if sym == Symmetry::Su2 => 0.0,
            None if sym == Symmetry::Ising && a != Axis::X => 0.0,
            None => return Err(Error::IncompleteData(format!("field along {a} is missing"))),
        };
        t[k + 1][0] = field;
        t[0][k + 1] = field;
        let corr = match dataset.lookup(ObservableKind::Pair, a, distance) {
            Some(v) => v,
            None if sym == Symmetry::Su2 => dataset
                .lookup(ObservableKind::Pair, Axis::Iso, distance)
                .map(|v| v / 3.0)
                .ok_or_else(|| {
                    Error::IncompleteData(format!("no correlator at distance {distance}"))
                })?,
            None => {
                return Err(Error::IncompleteData(format!(
                    "correlator {a} at distance {distance} is missing"
                )))
            }
        };
        t[k + 1][k + 1] = corr;
    }
    Ok(t)
}

fn hermitian_eigen(m: Matrix4<C64>) -> (Vec<f64>, Matrix4<C64>) {
    let dm = DMatrix::from_fn(4, 4, |r, c| m[(r, c)]);
    let eig = SymmetricEigen::new(dm);
    let vecs = Matrix4::from_fn(|r, c| eig.eigenvectors[(r, c)]);
    (eig.eigenvalues.iter().copied().collect(), vecs)
}

/// Wootters concurrence of the two-qubit reduced state at `pair_distance`,
/// reconstructed from one- and two-body expectation values.
pub fn concurrence(dataset: &QuantumDataset, pair_distance: usize) -> Result<f64> {
    let t = pair_tensor(dataset, pair_distance)?;
    let p = pauli();
    let mut rho = Matrix4::<C64>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            if t[a][b] != 0.0 {
                rho += kron(&p[a], &p[b]) * C64::new(0.25 * t[a][b], 0.0);
            }
        }
    }
    let (vals, vecs) = hermitian_eigen(rho);
    if let Some(&min) = vals.iter().find(|&&v| v < -1e-8) {
        return Err(Error::InvalidData(format!(
            "reconstructed two-qubit state is not positive (eigenvalue {min:e})"
        )));
    }
    let sqrt_diag = Matrix4::from_diagonal(&nalgebra::Vector4::from_iterator(
        vals.iter().map(|v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    let sqrt_rho = vecs * sqrt_diag * vecs.adjoint();
    let yy = kron(&p[2], &p[2]);
    let tilde = yy * rho.conjugate() * yy;
    let r = sqrt_rho * tilde * sqrt_rho;
    let r = (r + r.adjoint()) * C64::new(0.5, 0.0);
    let (mut lam, _) = hermitian_eigen(r);
    for l in lam.iter_mut() {
        *l = l.max(0.0).sqrt();
    }
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// Quantum Fisher information of `state` for the collective spin
/// `J_a = sum_i sigma^a_i / 2`:
/// `2 sum_{n != m} (p_n - p_m)^2 / (p_n + p_m) |<n|J_a|m>|^2`.
///
/// Eigenstates outside the stored support have zero weight; their terms are
/// summed in closed form through `<n|J_a^2|n>`.
pub fn qfi(state: &ThermalState, axis: Axis) -> f64 {
    if axis == Axis::Iso {
        return f64::NAN;
    }
    let v = state.vectors();
    let p = state.weights();
    let (dim, k) = v.shape();
    let mut jv = DMatrix::<f64>::zeros(dim, k);
    let mut buf = vec![0.0; dim];
    for (c, col) in v.column_iter().enumerate() {
        state.apply_collective(axis, col.as_slice(), &mut buf);
        jv.column_mut(c).copy_from_slice(&buf);
    }
    let jnm = v.transpose() * &jv;
    let mut total = 0.0;
    for n in 0..k {
        let mut inside = 0.0;
        for m in 0..k {
            let o2 = jnm[(n, m)] * jnm[(n, m)];
            inside += o2;
            let s = p[n] + p[m];
            if m != n && s >= 1e-14 {
                total += 2.0 * (p[n] - p[m]).powi(2) / s * o2;
            }
        }
        let second = jv.column(n).norm_squared();
        total += 4.0 * p[n] * (second - inside).max(0.0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Metadata, ObservableSet};

    fn su2_pair(iso: f64) -> QuantumDataset {
        QuantumDataset::new(
            ObservableSet::heisenberg(2, 1).unwrap(),
            vec![iso],
            vec![0.0],
            Metadata::new().with("symmetry", "su2"),
        )
        .unwrap()
    }

    #[test]
    fn piew_bound_closed_form() {
        for n in [2usize, 8, 64] {
            let want = -(n as f64) / ((n - 1) as f64).sqrt();
            assert!((PiewReport::bound_for(n) - want).abs() < 1e-12);
        }
        assert!((PiewReport::bound_for(64) + 8.0633).abs() < 1e-4);
    }

    #[test]
    fn piew_singlet() {
        let r = piew_value(&su2_pair(-3.0)).unwrap();
        assert_eq!(r.value, -6.0);
        assert_eq!(r.bound, -2.0);
        assert_eq!(r.violation, 4.0);
    }

    #[test]
    fn piew_needs_every_distance() {
        let ds = QuantumDataset::new(
            ObservableSet::heisenberg(8, 3).unwrap(),
            vec![0.0; 3],
            vec![0.0; 3],
            Metadata::new(),
        )
        .unwrap();
        assert!(matches!(piew_value(&ds), Err(Error::IncompleteData(_))));
    }

    #[test]
    fn concurrence_examples() {
        assert!((concurrence(&su2_pair(-3.0), 1).unwrap() - 1.0).abs() < 1e-9);
        assert!(concurrence(&su2_pair(0.0), 1).unwrap().abs() < 1e-12);
        // Werner state at p = 1/2 has correlators -p per axis
        assert!((concurrence(&su2_pair(-1.5), 1).unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn concurrence_is_monotone_in_werner_weight() {
        let mut last = -1.0;
        for k in 0..20 {
            let p = k as f64 / 19.0;
            let c = concurrence(&su2_pair(-3.0 * p), 1).unwrap();
            let want = ((3.0 * p - 1.0) / 2.0).max(0.0);
            assert!((c - want).abs() < 1e-8, "p={p}: {c} vs {want}");
            assert!(c >= last - 1e-12);
            last = c;
        }
    }

    #[test]
    fn concurrence_rejects_unphysical_data() {
        // C_a = +1 on every axis is not a state
        assert!(matches!(
            concurrence(&su2_pair(3.0), 1),
            Err(Error::InvalidData(_))
        ));
        let no_sym = QuantumDataset::new(
            ObservableSet::heisenberg(2, 1).unwrap(),
            vec![-3.0],
            vec![0.0],
            Metadata::new(),
        )
        .unwrap();
        assert!(matches!(
            concurrence(&no_sym, 1),
            Err(Error::IncompleteData(_))
        ));
    }

    #[test]
    fn qfi_examples() {
        let n = 4;
        let dim = 1 << n;
        let mut ghz = vec![0.0; dim];
        ghz[0] = 1.0;
        ghz[dim - 1] = 1.0;
        let st = ThermalState::from_pure(n, &ghz).unwrap();
        assert!((qfi(&st, Axis::Z) - 16.0).abs() < 1e-10);
        let plus = vec![1.0; dim];
        let st = ThermalState::from_pure(n, &plus).unwrap();
        assert!((qfi(&st, Axis::Z) - 4.0).abs() < 1e-10);
        assert!(qfi(&st, Axis::X).abs() < 1e-10);
        assert!(qfi(&ThermalState::maximally_mixed(n), Axis::Z).abs() < 1e-12);
    }

    #[test]
    fn qfi_of_pure_state_is_four_variances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        for _ in 0..10 {
            let amps: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let st = ThermalState::from_pure(n, &amps).unwrap();
            for a in Axis::CARTESIAN {
                let mean: f64 = match a {
                    Axis::Y => 0.0,
                    _ => (0..n).map(|i| st.field(a, i)).sum::<f64>() / 2.0,
                };
                let var = st.collective_second_moment(a) - mean * mean;
                assert!((qfi(&st, a) - 4.0 * var).abs() < 1e-8, "{a}");
            }
        }
    }
}
