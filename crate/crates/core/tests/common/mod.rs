//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use entwit_core::{Axis, ObservableKind, ObservableSpec};
use std::f64::consts::PI;

pub type V3 = [f64; 3];

/// Unordered site pairs `{i, j}` at ring distance `r`, by brute-force enumeration.
pub fn pairs_at(n: usize, r: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = j - i;
            if d.min(n - d) == r {
                out.push((i, j));
            }
        }
    }
    out
}

/// Observable value computed directly from its definition.
pub fn observable(spins: &[V3], obs: &ObservableSpec) -> f64 {
    let n = spins.len();
    let comp = |a: &V3, b: &V3| match obs.axis {
        Axis::X => a[0] * b[0],
        Axis::Y => a[1] * b[1],
        Axis::Z => a[2] * b[2],
        Axis::Iso => a[0] * b[0] + a[1] * b[1] + a[2] * b[2],
    };
    match obs.kind {
        ObservableKind::Field => {
            let c = match obs.axis {
                Axis::X => 0,
                Axis::Y => 1,
                Axis::Z => 2,
                Axis::Iso => unreachable!(),
            };
            spins.iter().map(|s| s[c]).sum()
        }
        ObservableKind::Pair => pairs_at(n, obs.distance)
            .into_iter()
            .map(|(i, j)| comp(&spins[i], &spins[j]))
            .sum(),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let dp = {
                    let (mut p0, mut p1) = (1.0, z);
                    for k in 2..=m {
                        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    m as f64 * (z * p1 - p0) / (z * z - 1.0)
                };
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// Product quadrature on the unit sphere, weights normalized to 1.
pub fn sphere_grid(n_theta: usize, n_phi: usize) -> Vec<(V3, f64)> {
    let (x, w) = gauss_legendre(n_theta);
    let mut out = Vec::with_capacity(n_theta * n_phi);
    for (z, wz) in x.iter().zip(&w) {
        let rho = (1.0 - z * z).sqrt();
        for k in 0..n_phi {
            let phi = 2.0 * PI * (k as f64 + 0.5) / n_phi as f64;
            out.push((
                [rho * phi.cos(), rho * phi.sin(), *z],
                wz / 2.0 / n_phi as f64,
            ));
        }
    }
    out
}

/// Normalized log-partition function of one rotator in field `h` and the
/// first two moments of `n` under `e^{h.n}`.
struct LastSpin {
    log_z: f64,
    mean: V3,
    second: [[f64; 3]; 3],
}

fn last_spin(h: V3) -> LastSpin {
    let a = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    // with L(a) = coth(a) - 1/a:
    // E[n] = (L/a) h, E[n n^T] = (L/a) I + (1 - 3 L/a) h h^T / a^2
    let (log_z, l_over_a, c_over_a2) = if a < 1e-4 {
        (a * a / 6.0, 1.0 / 3.0 - a * a / 45.0, 1.0 / 15.0)
    } else {
        let log_sinh = a + (-(-2.0 * a).exp()).ln_1p() - 2f64.ln();
        let l = 1.0 / a.tanh() - 1.0 / a;
        (log_sinh - a.ln(), l / a, (1.0 - 3.0 * l / a) / (a * a))
    };
    let mean = [l_over_a * h[0], l_over_a * h[1], l_over_a * h[2]];
    let mut second = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            second[i][j] = c_over_a2 * h[i] * h[j] + if i == j { l_over_a } else { 0.0 };
        }
    }
    LastSpin {
        log_z,
        mean,
        second,
    }
}

/// Exact moments of `p(n) ~ exp(sum_a K_a A_a(n))` on rings of two or three
/// rotators. All but the last rotator range over a product quadrature, the
/// last one is integrated in closed form.
pub struct Quadrature {
    pub log_z: f64,
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

pub fn quadrature(
    n: usize,
    obs: &[ObservableSpec],
    k: &[f64],
    n_theta: usize,
    n_phi: usize,
) -> Quadrature {
    assert!((2..=3).contains(&n));
    let grid = sphere_grid(n_theta, n_phi);
    let r = obs.len();
    let free = n - 1;
    let total = grid.len().pow(free as u32);
    let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    // A_a = c_a + b_a . n_last at grid point idx
    let point = |idx: usize| {
        let mut spins: Vec<V3> = Vec::with_capacity(n);
        let mut w = 1.0;
        let mut t = idx;
        for _ in 0..free {
            let (v, wt) = grid[t % grid.len()];
            spins.push(v);
            w *= wt;
            t /= grid.len();
        }
        spins.push([0.0; 3]);
        let mut c = vec![0.0; r];
        let mut b = vec![[0.0; 3]; r];
        for (a, o) in obs.iter().enumerate() {
            spins[n - 1] = [0.0; 3];
            c[a] = observable(&spins, o);
            for d in 0..3 {
                spins[n - 1] = e[d];
                b[a][d] = observable(&spins, o) - c[a];
            }
        }
        let mut c0 = 0.0;
        let mut h = [0.0; 3];
        for a in 0..r {
            c0 += k[a] * c[a];
            for d in 0..3 {
                h[d] += k[a] * b[a][d];
            }
        }
        let ls = last_spin(h);
        (w.ln() + c0 + ls.log_z, c, b, ls)
    };

    let max = (0..total)
        .map(|i| point(i).0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut means = vec![0.0; r];
    let mut cov = vec![vec![0.0; r]; r];
    for idx in 0..total {
        let (lt, c, b, ls) = point(idx);
        let wt = (lt - max).exp();
        z += wt;
        for a in 0..r {
            means[a] += wt * (c[a] + (0..3).map(|d| b[a][d] * ls.mean[d]).sum::<f64>());
            for bb in 0..r {
                let mut s = c[a] * c[bb];
                for d in 0..3 {
                    s += c[a] * b[bb][d] * ls.mean[d] + c[bb] * b[a][d] * ls.mean[d];
                    for f in 0..3 {
                        s += b[a][d] * b[bb][f] * ls.second[d][f];
                    }
                }
                cov[a][bb] += wt * s;
            }
        }
    }
    for m in means.iter_mut() {
        *m /= z;
    }
    for a in 0..r {
        for bb in 0..r {
            cov[a][bb] = cov[a][bb] / z - means[a] * means[bb];
        }
    }
    Quadrature {
        log_z: max + z.ln(),
        means,
        covariance: cov,
    }
}

/// `coth(K) - 1/K`: mean of `n . n'` for two rotators with weight `exp(K n . n')`.
pub fn langevin(k: f64) -> f64 {
    1.0 / k.tanh() - 1.0 / k
}

/// Per-site minimum of `-sum_r w_r C(r)` over planar spirals of wave number
/// `2 pi q / N`, which is the exact ground state of a translation-invariant
/// isotropic ring.
pub fn spiral_bound_per_site(n: usize, distances: &[usize], w: &[f64]) -> f64 {
    (0..n)
        .map(|q| {
            distances
                .iter()
                .zip(w)
                .map(|(&r, &wr)| {
                    let terms = if 2 * r == n { n / 2 } else { n } as f64;
                    -wr * terms / n as f64 * (2.0 * PI * (q * r) as f64 / n as f64).cos()
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}
