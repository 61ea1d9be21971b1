//! Small helpers for Cartesian 3-vectors stored as `[f64; 3]`.

use rand::Rng;
use std::f64::consts::PI;

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Returns `a / |a|`, or `None` for a (numerically) zero vector.
#[inline]
pub fn normalized(a: &Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Uniformly distributed point on the unit sphere.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let s = (1.0 - z * z).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), z]
}

/// Two unit vectors completing `n` (unit) to a right-handed orthonormal frame.
pub fn orthonormal_frame(n: &Vec3) -> (Vec3, Vec3) {
    // pick the coordinate axis least aligned with n
    let helper = if n[0].abs() < 0.6 {
        [1.0, 0.0, 0.0]
    } else if n[1].abs() < 0.6 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let u = normalized(&cross(n, &helper)).expect("helper axis is never parallel to n");
    let v = cross(n, &u);
    (u, v)
}

/// Uniform point on the spherical cap of half-angle `cone_angle` around `n`.
pub fn random_in_cone<R: Rng + ?Sized>(rng: &mut R, n: &Vec3, cone_angle: f64) -> Vec3 {
    let cos_min = cone_angle.cos();
    let c = 1.0 - rng.random::<f64>() * (1.0 - cos_min);
    let s = (1.0 - c * c).max(0.0).sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    let (u, v) = orthonormal_frame(n);
    let (sp, cp) = phi.sin_cos();
    let out = [
        c * n[0] + s * (cp * u[0] + sp * v[0]),
        c * n[1] + s * (cp * u[1] + sp * v[1]),
        c * n[2] + s * (cp * u[2] + sp * v[2]),
    ];
    normalized(&out).unwrap_or(*n)
}
