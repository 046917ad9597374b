//! Closed-form solutions used as oracles.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// `e^{−t} cos θ + e^{−9t} cos 3θ`: heat equation on the unit circle.
pub fn exact_heat_circle(t: f64, theta: f64) -> f64 {
    (-t).exp() * theta.cos() + (-9.0 * t).exp() * (3.0 * theta).cos()
}

/// `e^{−2t} cos(φ + 1/2)` with latitude φ.
///
/// Only the `sin φ` part of `cos(φ + 1/2)` is a Laplace–Beltrami eigenfunction, so
/// this is the heat solution at `t = 0` alone. [`heat_sphere_solution`] gives the
/// actual evolution of this initial condition.
pub fn exact_heat_sphere(t: f64, _theta: f64, phi: f64) -> f64 {
    (-2.0 * t).exp() * (phi + 0.5).cos()
}

/// `e^{−t} cos θ + e^{−81t} cos 3θ`: `u_t = −Δ²u` on the unit circle.
pub fn exact_biharmonic_circle(t: f64, theta: f64) -> f64 {
    (-t).exp() * theta.cos() + (-81.0 * t).exp() * (3.0 * theta).cos()
}

/// Largest Legendre degree kept in the zonal expansion of `cos φ`.
const MAX_DEGREE: usize = 400;

/// Legendre coefficients `c_l` of `cos φ = √(1 − z²)` with `z = sin φ`.
fn sqrt_one_minus_z2_coeffs() -> &'static [f64] {
    static C: OnceLock<Vec<f64>> = OnceLock::new();
    C.get_or_init(|| {
        // c_l = (2l+1)/2 ∫_0^π sin²α P_l(cos α) dα; the integrand is smooth and
        // periodic, so the midpoint rule converges geometrically.
        let m = 4 * MAX_DEGREE + 400;
        let mut c = vec![0.0; MAX_DEGREE + 1];
        let mut p = vec![0.0; MAX_DEGREE + 1];
        for k in 0..m {
            let a = (k as f64 + 0.5) * PI / m as f64;
            let z = a.cos();
            let w = a.sin().powi(2) * PI / m as f64;
            legendre_all(z, &mut p);
            for l in (0..=MAX_DEGREE).step_by(2) {
                c[l] += w * p[l];
            }
        }
        for (l, v) in c.iter_mut().enumerate() {
            *v *= (2 * l + 1) as f64 / 2.0;
        }
        c
    })
}

fn legendre_all(z: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = z;
    }
    for l in 1..out.len() - 1 {
        out[l + 1] = ((2 * l + 1) as f64 * z * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
    }
}

/// Heat equation on the unit sphere from `u(0) = cos(φ + 1/2)`, by expanding
/// `cos φ` in zonal harmonics: `cos(φ+½) = cos½ Σ c_l P_l(sin φ) − sin½ sin φ`.
pub fn heat_sphere_solution(t: f64, _theta: f64, phi: f64) -> f64 {
    if t == 0.0 {
        return (phi + 0.5).cos();
    }
    let z = phi.sin();
    let c = sqrt_one_minus_z2_coeffs();
    let mut p = vec![0.0; MAX_DEGREE + 1];
    legendre_all(z, &mut p);
    let mut even = 0.0;
    for l in (0..=MAX_DEGREE).step_by(2) {
        let decay = (-((l * (l + 1)) as f64) * t).exp();
        if decay < 1e-18 {
            break;
        }
        even += c[l] * decay * p[l];
    }
    0.5f64.cos() * even - 0.5f64.sin() * (-2.0 * t).exp() * z
}
