//! One-dimensional periodic solver in the curve parameter, used as an oracle for
//! diffusion on closed curves.

use std::f64::consts::TAU;

use crate::geometry::ParametricCurve;

/// Solves `u_t = (1/J) ∂_s (a (1/J) ∂_s u)`, `J = |σ'(s)|`, on an `n`-point periodic
/// grid with conservative second-order differences and classical RK4.
///
/// Returns `(s_j, u_j)` at `t_end`.
pub fn reference_curve_solver(
    curve: &ParametricCurve,
    a: impl Fn(f64) -> f64,
    u0: impl Fn(f64) -> f64,
    t_end: f64,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let period = curve.period();
    let h = period / n as f64;
    let s: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let jac: Vec<f64> = s.iter().map(|&x| curve.speed(x)).collect();
    // half-point coefficients a/J at s_{j+1/2}
    let half: Vec<f64> = (0..n)
        .map(|j| {
            let x = (j as f64 + 0.5) * h;
            a(x) / curve.speed(x)
        })
        .collect();
    let op = CurveOperator { jac, half, h };
    let mut u: Vec<f64> = s.iter().map(|&x| u0(x)).collect();

    let rho = op.spectral_bound();
    // RK4 is stable up to 2.78/ρ on the negative real axis
    let dt_max = 2.0 / rho;
    let steps = (t_end / dt_max).ceil().max(1.0) as usize;
    let dt = t_end / steps as f64;
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        op.apply(&u, &mut k[0]);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k[0][i];
        }
        op.apply(&tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k[1][i];
        }
        op.apply(&tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = u[i] + dt * k[2][i];
        }
        op.apply(&tmp, &mut k[3]);
        for i in 0..n {
            u[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
    }
    (s, u)
}

/// Richardson combination of the `n` and `2n` reference solutions, returned on the
/// `n`-point grid. Removes the leading `h²` error term.
pub fn reference_curve_solver_extrapolated(
    curve: &ParametricCurve,
    a: impl Fn(f64) -> f64 + Copy,
    u0: impl Fn(f64) -> f64 + Copy,
    t_end: f64,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let (s, coarse) = reference_curve_solver(curve, a, u0, t_end, n);
    let (_, fine) = reference_curve_solver(curve, a, u0, t_end, 2 * n);
    let u = coarse
        .iter()
        .enumerate()
        .map(|(j, c)| (4.0 * fine[2 * j] - c) / 3.0)
        .collect();
    (s, u)
}

struct CurveOperator {
    jac: Vec<f64>,
    half: Vec<f64>,
    h: f64,
}

impl CurveOperator {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let h2 = self.h * self.h;
        for j in 0..n {
            let jp = if j + 1 == n { 0 } else { j + 1 };
            let jm = if j == 0 { n - 1 } else { j - 1 };
            let flux_p = self.half[j] * (u[jp] - u[j]);
            let flux_m = self.half[jm] * (u[j] - u[jm]);
            out[j] = (flux_p - flux_m) / (self.jac[j] * h2);
        }
    }

    /// Gershgorin bound on the spectral radius.
    fn spectral_bound(&self) -> f64 {
        let n = self.jac.len();
        let h2 = self.h * self.h;
        (0..n)
            .map(|j| {
                let jm = if j == 0 { n - 1 } else { j - 1 };
                2.0 * (self.half[j] + self.half[jm]) / (self.jac[j] * h2)
            })
            .fold(0.0, f64::max)
    }
}

/// Discrete mass `Σ u_j J_j h`, conserved exactly by the scheme up to rounding.
pub fn curve_mass(curve: &ParametricCurve, s: &[f64], u: &[f64]) -> f64 {
    let h = curve.period() / s.len() as f64;
    s.iter().zip(u).map(|(&x, v)| v * curve.speed(x) * h).sum()
}

/// Convenience: the standard parameter grid for `n` points on `[0, 2π)`.
pub fn parameter_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 * TAU / n as f64).collect()
}
