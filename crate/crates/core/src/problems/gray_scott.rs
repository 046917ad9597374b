//! Gray–Scott reaction–diffusion on a surface band.
//!
//! The unknowns are stacked as `[u; v]`, each of band length `N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{add_penalty, curvature_field, gs_diffusivity_ratio};
use crate::band::BandedGrid;
use crate::error::{Error, Result};
use crate::operators::{extension_matrix, laplacian};
use crate::sparse::SparseOperator;
use crate::timestep::SemiDiscreteSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct GrayScottParams {
    pub f: f64,
    pub k: f64,
    pub nu_u: f64,
    /// `ν_v`, uniform or one value per band node.
    pub nu_v: Diffusion,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diffusion {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl Diffusion {
    fn at(&self, n: usize) -> f64 {
        match self {
            Diffusion::Uniform(v) => *v,
            Diffusion::PerNode(v) => v[n],
        }
    }
}

pub const GS_F: f64 = 0.054;
pub const GS_K: f64 = 0.063;

impl GrayScottParams {
    /// `F = 0.054`, `k = 0.063`, `ν_u = dx²/9`, `ν_v = ν_u/2`, and a penalty scaled to
    /// the faster diffusion, `γ = 2d ν_u / dx²`.
    pub fn standard(dim: usize, dx: f64) -> Self {
        let nu_u = dx * dx / 9.0;
        Self {
            f: GS_F,
            k: GS_K,
            nu_u,
            nu_v: Diffusion::Uniform(nu_u / 2.0),
            gamma: 2.0 * dim as f64 * nu_u / (dx * dx),
        }
    }

    /// Curvature-modulated `ν_v = ν_u / (3 − 2(κ − c2)/(c1 − c2))` with `c1, c2` the
    /// extreme curvatures on the band.
    pub fn with_curvature(mut self, grid: &BandedGrid, p: usize) -> Result<Self> {
        let kappa = curvature_field(grid, p)?;
        let c1 = kappa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let c2 = kappa.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = gs_diffusivity_ratio(&kappa, c1, c2)?;
        self.nu_v = Diffusion::PerNode(ratio.iter().map(|r| r * self.nu_u).collect());
        Ok(self)
    }
}

/// Reaction terms `(−uv² + F(1−u), uv² − (F+k)v)` written into `du`, `dv`.
pub fn gray_scott_reaction(u: &[f64], v: &[f64], f: f64, k: f64, du: &mut [f64], dv: &mut [f64]) {
    for i in 0..u.len() {
        let uvv = u[i] * v[i] * v[i];
        du[i] = -uvv + f * (1.0 - u[i]);
        dv[i] = uvv - (f + k) * v[i];
    }
}

/// Full right-hand side: `M_u u` and `M_v v` plus the reaction terms.
pub fn gray_scott_rhs(
    u: &[f64],
    v: &[f64],
    params: &GrayScottParams,
    m_u: &SparseOperator,
    m_v: &SparseOperator,
) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let (mut du, mut dv) = (vec![0.0; n], vec![0.0; n]);
    gray_scott_reaction(u, v, params.f, params.k, &mut du, &mut dv);
    let (lu, lv) = (m_u.apply(u), m_v.apply(v));
    for i in 0..n {
        du[i] += lu[i];
        dv[i] += lv[i];
    }
    (du, dv)
}

/// Diffusion-plus-penalty operators `(ν_u E L − γ(I−E), diag(ν_v) E L − γ(I−E))`.
pub fn gray_scott_operators(
    grid: &BandedGrid,
    params: &GrayScottParams,
    p: usize,
) -> Result<(SparseOperator, SparseOperator)> {
    if params.gamma < 0.0 {
        return Err(Error::NegativePenalty(params.gamma));
    }
    let e = extension_matrix(grid, p)?;
    let el = e.mul(&laplacian(grid)?)?;
    let m_u = add_penalty(&el.scaled(params.nu_u), &e, params.gamma)?;
    let nu_v: Vec<f64> = (0..grid.len()).map(|n| params.nu_v.at(n)).collect();
    let m_v = add_penalty(&el.scale_rows(&nu_v), &e, params.gamma)?;
    Ok((m_u, m_v))
}

/// Semi-discrete Gray–Scott system on `[u; v]` with the reaction as the explicit part.
pub fn gray_scott_system(
    grid: &BandedGrid,
    params: &GrayScottParams,
    p: usize,
) -> Result<SemiDiscreteSystem> {
    let (m_u, m_v) = gray_scott_operators(grid, params, p)?;
    let linear = SparseOperator::block_diag(&[&m_u, &m_v]);
    let n = grid.len();
    let (f, k) = (params.f, params.k);
    Ok(
        SemiDiscreteSystem::linear(linear).with_nonlinear(move |_, w, out| {
            let (u, v) = w.split_at(n);
            let (du, dv) = out.split_at_mut(n);
            gray_scott_reaction(u, v, f, k, du, dv);
        }),
    )
}

/// Homogeneous state `(1, 0)` with a seeded uniform perturbation of size
/// `amplitude` on nodes within `radius` of the closest point of node 0.
///
/// `u` is lowered by up to `amplitude` and `v` raised by up to `amplitude`.
pub fn gray_scott_initial(grid: &BandedGrid, amplitude: f64, radius: f64, seed: u64) -> Vec<f64> {
    let n = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = grid.cps()[0].cp;
    let mut w = vec![0.0; 2 * n];
    for i in 0..n {
        let inside = grid.cps()[i].cp.dist(&centre) <= radius;
        // draw for every node so the field does not depend on the patch size
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        w[i] = 1.0 - if inside { amplitude * a } else { 0.0 };
        w[n + i] = if inside { amplitude * b } else { 0.0 };
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::StencilSpec;
    use crate::geometry::Surface;

    #[test]
    fn reaction_values() {
        let (mut du, mut dv) = ([0.0], [0.0]);
        gray_scott_reaction(&[1.0], &[0.0], GS_F, GS_K, &mut du, &mut dv);
        assert_eq!((du[0], dv[0]), (0.0, 0.0));
        gray_scott_reaction(&[0.0], &[0.0], GS_F, GS_K, &mut du, &mut dv);
        assert_eq!((du[0], dv[0]), (GS_F, 0.0));
    }

    #[test]
    fn standard_parameters() {
        let p = GrayScottParams::standard(3, 0.3);
        assert!((p.nu_u - 0.01).abs() < 1e-15);
        assert_eq!(p.nu_v, Diffusion::Uniform(p.nu_u / 2.0));
        assert_eq!((p.f, p.k), (0.054, 0.063));
    }

    #[test]
    fn homogeneous_state_is_fixed() {
        let g = BandedGrid::build(&Surface::unit_circle(), 0.1, StencilSpec::laplacian(2)).unwrap();
        let params = GrayScottParams::standard(2, 0.1);
        let (m_u, m_v) = gray_scott_operators(&g, &params, 2).unwrap();
        let n = g.len();
        let (du, dv) = gray_scott_rhs(&vec![1.0; n], &vec![0.0; n], &params, &m_u, &m_v);
        assert!(du.iter().chain(&dv).all(|x| x.abs() < 1e-12));
    }
}
