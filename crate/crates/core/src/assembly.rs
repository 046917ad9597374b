//! Assembled right-hand-side operators and the Poisson system.

use crate::band::BandedGrid;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linsolve::{rcm_order, LinearSolver, LinearSolverKind};
use crate::operators::{avg_forward, diff_backward, diff_forward, extension_matrix, laplacian};
use crate::sparse::{OperatorRole, SparseOperator};

/// How the penalty strength γ is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaPolicy {
    /// A fixed value.
    Explicit(f64),
    /// `2d / dx²`.
    Recommended,
    /// `1 / dt`, which turns forward Euler into the two-step extend/evolve update.
    OneOverDt,
    /// `c / dx²`.
    TimesInvDx2(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyConfig {
    pub policy: GammaPolicy,
    /// Permit γ < 0. Off by default: negative penalties destabilize the constraint.
    pub allow_negative: bool,
}

impl PenaltyConfig {
    pub fn recommended() -> Self {
        Self::new(GammaPolicy::Recommended)
    }

    pub fn explicit(gamma: f64) -> Self {
        Self::new(GammaPolicy::Explicit(gamma))
    }

    pub fn new(policy: GammaPolicy) -> Self {
        Self {
            policy,
            allow_negative: false,
        }
    }

    /// Resolves γ for a grid of dimension `dim` and spacing `dx`. `dt` is only
    /// needed by [`GammaPolicy::OneOverDt`].
    pub fn gamma(&self, dim: usize, dx: f64, dt: Option<f64>) -> Result<f64> {
        let g = match self.policy {
            GammaPolicy::Explicit(g) => g,
            GammaPolicy::Recommended => recommended_gamma(dim, dx),
            GammaPolicy::TimesInvDx2(c) => c / (dx * dx),
            GammaPolicy::OneOverDt => match dt {
                Some(dt) if dt > 0.0 => 1.0 / dt,
                _ => {
                    return Err(Error::InvalidParameter(
                        "gamma = 1/dt needs a positive time step".into(),
                    ))
                }
            },
        };
        if !g.is_finite() || (g < 0.0 && !self.allow_negative) {
            return Err(Error::NegativePenalty(g));
        }
        Ok(g)
    }
}

/// `2d / dx²`.
pub fn recommended_gamma(dim: usize, dx: f64) -> f64 {
    2.0 * dim as f64 / (dx * dx)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::NegativePenalty(gamma));
    }
    Ok(())
}

/// `core − γ(I − E)` without any sign check on γ.
pub fn add_penalty(
    core: &SparseOperator,
    e: &SparseOperator,
    gamma: f64,
) -> Result<SparseOperator> {
    let n = e.nrows();
    core.check_square(n)?;
    if gamma == 0.0 {
        return Ok(core.clone().with_role(OperatorRole::Assembled));
    }
    let with_e = core.lin_comb(1.0, e, gamma)?;
    with_e.lin_comb(1.0, &SparseOperator::identity(n), -gamma)
}

/// `E_p L − γ(I − E_p)`.
pub fn heat_operator(grid: &BandedGrid, gamma: f64, p: usize) -> Result<SparseOperator> {
    check_gamma(gamma)?;
    let e = extension_matrix(grid, p)?;
    let el = e.mul(&laplacian(grid)?)?;
    add_penalty(&el, &e, gamma)
}

/// `−E_p L E_p L − γ(I − E_p)`.
pub fn biharmonic_operator(grid: &BandedGrid, gamma: f64, p: usize) -> Result<SparseOperator> {
    check_gamma(gamma)?;
    let e = extension_matrix(grid, p)?;
    let el = e.mul(&laplacian(grid)?)?;
    let elel = el.mul(&el)?.scaled(-1.0);
    add_penalty(&elel, &e, gamma)
}

/// Conservative variable-coefficient operator
/// `E_p Σ_axis D_b diag(A_f a) D_f − γ(I − E_p)`.
pub fn varcoef_operator(
    grid: &BandedGrid,
    a: &[f64],
    gamma: f64,
    p: usize,
) -> Result<SparseOperator> {
    check_gamma(gamma)?;
    let core = divergence_form(grid, a)?;
    let e = extension_matrix(grid, p)?;
    add_penalty(&e.mul(&core)?, &e, gamma)
}

/// `Σ_axis D_b diag(A_f a) D_f` without extension or penalty.
pub fn divergence_form(grid: &BandedGrid, a: &[f64]) -> Result<SparseOperator> {
    let n = grid.len();
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.len(),
        });
    }
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonpositiveDiffusivity { index, value });
    }
    let mut total: Option<SparseOperator> = None;
    for axis in 0..grid.dim() {
        let half = avg_forward(grid, axis)?.apply(a);
        let flux = diff_forward(grid, axis)?.scale_rows(&half);
        let term = diff_backward(grid, axis)?.mul(&flux)?;
        total = Some(match total {
            None => term,
            Some(t) => t.lin_comb(1.0, &term, 1.0)?,
        });
    }
    Ok(total.expect("dimension is at least 2"))
}

/// Mean curvature `κ = E_p |L cp|₂` at every band node.
pub fn curvature_field(grid: &BandedGrid, p: usize) -> Result<Vec<f64>> {
    let l = laplacian(grid)?;
    let lcp: Vec<Vec<f64>> = grid.cp_components().iter().map(|c| l.apply(c)).collect();
    let norm: Vec<f64> = (0..grid.len())
        .map(|n| lcp.iter().map(|c| c[n] * c[n]).sum::<f64>().sqrt())
        .collect();
    Ok(extension_matrix(grid, p)?.apply(&norm))
}

/// `a = 1 / (1 + |κ|)`.
pub fn diffusivity_from_curvature(kappa: &[f64]) -> Vec<f64> {
    kappa.iter().map(|k| 1.0 / (1.0 + k.abs())).collect()
}

/// Ratio `ν_v / ν_u = 1 / (3 − 2(κ − c2)/(c1 − c2))`, where `c1` and `c2` are the
/// largest and smallest curvatures. Flat regions get a ratio of 1/3, the most curved
/// ones equal coefficients.
pub fn gs_diffusivity_ratio(kappa: &[f64], c1: f64, c2: f64) -> Result<Vec<f64>> {
    if !(c1 > c2) {
        return Err(Error::InvalidParameter(format!(
            "need c1 > c2, got c1 = {c1}, c2 = {c2}"
        )));
    }
    Ok(kappa
        .iter()
        .map(|k| 1.0 / (3.0 - 2.0 * (k - c2) / (c1 - c2)))
        .collect())
}

/// Matrix `E_p L − γ(I − E_p)` and right-hand side `E_p (f ∘ cp)` for the
/// surface Poisson problem `Δ_S u = f`.
pub fn poisson_system(
    grid: &BandedGrid,
    gamma: f64,
    p: usize,
    f: impl Fn(&Point) -> f64,
) -> Result<(SparseOperator, Vec<f64>)> {
    if gamma == 0.0 {
        return Err(Error::InvalidParameter(
            "the Poisson system needs gamma != 0".into(),
        ));
    }
    let e = extension_matrix(grid, p)?;
    let el = e.mul(&laplacian(grid)?)?;
    let m = add_penalty(&el, &e, gamma)?;
    let fs: Vec<f64> = grid.cps().iter().map(|c| f(&c.cp)).collect();
    Ok((m, e.apply(&fs)))
}

/// Treatment of the constant nullspace of the Poisson matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullspaceHandling {
    /// Border the matrix with a mean-zero constraint on the band values.
    Bordered,
    /// Factor the matrix as is; typically fails with `SingularSystem`.
    None,
}

/// Solves the Poisson system. With [`NullspaceHandling::Bordered`] the result has
/// zero mean over the band; callers re-normalize against surface samples.
pub fn solve_poisson(
    matrix: &SparseOperator,
    rhs: &[f64],
    handling: NullspaceHandling,
) -> Result<Vec<f64>> {
    let n = matrix.nrows();
    match handling {
        NullspaceHandling::None => {
            let x = LinearSolver::new(matrix, LinearSolverKind::Direct)?.solve(rhs, None)?;
            // a rounding-level pivot can survive factorization; catch the blow-up here
            let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            if big > 1e10 * scale {
                return Err(Error::SingularSystem);
            }
            Ok(x)
        }
        NullspaceHandling::Bordered => {
            let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|r| {
                    let mut row: Vec<_> = matrix.row(r).collect();
                    row.push((n, 1.0));
                    row
                })
                .collect();
            rows.push((0..n).map(|c| (c, 1.0)).collect());
            let b = SparseOperator::from_rows(n + 1, rows, OperatorRole::Assembled);
            let order = rcm_order(&b, 1);
            let solver = LinearSolver::direct_with_order(&b, order)?;
            let mut r = rhs.to_vec();
            r.push(0.0);
            let mut x = solver.solve(&r, None)?;
            x.truncate(n);
            Ok(x)
        }
    }
}
