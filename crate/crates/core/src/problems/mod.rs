//! Test problems with known or reference solutions, and error measurement.

mod curve_reference;
pub mod exact;
pub mod gray_scott;

use std::f64::consts::TAU;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

pub use curve_reference::{
    curve_mass, parameter_grid, reference_curve_solver, reference_curve_solver_extrapolated,
};
pub use exact::{
    exact_biharmonic_circle, exact_heat_circle, exact_heat_sphere, heat_sphere_solution,
};
pub use gray_scott::{
    gray_scott_initial, gray_scott_operators, gray_scott_reaction, gray_scott_rhs,
    gray_scott_system, Diffusion, GrayScottParams,
};

use crate::assembly::{
    biharmonic_operator, curvature_field, diffusivity_from_curvature, heat_operator,
    poisson_system, solve_poisson, varcoef_operator, NullspaceHandling, PenaltyConfig,
};
use crate::band::{BandedGrid, StencilSpec};
use crate::error::{Error, Result};
use crate::geometry::{Param, Point, Surface, TriMesh};
use crate::linsolve::LinearSolverKind;
use crate::operators::interp_stencil;
use crate::timestep::{integrate, Scheme, SemiDiscreteSystem, StepperConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    HeatCircle,
    HeatSphere,
    BiharmonicCircle,
    PoissonCircle,
    GrayScott,
    CurvdiffEllipse,
    CurvdiffSnowflake,
    GsCurvature,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 8] = [
        ProblemKind::HeatCircle,
        ProblemKind::HeatSphere,
        ProblemKind::BiharmonicCircle,
        ProblemKind::PoissonCircle,
        ProblemKind::GrayScott,
        ProblemKind::CurvdiffEllipse,
        ProblemKind::CurvdiffSnowflake,
        ProblemKind::GsCurvature,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::HeatCircle => "heat-circle",
            ProblemKind::HeatSphere => "heat-sphere",
            ProblemKind::BiharmonicCircle => "biharmonic-circle",
            ProblemKind::PoissonCircle => "poisson-circle",
            ProblemKind::GrayScott => "gray-scott",
            ProblemKind::CurvdiffEllipse => "curvdiff-ellipse",
            ProblemKind::CurvdiffSnowflake => "curvdiff-snowflake",
            ProblemKind::GsCurvature => "gs-curvature",
        }
    }

    /// Problems with a closed-form solution.
    pub fn has_exact(self) -> bool {
        matches!(
            self,
            ProblemKind::HeatCircle
                | ProblemKind::HeatSphere
                | ProblemKind::BiharmonicCircle
                | ProblemKind::PoissonCircle
        )
    }

    /// Problems with an error oracle, exact or reference.
    pub fn has_oracle(self) -> bool {
        self.has_exact()
            || matches!(
                self,
                ProblemKind::CurvdiffEllipse | ProblemKind::CurvdiffSnowflake
            )
    }

    pub fn default_surface(self) -> Surface {
        match self {
            ProblemKind::HeatSphere | ProblemKind::GrayScott => Surface::unit_sphere(),
            ProblemKind::GsCurvature => Surface::mesh(TriMesh::ellipsoid(1.5, 1.0, 0.75, 4)),
            ProblemKind::CurvdiffEllipse => Surface::ellipse(2.0, 1.0),
            ProblemKind::CurvdiffSnowflake => Surface::snowflake(),
            _ => Surface::unit_circle(),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown problem '{s}'")))
    }
}

/// Time-step rule as a function of `dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    Dx2Over4,
    DxOver4,
    Fixed(f64),
}

impl DtPolicy {
    pub fn dt(self, dx: f64) -> f64 {
        match self {
            DtPolicy::Dx2Over4 => dx * dx / 4.0,
            DtPolicy::DxOver4 => dx / 4.0,
            DtPolicy::Fixed(dt) => dt,
        }
    }

    pub fn for_scheme(scheme: Scheme) -> Self {
        if scheme.is_explicit() {
            DtPolicy::Dx2Over4
        } else {
            DtPolicy::DxOver4
        }
    }
}

impl FromStr for DtPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dx2/4" => Ok(DtPolicy::Dx2Over4),
            "dx/4" => Ok(DtPolicy::DxOver4),
            other => other
                .strip_prefix("explicit")
                .map(|v| v.trim_start_matches([':', '=', ' ']))
                .unwrap_or(other)
                .parse::<f64>()
                .map(DtPolicy::Fixed)
                .map_err(|_| Error::InvalidParameter(format!("bad dt policy '{s}'"))),
        }
    }
}

/// Max-norm error of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub dx: f64,
    pub dt: f64,
    pub p: usize,
    pub gamma: f64,
    pub max_err: f64,
    pub samples: usize,
}

/// Default number of error samples: `10⌈2π/dx⌉` on curves, and a lat-long grid with
/// `2⌈2π/dx⌉` points per side on the sphere.
pub fn default_samples(surface: &Surface, dx: f64) -> usize {
    let k = (TAU / dx).ceil() as usize;
    match surface.surface_dim() {
        1 => 10 * k,
        _ => (2 * k) * (2 * k),
    }
}

/// Interpolates band values `v` at each sample point with the grid's degree.
pub fn restrict(grid: &BandedGrid, v: &[f64], points: &[Point]) -> Result<Vec<f64>> {
    let p = grid.degree();
    points
        .iter()
        .map(|q| {
            Ok(interp_stencil(grid, q, p)?
                .into_iter()
                .map(|(n, w)| w * v[n])
                .sum())
        })
        .collect()
}

/// Max over `n_samples` surface samples of `|restricted v − exact(t, param)|`.
pub fn restrict_and_error(
    grid: &BandedGrid,
    surface: &Surface,
    v: &[f64],
    exact: impl Fn(f64, &Param) -> f64,
    t: f64,
    n_samples: usize,
) -> Result<ErrorReport> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step: 0, time: t });
    }
    let samples = surface.sample(n_samples);
    let pts: Vec<Point> = samples.iter().map(|s| s.0).collect();
    let vals = restrict(grid, v, &pts)?;
    let mut max_err = 0.0f64;
    for ((_, param), val) in samples.iter().zip(&vals) {
        let param = param
            .ok_or_else(|| Error::Unsupported("error against an unparameterized surface".into()))?;
        max_err = max_err.max((val - exact(t, &param)).abs());
    }
    Ok(ErrorReport {
        dx: grid.dx(),
        dt: f64::NAN,
        p: grid.degree(),
        gamma: f64::NAN,
        max_err,
        samples: samples.len(),
    })
}

/// Least-squares slope of `log err` against `log dx`. `None` for fewer than two points.
pub fn convergence_slope(dx: &[f64], err: &[f64]) -> Option<f64> {
    if dx.len() < 2 {
        return None;
    }
    let x: Vec<f64> = dx.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Observed orders between consecutive runs.
pub fn pairwise_orders(dx: &[f64], err: &[f64]) -> Vec<f64> {
    dx.windows(2)
        .zip(err.windows(2))
        .map(|(d, e)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect()
}

/// Reference solution of a curve problem, sampled at parameter values `s`.
#[derive(Clone, Debug)]
pub struct CurveReference {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
}

/// Points on the reference grid used for curve comparisons.
pub const REFERENCE_POINTS: usize = 1024;

/// A configured problem. `run` performs one solve at a given `dx` and measures the
/// error against the oracle.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub surface: Surface,
    pub penalty: PenaltyConfig,
    pub p: usize,
    pub scheme: Scheme,
    pub dt_policy: DtPolicy,
    pub t_end: f64,
    /// `None` picks LU in 2D and GMRES in 3D.
    pub solver: Option<LinearSolverKind>,
    reference: Arc<OnceLock<CurveReference>>,
}

impl ProblemSpec {
    /// Defaults: γ = 2d/dx², p = 3 (4 for the biharmonic problem), t_end = 0.5,
    /// forward Euler with dt = dx²/4 on the heat circle, BDF2 with dt = dx/4 elsewhere.
    pub fn new(kind: ProblemKind) -> Self {
        let scheme = match kind {
            ProblemKind::HeatCircle => Scheme::ForwardEuler,
            ProblemKind::GrayScott | ProblemKind::GsCurvature => Scheme::ImexBdf2,
            _ => Scheme::Bdf2,
        };
        Self {
            kind,
            surface: kind.default_surface(),
            penalty: PenaltyConfig::recommended(),
            p: if kind == ProblemKind::BiharmonicCircle {
                4
            } else {
                3
            },
            scheme,
            dt_policy: DtPolicy::for_scheme(scheme),
            t_end: 0.5,
            solver: None,
            reference: Arc::new(OnceLock::new()),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self.dt_policy = DtPolicy::for_scheme(scheme);
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyConfig) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_dt(mut self, dt: DtPolicy) -> Self {
        self.dt_policy = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_solver(mut self, solver: LinearSolverKind) -> Self {
        self.solver = Some(solver);
        self
    }

    fn solver_for(&self, dim: usize) -> LinearSolverKind {
        self.solver.unwrap_or(if dim == 3 {
            LinearSolverKind::iterative()
        } else {
            LinearSolverKind::Direct
        })
    }

    pub fn build_grid(&self, dx: f64) -> Result<BandedGrid> {
        BandedGrid::build(&self.surface, dx, StencilSpec::laplacian(self.p))
    }

    /// Initial band data `u0 ∘ cp`.
    pub fn initial(&self, grid: &BandedGrid) -> Result<Vec<f64>> {
        grid.cps()
            .iter()
            .map(|c| {
                let param = c
                    .param
                    .ok_or_else(|| Error::Unsupported("initial data on a mesh".into()))?;
                Ok(match self.kind {
                    ProblemKind::HeatCircle => exact_heat_circle(0.0, param.curve()),
                    ProblemKind::BiharmonicCircle => exact_biharmonic_circle(0.0, param.curve()),
                    ProblemKind::HeatSphere => match param {
                        Param::Sphere { theta, phi } => exact_heat_sphere(0.0, theta, phi),
                        Param::Curve(_) => {
                            return Err(Error::Unsupported("sphere data on a curve".into()))
                        }
                    },
                    ProblemKind::CurvdiffEllipse | ProblemKind::CurvdiffSnowflake => {
                        (3.0 * param.curve()).cos()
                    }
                    _ => 0.0,
                })
            })
            .collect()
    }

    /// Evolution operator and the resolved γ.
    pub fn operator(
        &self,
        grid: &BandedGrid,
        dt: f64,
    ) -> Result<(crate::sparse::SparseOperator, f64)> {
        let gamma = self.penalty.gamma(grid.dim(), grid.dx(), Some(dt))?;
        let m = match self.kind {
            ProblemKind::HeatCircle | ProblemKind::HeatSphere => {
                heat_operator(grid, gamma, self.p)?
            }
            ProblemKind::BiharmonicCircle => biharmonic_operator(grid, gamma, self.p)?,
            ProblemKind::CurvdiffEllipse | ProblemKind::CurvdiffSnowflake => {
                let a = diffusivity_from_curvature(&curvature_field(grid, self.p)?);
                varcoef_operator(grid, &a, gamma, self.p)?
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "{} has no single linear evolution operator",
                    other.name()
                )))
            }
        };
        Ok((m, gamma))
    }

    /// Reference solution for curve problems, computed once and cached.
    pub fn curve_reference(&self) -> Result<&CurveReference> {
        let curve = match &self.surface {
            Surface::Curve(c) => c.clone(),
            _ => {
                return Err(Error::Unsupported(
                    "curve reference on a non-curve surface".into(),
                ))
            }
        };
        Ok(self.reference.get_or_init(|| {
            let c2 = curve.clone();
            let a = move |s: f64| 1.0 / (1.0 + c2.curvature(s));
            let (s, u) = reference_curve_solver_extrapolated(
                &curve,
                &a,
                |s: f64| (3.0 * s).cos(),
                self.t_end,
                REFERENCE_POINTS,
            );
            CurveReference { s, u }
        }))
    }

    /// Solves at spacing `dx` and returns the final band state with its report.
    pub fn solve(&self, dx: f64) -> Result<(BandedGrid, Vec<f64>, ErrorReport)> {
        if !self.kind.has_oracle() {
            return Err(Error::Unsupported(format!(
                "{} has no error oracle",
                self.kind.name()
            )));
        }
        let grid = self.build_grid(dx)?;
        let dt = self.dt_policy.dt(dx);
        if self.kind == ProblemKind::PoissonCircle {
            let gamma = self.penalty.gamma(grid.dim(), dx, Some(dt))?;
            let (m, b) = poisson_system(&grid, gamma, self.p, |y| -y[0])?;
            let v = solve_poisson(&m, &b, NullspaceHandling::Bordered)?;
            let samples = self.surface.sample(default_samples(&self.surface, dx));
            let pts: Vec<Point> = samples.iter().map(|s| s.0).collect();
            let vals = restrict(&grid, &v, &pts)?;
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let max_err = samples
                .iter()
                .zip(&vals)
                .map(|((_, prm), val)| (val - mean - prm.unwrap().curve().cos()).abs())
                .fold(0.0, f64::max);
            let report = ErrorReport {
                dx,
                dt: f64::NAN,
                p: self.p,
                gamma,
                max_err,
                samples: samples.len(),
            };
            return Ok((grid, v, report));
        }

        let (m, gamma) = self.operator(&grid, dt)?;
        let v0 = self.initial(&grid)?;
        let cfg = StepperConfig::new(self.scheme, dt, self.t_end)
            .with_solver(self.solver_for(grid.dim()));
        let v = integrate(&SemiDiscreteSystem::linear(m), &v0, &cfg)?;
        let t = self.t_end;
        let mut report = match self.kind {
            ProblemKind::HeatCircle => restrict_and_error(
                &grid,
                &self.surface,
                &v,
                |t, prm| exact_heat_circle(t, prm.curve()),
                t,
                default_samples(&self.surface, dx),
            )?,
            ProblemKind::BiharmonicCircle => restrict_and_error(
                &grid,
                &self.surface,
                &v,
                |t, prm| exact_biharmonic_circle(t, prm.curve()),
                t,
                default_samples(&self.surface, dx),
            )?,
            ProblemKind::HeatSphere => restrict_and_error(
                &grid,
                &self.surface,
                &v,
                |t, prm| match *prm {
                    Param::Sphere { theta, phi } => heat_sphere_solution(t, theta, phi),
                    Param::Curve(_) => f64::NAN,
                },
                t,
                default_samples(&self.surface, dx),
            )?,
            _ => {
                let reference = self.curve_reference()?;
                let curve = match &self.surface {
                    Surface::Curve(c) => c,
                    _ => unreachable!("checked by curve_reference"),
                };
                let pts: Vec<Point> = reference.s.iter().map(|&s| curve.point_at(s)).collect();
                let vals = restrict(&grid, &v, &pts)?;
                let max_err = vals
                    .iter()
                    .zip(&reference.u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                ErrorReport {
                    dx,
                    dt,
                    p: self.p,
                    gamma,
                    max_err,
                    samples: pts.len(),
                }
            }
        };
        report.dt = if self.scheme.is_explicit() {
            dt
        } else {
            cfg.uniform_steps().1
        };
        report.gamma = gamma;
        Ok((grid, v, report))
    }

    pub fn run(&self, dx: f64) -> Result<ErrorReport> {
        self.solve(dx).map(|r| r.2)
    }

    /// Runs every `dx` and fits the observed order.
    pub fn converge(&self, dxs: &[f64]) -> Result<ConvergenceStudy> {
        let reports = dxs
            .iter()
            .map(|&dx| self.run(dx))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConvergenceStudy::new(reports))
    }
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub reports: Vec<ErrorReport>,
    pub orders: Vec<f64>,
    pub slope: Option<f64>,
}

impl ConvergenceStudy {
    pub fn new(reports: Vec<ErrorReport>) -> Self {
        let dx: Vec<f64> = reports.iter().map(|r| r.dx).collect();
        let err: Vec<f64> = reports.iter().map(|r| r.max_err).collect();
        Self {
            orders: pairwise_orders(&dx, &err),
            slope: convergence_slope(&dx, &err),
            reports,
        }
    }
}

/// Curvature-dependent diffusion `u_t = div_S(a ∇_S u)` with `a = 1/(1+κ)` and
/// `u(s, 0) = cos 3s`, with κ computed from the closest point function.
pub fn curvature_diffusion_problem(
    surface: &Surface,
    dx: f64,
    p: usize,
    gamma: f64,
) -> Result<(BandedGrid, SemiDiscreteSystem, Vec<f64>)> {
    let grid = BandedGrid::build(surface, dx, StencilSpec::laplacian(p))?;
    let a = diffusivity_from_curvature(&curvature_field(&grid, p)?);
    let m = varcoef_operator(&grid, &a, gamma, p)?;
    let v0 = grid
        .cps()
        .iter()
        .map(|c| {
            c.param.map(|prm| (3.0 * prm.curve()).cos()).ok_or_else(|| {
                Error::Unsupported("curvature diffusion needs a parameterized curve".into())
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, SemiDiscreteSystem::linear(m), v0))
}
