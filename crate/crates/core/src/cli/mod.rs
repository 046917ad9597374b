//! Command-line front end.
//!
//! Each `cmd_*` function runs one study and writes a CSV whose `#` header lines
//! carry the [`RunManifest`]. The study itself is available separately
//! (`stability_scan`, `gamma_sweep`, ...) for use from code.

mod output;

use std::ffi::OsString;
use std::fmt::Display;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::assembly::{curvature_field, heat_operator, GammaPolicy, PenaltyConfig};
use crate::band::{BandedGrid, StencilSpec};
use crate::error::{Error, Result};
use crate::geometry::{Param, Point, Surface, TriMesh};
use crate::linsolve::LinearSolverKind;
use crate::problems::{
    curvature_diffusion_problem, default_samples, exact_heat_circle, gray_scott_initial,
    gray_scott_system, restrict, restrict_and_error, ConvergenceStudy, Diffusion, DtPolicy,
    GrayScottParams, ProblemKind, ProblemSpec,
};
use crate::sparse::SparseOperator;
use crate::timestep::{
    integrate_observed, predicted_fe_dt, stability_boundary, Scheme, SemiDiscreteSystem,
    StabilityScanReport, StepperConfig, GROWTH_LIMIT,
};

pub use output::{fmt_f64, write_vtk_points};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for bad arguments or unsupported combinations.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical failure (blow-up, singular or unsolved systems).
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for I/O and input-file errors.
pub const EXIT_IO: i32 = 1;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } | Error::SingularSystem | Error::SolverFailure(_) => EXIT_NUMERICAL,
        Error::Io(_) | Error::MeshParse { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Provenance written at the top of every output file.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub command: String,
    pub problem: Option<String>,
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            problem: None,
            params: Vec::new(),
            seed: None,
            started: Instant::now(),
        }
    }

    pub fn problem(mut self, name: &str) -> Self {
        self.problem = Some(name.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, key: &str, value: impl Display) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Header comment lines. Wall time is always the last line so it can be
    /// stripped when comparing runs.
    pub fn header(&self) -> String {
        let mut s = format!("# command: {}\n", self.command);
        if let Some(p) = &self.problem {
            s += &format!("# problem: {p}\n");
        }
        for (k, v) in &self.params {
            s += &format!("# {k}: {v}\n");
        }
        if let Some(seed) = self.seed {
            s += &format!("# seed: {seed}\n");
        }
        s += &format!("# version: {}\n", env!("CARGO_PKG_VERSION"));
        s += &format!(
            "# wall_time_s: {:.3}\n",
            self.started.elapsed().as_secs_f64()
        );
        s
    }
}

fn list<T: Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `--gamma` values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaChoice {
    Auto,
    Value(f64),
    OneOverDt,
}

impl GammaChoice {
    pub fn penalty(self) -> PenaltyConfig {
        match self {
            GammaChoice::Auto => PenaltyConfig::recommended(),
            GammaChoice::Value(g) => PenaltyConfig::explicit(g),
            GammaChoice::OneOverDt => PenaltyConfig::new(GammaPolicy::OneOverDt),
        }
    }
}

impl FromStr for GammaChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(GammaChoice::Auto),
            "one-over-dt" | "1/dt" => Ok(GammaChoice::OneOverDt),
            v => v
                .parse()
                .map(GammaChoice::Value)
                .map_err(|_| Error::InvalidParameter(format!("bad gamma '{s}'"))),
        }
    }
}

impl Display for GammaChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaChoice::Auto => write!(f, "auto"),
            GammaChoice::Value(g) => write!(f, "{g}"),
            GammaChoice::OneOverDt => write!(f, "one-over-dt"),
        }
    }
}

/// Parses `circle[:R]`, `sphere[:R]`, `ellipse[:A,B]` or `snowflake`.
pub fn parse_surface(s: &str) -> Result<Surface> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad surface arguments '{args}'")))?
    };
    let bad = || Error::InvalidParameter(format!("bad surface '{s}'"));
    match (name, nums.as_slice()) {
        ("circle", []) => Ok(Surface::unit_circle()),
        ("circle", [r]) if *r > 0.0 => Ok(Surface::circle(Point::new2(0.0, 0.0), *r)),
        ("sphere", []) => Ok(Surface::unit_sphere()),
        ("sphere", [r]) if *r > 0.0 => Ok(Surface::sphere(Point::new3(0.0, 0.0, 0.0), *r)),
        ("ellipse", []) => Ok(Surface::ellipse(2.0, 1.0)),
        ("ellipse", [a, b]) if *a > 0.0 && *b > 0.0 => Ok(Surface::ellipse(*a, *b)),
        ("snowflake", []) => Ok(Surface::snowflake()),
        _ => Err(bad()),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Convergence table: one row per `dx` with the observed order against the
/// previous row, followed by a `# slope:` line when there are two or more rows.
pub fn cmd_converge(
    spec: &ProblemSpec,
    dxs: &[f64],
    out: Option<&Path>,
    manifest: RunManifest,
) -> Result<ConvergenceStudy> {
    if dxs.is_empty() {
        return Err(Error::InvalidParameter(
            "converge needs at least one dx".into(),
        ));
    }
    let study = spec.converge(dxs)?;
    let mut text = manifest.header();
    text += "dx,dt,p,gamma,max_err,samples,order\n";
    for (i, r) in study.reports.iter().enumerate() {
        let order = if i == 0 {
            String::new()
        } else {
            fmt_f64(study.orders[i - 1])
        };
        text += &format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.dx),
            fmt_f64(r.dt),
            r.p,
            fmt_f64(r.gamma),
            fmt_f64(r.max_err),
            r.samples,
            order
        );
    }
    if let Some(s) = study.slope {
        text += &format!("# slope: {}\n", fmt_f64(s));
    }
    write_out(out, &text)?;
    Ok(study)
}

/// `E L − I − γ(I − E)` on the unit circle: the semi-discrete `u_t = Δ_S u − u`.
pub fn shifted_heat_operator(grid: &BandedGrid, gamma: f64, p: usize) -> Result<SparseOperator> {
    let m = heat_operator(grid, gamma, p)?;
    m.lin_comb(1.0, &SparseOperator::identity(grid.len()), -1.0)
}

/// Largest stable explicit step of `u_t = Δ_S u − u` on the unit circle for each γ.
pub fn stability_scan(
    gammas: &[f64],
    dx: f64,
    scheme: Scheme,
    p: usize,
) -> Result<Vec<StabilityScanReport>> {
    if gammas.is_empty() {
        return Err(Error::InvalidParameter(
            "stability scan needs at least one gamma".into(),
        ));
    }
    if !scheme.is_explicit() {
        return Err(Error::InvalidParameter(format!(
            "stability scan needs an explicit scheme, got {}",
            scheme.name()
        )));
    }
    let grid = BandedGrid::build(&Surface::unit_circle(), dx, StencilSpec::laplacian(p))?;
    gammas
        .par_iter()
        .map(|&gamma| {
            let op = shifted_heat_operator(&grid, gamma, p)?;
            let predicted = predicted_fe_dt(grid.dim(), dx, gamma);
            let observed = stability_boundary(&op, scheme, 4.0 * predicted, 1e-3)?;
            Ok(StabilityScanReport {
                gamma,
                dt_max_observed: observed,
                dt_predicted: predicted,
            })
        })
        .collect()
}

pub fn cmd_stability_scan(
    gammas: &[f64],
    dx: f64,
    scheme: Scheme,
    p: usize,
    out: Option<&Path>,
    manifest: RunManifest,
) -> Result<Vec<StabilityScanReport>> {
    let rows = stability_scan(gammas, dx, scheme, p)?;
    let mut text = manifest.header();
    text += "gamma,gamma_dx2,dt_max_observed,dt_predicted\n";
    for r in &rows {
        text += &format!(
            "{},{},{},{}\n",
            fmt_f64(r.gamma),
            fmt_f64(r.gamma * dx * dx),
            fmt_f64(r.dt_max_observed),
            fmt_f64(r.dt_predicted)
        );
    }
    write_out(out, &text)?;
    Ok(rows)
}

/// How a monitored run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    /// `‖v‖∞` exceeded `GROWTH_LIMIT` times its initial value.
    Growth,
    NonFinite,
}

impl RunStatus {
    pub fn is_stable(self) -> bool {
        self == RunStatus::Ok
    }

    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Growth => "growth",
            RunStatus::NonFinite => "nonfinite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSweepRow {
    pub gamma_dx2: f64,
    pub gamma: f64,
    pub dt: f64,
    /// Infinite unless the run was stable.
    pub max_err: f64,
    pub status: RunStatus,
}

/// Heat equation on the unit circle to `t_end` for each `γ dx²`, flagging runs that
/// blow up.
pub fn gamma_sweep(
    dx: f64,
    dt_policy: DtPolicy,
    gamma_dx2: &[f64],
    scheme: Scheme,
    p: usize,
    t_end: f64,
) -> Result<Vec<GammaSweepRow>> {
    if gamma_dx2.is_empty() {
        return Err(Error::InvalidParameter(
            "gamma sweep needs at least one value".into(),
        ));
    }
    let surface = Surface::unit_circle();
    let grid = BandedGrid::build(&surface, dx, StencilSpec::laplacian(p))?;
    let spec = ProblemSpec::new(ProblemKind::HeatCircle).with_p(p);
    let v0 = spec.initial(&grid)?;
    let limit = GROWTH_LIMIT * v0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dt = dt_policy.dt(dx);
    gamma_dx2
        .par_iter()
        .map(|&g| {
            let gamma = g / (dx * dx);
            let m = heat_operator(&grid, gamma, p)?;
            let cfg = StepperConfig::new(scheme, dt, t_end);
            let mut grew = false;
            let run = integrate_observed(&SemiDiscreteSystem::linear(m), &v0, &cfg, |_, _, v| {
                if v.iter().any(|x| x.abs() > limit) {
                    grew = true;
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            let (status, max_err) = match run {
                Err(Error::NonFinite { .. }) => (RunStatus::NonFinite, f64::INFINITY),
                Err(e) => return Err(e),
                Ok(_) if grew => (RunStatus::Growth, f64::INFINITY),
                Ok(o) => {
                    let r = restrict_and_error(
                        &grid,
                        &surface,
                        &o.v,
                        |t, prm| exact_heat_circle(t, prm.curve()),
                        t_end,
                        default_samples(&surface, dx),
                    )?;
                    (RunStatus::Ok, r.max_err)
                }
            };
            Ok(GammaSweepRow {
                gamma_dx2: g,
                gamma,
                dt,
                max_err,
                status,
            })
        })
        .collect()
}

pub fn cmd_gamma_sweep(
    dx: f64,
    dt_policy: DtPolicy,
    gamma_dx2: &[f64],
    scheme: Scheme,
    p: usize,
    t_end: f64,
    out: Option<&Path>,
    manifest: RunManifest,
) -> Result<Vec<GammaSweepRow>> {
    let rows = gamma_sweep(dx, dt_policy, gamma_dx2, scheme, p, t_end)?;
    let mut text = manifest.header();
    text += "gamma_dx2,gamma,dt,max_err,status\n";
    for r in &rows {
        text += &format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.gamma_dx2),
            fmt_f64(r.gamma),
            fmt_f64(r.dt),
            fmt_f64(r.max_err),
            r.status.name()
        );
    }
    write_out(out, &text)?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureRow {
    /// Curve parameter `s`, or `(θ, φ)` on a sphere.
    pub param: Vec<f64>,
    pub kappa: f64,
    pub kappa_exact: f64,
    pub abs_err: f64,
}

/// Curvature computed from the closest point function, interpolated to surface
/// samples and compared with the analytic value.
pub fn curvature_check(surface: &Surface, dx: f64, p: usize) -> Result<Vec<CurvatureRow>> {
    if !surface.is_parameterized() {
        return Err(Error::Unsupported(
            "curvature check needs an analytic surface".into(),
        ));
    }
    let grid = BandedGrid::build(surface, dx, StencilSpec::laplacian(p))?;
    let kappa = curvature_field(&grid, p)?;
    let samples = surface.sample(default_samples(surface, dx));
    let pts: Vec<Point> = samples.iter().map(|s| s.0).collect();
    let vals = restrict(&grid, &kappa, &pts)?;
    samples
        .iter()
        .zip(vals)
        .map(|((y, prm), k)| {
            let exact = surface.exact_mean_curvature(y)?;
            let param = match prm {
                Some(Param::Curve(s)) => vec![*s],
                Some(Param::Sphere { theta, phi }) => vec![*theta, *phi],
                None => Vec::new(),
            };
            Ok(CurvatureRow {
                param,
                kappa: k,
                kappa_exact: exact,
                abs_err: (k - exact).abs(),
            })
        })
        .collect()
}

pub fn cmd_curvature_check(
    surface: &Surface,
    dx: f64,
    p: usize,
    out: Option<&Path>,
    manifest: RunManifest,
) -> Result<Vec<CurvatureRow>> {
    let rows = curvature_check(surface, dx, p)?;
    let max_err = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    let mut text = manifest.header();
    text += if surface.surface_dim() == 1 {
        "s,kappa,kappa_exact,abs_err\n"
    } else {
        "theta,phi,kappa,kappa_exact,abs_err\n"
    };
    for r in &rows {
        for x in &r.param {
            text += &fmt_f64(*x);
            text.push(',');
        }
        text += &format!(
            "{},{},{}\n",
            fmt_f64(r.kappa),
            fmt_f64(r.kappa_exact),
            fmt_f64(r.abs_err)
        );
    }
    text += &format!("# max_abs_err: {}\n", fmt_f64(max_err));
    write_out(out, &text)?;
    Ok(rows)
}

/// Settings for a time-dependent pattern or diffusion run.
#[derive(Clone, Debug)]
pub struct SimulateOptions {
    pub problem: ProblemKind,
    pub surface: Surface,
    pub dx: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub p: usize,
    pub gamma: GammaChoice,
    pub t_end: f64,
    pub seed: u64,
    /// Number of evenly spaced snapshots after the initial one.
    pub snapshots: usize,
    /// Gray–Scott perturbation size and patch radius.
    pub amplitude: f64,
    pub radius: f64,
    /// Gray–Scott `F` and `k`.
    pub feed: f64,
    pub kill: f64,
    /// Gray–Scott with `ν_v = ν_u`.
    pub equal_diffusion: bool,
    /// `None` picks LU in 2D and GMRES in 3D.
    pub solver: Option<LinearSolverKind>,
}

impl SimulateOptions {
    /// Defaults for `problem`: IMEX BDF2 with `dt = 1` to `t = 3000` for Gray–Scott,
    /// BDF2 with `dt = dx/4` to `t = 0.5` for curvature-dependent diffusion.
    pub fn new(problem: ProblemKind, dx: f64) -> Result<Self> {
        let gs = matches!(problem, ProblemKind::GrayScott | ProblemKind::GsCurvature);
        if !gs
            && !matches!(
                problem,
                ProblemKind::CurvdiffEllipse | ProblemKind::CurvdiffSnowflake
            )
        {
            return Err(Error::Unsupported(format!(
                "simulate does not run {}",
                problem.name()
            )));
        }
        Ok(Self {
            problem,
            surface: problem.default_surface(),
            dx,
            dt: if gs { 1.0 } else { dx / 4.0 },
            scheme: if gs { Scheme::ImexBdf2 } else { Scheme::Bdf2 },
            p: 3,
            gamma: GammaChoice::Auto,
            t_end: if gs { 3000.0 } else { 0.5 },
            seed: 0,
            snapshots: 10,
            amplitude: 0.05,
            radius: 0.5,
            feed: crate::problems::gray_scott::GS_F,
            kill: crate::problems::gray_scott::GS_K,
            equal_diffusion: false,
            solver: None,
        })
    }

    fn is_gray_scott(&self) -> bool {
        matches!(
            self.problem,
            ProblemKind::GrayScott | ProblemKind::GsCurvature
        )
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    /// One vector per field, each of band length.
    pub fields: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct Simulation {
    pub grid: BandedGrid,
    pub field_names: Vec<&'static str>,
    pub snapshots: Vec<Snapshot>,
    pub gamma: f64,
    /// Set when the run stopped early; the snapshots are those taken before.
    pub failure: Option<Error>,
}

impl Simulation {
    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("the initial state is always recorded")
    }
}

/// Runs a Gray–Scott or curvature-dependent diffusion problem, recording the
/// state at evenly spaced times.
pub fn simulate(opts: &SimulateOptions) -> Result<Simulation> {
    let (grid, sys, v0, gamma, names) = if opts.is_gray_scott() {
        let grid = BandedGrid::build(&opts.surface, opts.dx, StencilSpec::laplacian(opts.p))?;
        let mut params = GrayScottParams::standard(grid.dim(), opts.dx);
        params.f = opts.feed;
        params.k = opts.kill;
        if opts.problem == ProblemKind::GsCurvature {
            params = params.with_curvature(&grid, opts.p)?;
        }
        if opts.equal_diffusion {
            params.nu_v = Diffusion::Uniform(params.nu_u);
        }
        params.gamma = match opts.gamma {
            GammaChoice::Auto => params.gamma,
            other => other.penalty().gamma(grid.dim(), opts.dx, Some(opts.dt))?,
        };
        let sys = gray_scott_system(&grid, &params, opts.p)?;
        let w0 = gray_scott_initial(&grid, opts.amplitude, opts.radius, opts.seed);
        (grid, sys, w0, params.gamma, vec!["u", "v"])
    } else {
        let dim = opts.surface.dim();
        let gamma = opts.gamma.penalty().gamma(dim, opts.dx, Some(opts.dt))?;
        let (grid, sys, v0) = curvature_diffusion_problem(&opts.surface, opts.dx, opts.p, gamma)?;
        (grid, sys, v0, gamma, vec!["u"])
    };
    let n = grid.len();
    let split = |w: &[f64]| -> Vec<Vec<f64>> { w.chunks(n).map(|c| c.to_vec()).collect() };

    let solver = opts.solver.unwrap_or(if grid.dim() == 3 {
        LinearSolverKind::iterative()
    } else {
        LinearSolverKind::Direct
    });
    let cfg = StepperConfig::new(opts.scheme, opts.dt, opts.t_end).with_solver(solver);
    let count = opts.snapshots.max(1);
    let mut snapshots = Vec::new();
    let mut next = 0usize;
    let tol = 1e-9 * opts.t_end.max(opts.dt);
    let run = integrate_observed(&sys, &v0, &cfg, |step, t, w| {
        let target = opts.t_end * next as f64 / count as f64;
        if step == 0 || t >= target - tol {
            snapshots.push(Snapshot {
                step,
                t,
                fields: split(w),
            });
            while next <= count && opts.t_end * next as f64 / count as f64 <= t + tol {
                next += 1;
            }
        }
        ControlFlow::Continue(())
    });
    let failure = match run {
        Ok(o) => {
            if snapshots.last().map(|s| s.step) != Some(o.steps) {
                snapshots.push(Snapshot {
                    step: o.steps,
                    t: o.t,
                    fields: split(&o.v),
                });
            }
            None
        }
        Err(e @ Error::NonFinite { .. }) => Some(e),
        Err(e) => return Err(e),
    };
    Ok(Simulation {
        grid,
        field_names: names,
        snapshots,
        gamma,
        failure,
    })
}

/// Writes `snapshot_NNNN.csv` (and `.vtk` in 3D) plus `summary.csv` into `dir`.
/// Curvature-diffusion runs also get `final_vs_reference.csv`. Returns the
/// simulation; a numerical failure is reported after the partial output is written.
pub fn cmd_simulate(
    opts: &SimulateOptions,
    dir: &Path,
    manifest: RunManifest,
) -> Result<Simulation> {
    let sim = simulate(opts)?;
    std::fs::create_dir_all(dir)?;
    let grid = &sim.grid;
    let status = match &sim.failure {
        None => "complete".to_string(),
        Some(e) => format!("failed: {e}"),
    };
    let manifest = manifest
        .param("gamma_resolved", fmt_f64(sim.gamma))
        .param("status", &status);

    let mut summary = manifest.header();
    summary += "step,t";
    for name in &sim.field_names {
        summary += &format!(",{name}_min,{name}_max");
    }
    summary += ",file\n";
    for (i, snap) in sim.snapshots.iter().enumerate() {
        let stem = format!("snapshot_{i:04}");
        let mut text = manifest.header();
        text += &format!("# step: {}\n# t: {}\n", snap.step, fmt_f64(snap.t));
        text += &output::snapshot_csv(grid, &sim.field_names, &snap.fields);
        std::fs::write(dir.join(format!("{stem}.csv")), text)?;
        if grid.dim() == 3 {
            let title = format!(
                "cpmol {} step {} t {}",
                opts.problem.name(),
                snap.step,
                fmt_f64(snap.t)
            );
            let mut f =
                std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.vtk")))?);
            write_vtk_points(&mut f, &title, grid, &sim.field_names, &snap.fields)?;
        }
        summary += &format!("{},{}", snap.step, fmt_f64(snap.t));
        for f in &snap.fields {
            let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            summary += &format!(",{},{}", fmt_f64(lo), fmt_f64(hi));
        }
        summary += &format!(",{stem}.csv\n");
    }
    std::fs::write(dir.join("summary.csv"), summary)?;

    if sim.failure.is_none()
        && matches!(
            opts.problem,
            ProblemKind::CurvdiffEllipse | ProblemKind::CurvdiffSnowflake
        )
    {
        if let Surface::Curve(curve) = &opts.surface {
            let mut spec = ProblemSpec::new(opts.problem).with_t_end(sim.last().t);
            spec.surface = opts.surface.clone();
            let reference = spec.curve_reference()?;
            let pts: Vec<Point> = reference.s.iter().map(|&s| curve.point_at(s)).collect();
            let ours = restrict(grid, &sim.last().fields[0], &pts)?;
            let mut text = manifest.header();
            text += "s,x,y,u,u_reference,abs_diff\n";
            for (j, &s) in reference.s.iter().enumerate() {
                text += &format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f64(s),
                    fmt_f64(pts[j][0]),
                    fmt_f64(pts[j][1]),
                    fmt_f64(ours[j]),
                    fmt_f64(reference.u[j]),
                    fmt_f64((ours[j] - reference.u[j]).abs())
                );
            }
            std::fs::write(dir.join("final_vs_reference.csv"), text)?;
        }
    }
    Ok(sim)
}

/// Options shared by every subcommand. Not every command uses every flag.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Problem name, e.g. heat-circle, heat-sphere, gray-scott.
    #[arg(long)]
    pub problem: Option<String>,
    /// circle[:R], sphere[:R], ellipse[:A,B] or snowflake.
    #[arg(long)]
    pub surface: Option<String>,
    /// Triangle mesh (.off or .obj) used as the surface.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Grid spacing; a comma-separated list for converge.
    #[arg(long, value_delimiter = ',')]
    pub dx: Vec<f64>,
    /// Fixed time step, overriding --dt-policy.
    #[arg(long)]
    pub dt: Option<f64>,
    /// dx2/4, dx/4 or "explicit VALUE".
    #[arg(long)]
    pub dt_policy: Option<String>,
    /// auto, a number, or one-over-dt.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Interpolation degree.
    #[arg(long)]
    pub p: Option<usize>,
    /// forward-euler, rk4, backward-euler, bdf2 or imex-bdf2.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (directory for simulate). Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(
    name = "cpmol",
    version,
    about = "Closest point method of lines for surface PDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Error against the exact or reference solution over a list of grids.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Largest stable explicit step of u_t = Δu − u on the unit circle per γ.
    StabilityScan {
        #[command(flatten)]
        common: CommonArgs,
        /// Penalty values.
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// Penalty values given as γ·dx².
        #[arg(long, value_delimiter = ',')]
        gamma_dx2: Vec<f64>,
    },
    /// Heat-equation error on the unit circle as a function of γ·dx².
    GammaSweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma_dx2: Vec<f64>,
    },
    /// Curvature from the closest point function against the analytic value.
    CurvatureCheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Time-dependent run with snapshots (Gray–Scott, curvature diffusion).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10)]
        snapshots: usize,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        /// Gray–Scott feed rate F.
        #[arg(long)]
        feed: Option<f64>,
        /// Gray–Scott kill rate k.
        #[arg(long)]
        kill: Option<f64>,
        #[arg(long)]
        equal_diffusion: bool,
    },
}

fn parse<T: FromStr<Err = Error>>(v: &Option<String>) -> Result<Option<T>> {
    v.as_deref().map(str::parse).transpose()
}

fn single_dx(c: &CommonArgs) -> Result<f64> {
    match c.dx.as_slice() {
        [dx] if *dx > 0.0 => Ok(*dx),
        _ => Err(Error::InvalidParameter(
            "expected a single positive --dx".into(),
        )),
    }
}

fn surface_of(c: &CommonArgs) -> Result<Option<Surface>> {
    match (&c.surface, &c.mesh) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "give --surface or --mesh, not both".into(),
        )),
        (Some(s), None) => parse_surface(s).map(Some),
        (None, Some(m)) => Ok(Some(Surface::mesh(TriMesh::load(m)?))),
        (None, None) => Ok(None),
    }
}

fn dt_policy_of(c: &CommonArgs) -> Result<Option<DtPolicy>> {
    if let Some(dt) = c.dt {
        return Ok(Some(DtPolicy::Fixed(dt)));
    }
    parse(&c.dt_policy)
}

fn base_manifest(name: &str, c: &CommonArgs) -> RunManifest {
    let mut m = RunManifest::new(name);
    if let Some(p) = &c.problem {
        m = m.problem(p);
    }
    if let Some(seed) = c.seed {
        m = m.seed(seed);
    }
    m
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge { common: c } => {
            let kind: ProblemKind = c.problem.as_deref().unwrap_or("heat-circle").parse()?;
            let mut spec = ProblemSpec::new(kind);
            if let Some(s) = parse::<Scheme>(&c.scheme)? {
                spec = spec.with_scheme(s);
            }
            if let Some(p) = c.p {
                spec = spec.with_p(p);
            }
            if let Some(g) = parse::<GammaChoice>(&c.gamma)? {
                spec = spec.with_penalty(g.penalty());
            }
            if let Some(d) = dt_policy_of(&c)? {
                spec = spec.with_dt(d);
            }
            if let Some(t) = c.t_end {
                spec = spec.with_t_end(t);
            }
            if let Some(s) = surface_of(&c)? {
                if !kind.has_exact() {
                    spec.surface = s;
                } else {
                    return Err(Error::InvalidParameter(format!(
                        "{} has a fixed surface",
                        kind.name()
                    )));
                }
            }
            let m = base_manifest("converge", &c)
                .problem(kind.name())
                .param("dx", list(&c.dx))
                .param("scheme", spec.scheme.name())
                .param("p", spec.p)
                .param("gamma", c.gamma.as_deref().unwrap_or("auto"))
                .param("dt_policy", format!("{:?}", spec.dt_policy))
                .param("t_end", spec.t_end);
            cmd_converge(&spec, &c.dx, c.out.as_deref(), m).map(|_| ())
        }
        Command::StabilityScan {
            common: c,
            gammas,
            gamma_dx2,
        } => {
            let dx = single_dx(&c)?;
            let mut all = gammas;
            all.extend(gamma_dx2.iter().map(|g| g / (dx * dx)));
            let scheme = parse::<Scheme>(&c.scheme)?.unwrap_or(Scheme::ForwardEuler);
            let p = c.p.unwrap_or(3);
            let m = base_manifest("stability-scan", &c)
                .problem("shifted-heat-circle")
                .param("dx", dx)
                .param("scheme", scheme.name())
                .param("p", p)
                .param("gammas", list(&all));
            cmd_stability_scan(&all, dx, scheme, p, c.out.as_deref(), m).map(|_| ())
        }
        Command::GammaSweep {
            common: c,
            gamma_dx2,
        } => {
            let dx = single_dx(&c)?;
            let scheme = parse::<Scheme>(&c.scheme)?.unwrap_or(Scheme::ForwardEuler);
            let dt = dt_policy_of(&c)?.unwrap_or(DtPolicy::for_scheme(scheme));
            let p = c.p.unwrap_or(3);
            let t_end = c.t_end.unwrap_or(0.5);
            let m = base_manifest("gamma-sweep", &c)
                .problem("heat-circle")
                .param("dx", dx)
                .param("scheme", scheme.name())
                .param("dt_policy", format!("{dt:?}"))
                .param("p", p)
                .param("t_end", t_end);
            cmd_gamma_sweep(dx, dt, &gamma_dx2, scheme, p, t_end, c.out.as_deref(), m).map(|_| ())
        }
        Command::CurvatureCheck { common: c } => {
            let dx = single_dx(&c)?;
            let surface = surface_of(&c)?.unwrap_or_else(Surface::unit_circle);
            let p = c.p.unwrap_or(3);
            let m = base_manifest("curvature-check", &c)
                .param("surface", c.surface.as_deref().unwrap_or("circle"))
                .param("dx", dx)
                .param("p", p);
            cmd_curvature_check(&surface, dx, p, c.out.as_deref(), m).map(|_| ())
        }
        Command::Simulate {
            common: c,
            snapshots,
            amplitude,
            radius,
            feed,
            kill,
            equal_diffusion,
        } => {
            let kind: ProblemKind = c
                .problem
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("simulate needs --problem".into()))?
                .parse()?;
            let dx = single_dx(&c)?;
            let mut o = SimulateOptions::new(kind, dx)?;
            if let Some(s) = surface_of(&c)? {
                o.surface = s;
            }
            if let Some(s) = parse::<Scheme>(&c.scheme)? {
                o.scheme = s;
            }
            if let Some(d) = dt_policy_of(&c)? {
                o.dt = d.dt(dx);
            }
            if let Some(g) = parse::<GammaChoice>(&c.gamma)? {
                o.gamma = g;
            }
            o.p = c.p.unwrap_or(o.p);
            o.t_end = c.t_end.unwrap_or(o.t_end);
            o.seed = c.seed.unwrap_or(o.seed);
            o.snapshots = snapshots;
            o.amplitude = amplitude.unwrap_or(o.amplitude);
            o.radius = radius.unwrap_or(o.radius);
            o.feed = feed.unwrap_or(o.feed);
            o.kill = kill.unwrap_or(o.kill);
            o.equal_diffusion = equal_diffusion;
            let dir = c
                .out
                .clone()
                .ok_or_else(|| Error::InvalidParameter("simulate needs --out DIR".into()))?;
            let surface_name = match (&c.surface, &c.mesh) {
                (Some(s), _) => s.clone(),
                (None, Some(m)) => m.display().to_string(),
                (None, None) => "default".to_string(),
            };
            let m = base_manifest("simulate", &c)
                .problem(kind.name())
                .seed(o.seed)
                .param("surface", surface_name)
                .param("dx", o.dx)
                .param("dt", o.dt)
                .param("scheme", o.scheme.name())
                .param("p", o.p)
                .param("gamma", o.gamma)
                .param("t_end", o.t_end)
                .param("snapshots", o.snapshots)
                .param("amplitude", o.amplitude)
                .param("radius", o.radius)
                .param("feed", o.feed)
                .param("kill", o.kill)
                .param("equal_diffusion", o.equal_diffusion);
            let sim = cmd_simulate(&o, &dir, m)?;
            match sim.failure {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
    }
}

/// Honours `CPMOL_THREADS` by sizing the global thread pool.
pub fn configure_threads() {
    if let Some(n) = std::env::var("CPMOL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_choice_parses() {
        assert_eq!("auto".parse::<GammaChoice>().unwrap(), GammaChoice::Auto);
        assert_eq!(
            "one-over-dt".parse::<GammaChoice>().unwrap(),
            GammaChoice::OneOverDt
        );
        assert_eq!(
            "12.5".parse::<GammaChoice>().unwrap(),
            GammaChoice::Value(12.5)
        );
        assert!("lots".parse::<GammaChoice>().is_err());
    }

    #[test]
    fn surfaces_parse() {
        assert!(
            matches!(parse_surface("circle").unwrap(), Surface::Circle { radius, .. } if radius == 1.0)
        );
        assert!(
            matches!(parse_surface("sphere:2").unwrap(), Surface::Sphere { radius, .. } if radius == 2.0)
        );
        assert!(matches!(
            parse_surface("ellipse:3,1").unwrap(),
            Surface::Curve(_)
        ));
        assert!(parse_surface("ellipse:3").is_err());
        assert!(parse_surface("torus").is_err());
        assert!(parse_surface("sphere:-1").is_err());
    }

    #[test]
    fn manifest_ends_with_wall_time() {
        let h = RunManifest::new("converge")
            .problem("heat-circle")
            .param("dx", 0.1)
            .seed(7)
            .header();
        let lines: Vec<&str> = h.lines().collect();
        assert!(lines.iter().all(|l| l.starts_with("# ")));
        assert!(lines.last().unwrap().starts_with("# wall_time_s:"));
        assert!(h.contains("# seed: 7"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::NonFinite { step: 1, time: 0.1 }),
            EXIT_NUMERICAL
        );
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), EXIT_USAGE);
        assert_eq!(run(["cpmol", "stability-scan", "--dx", "0.1"]), EXIT_USAGE);
        assert_eq!(run(["cpmol", "bogus"]), EXIT_USAGE);
    }

    #[test]
    fn empty_gamma_list_is_a_usage_error() {
        let e = stability_scan(&[], 0.1, Scheme::ForwardEuler, 3).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_USAGE);
    }
}
