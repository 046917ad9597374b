//! Method-of-lines time integration and an empirical stability scanner.

use std::ops::ControlFlow;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linsolve::{LinearSolver, LinearSolverKind};
use crate::sparse::SparseOperator;

/// Non-stiff part `N(t, v)`, written into the output slice.
pub type NonlinearFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// Source term `f(t)`, written into the output slice.
pub type ForcingFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// `dv/dt = M v + N(t, v) + f(t)`.
#[derive(Clone)]
pub struct SemiDiscreteSystem {
    pub linear: SparseOperator,
    pub nonlinear: Option<NonlinearFn>,
    pub forcing: Option<ForcingFn>,
}

impl std::fmt::Debug for SemiDiscreteSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemiDiscreteSystem")
            .field("dim", &self.dim())
            .field("nonlinear", &self.nonlinear.is_some())
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl SemiDiscreteSystem {
    pub fn linear(m: SparseOperator) -> Self {
        Self {
            linear: m,
            nonlinear: None,
            forcing: None,
        }
    }

    pub fn with_nonlinear(
        mut self,
        n: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.nonlinear = Some(Arc::new(n));
        self
    }

    pub fn with_forcing(mut self, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.forcing = Some(Arc::new(f));
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.nrows()
    }

    /// Full right-hand side `F(t, v)`.
    pub fn rhs(&self, t: f64, v: &[f64], out: &mut [f64]) {
        self.linear.matvec_into(v, out);
        self.add_explicit(t, v, out);
    }

    fn add_explicit(&self, t: f64, v: &[f64], out: &mut [f64]) {
        let mut tmp = Vec::new();
        if let Some(n) = &self.nonlinear {
            tmp.resize(v.len(), 0.0);
            n(t, v, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, x)| *o += x);
        }
        if let Some(f) = &self.forcing {
            tmp.clear();
            tmp.resize(v.len(), 0.0);
            f(t, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, x)| *o += x);
        }
    }

    fn check(&self, v0: &[f64]) -> Result<()> {
        self.linear.check_square(self.dim())?;
        if v0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v0.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    ForwardEuler,
    Rk4,
    BackwardEuler,
    Bdf2,
    ImexBdf2,
}

impl Scheme {
    pub fn is_explicit(self) -> bool {
        matches!(self, Scheme::ForwardEuler | Scheme::Rk4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ForwardEuler => "forward-euler",
            Scheme::Rk4 => "rk4",
            Scheme::BackwardEuler => "backward-euler",
            Scheme::Bdf2 => "bdf2",
            Scheme::ImexBdf2 => "imex-bdf2",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "forward-euler" | "fe" | "euler" => Scheme::ForwardEuler,
            "rk4" => Scheme::Rk4,
            "backward-euler" | "be" => Scheme::BackwardEuler,
            "bdf2" => Scheme::Bdf2,
            "imex-bdf2" | "imex" | "sbdf2" => Scheme::ImexBdf2,
            _ => return Err(Error::InvalidParameter(format!("unknown scheme '{s}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub linear_solver: LinearSolverKind,
}

impl StepperConfig {
    pub fn new(scheme: Scheme, dt: f64, t_end: f64) -> Self {
        Self {
            scheme,
            dt,
            t_end,
            linear_solver: LinearSolverKind::Direct,
        }
    }

    pub fn with_solver(mut self, kind: LinearSolverKind) -> Self {
        self.linear_solver = kind;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Uniform step count and size used by the implicit schemes, which keep a fixed
    /// step so the factorization can be reused.
    pub fn uniform_steps(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let n = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Result of an observed integration.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub v: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    /// The observer asked to stop before `t_end`.
    pub stopped: bool,
}

fn finite_or(step: usize, time: f64, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, time })
    }
}

/// Integrates to `t_end` and returns the final state.
pub fn integrate(sys: &SemiDiscreteSystem, v0: &[f64], cfg: &StepperConfig) -> Result<Vec<f64>> {
    integrate_observed(sys, v0, cfg, |_, _, _| ControlFlow::Continue(())).map(|o| o.v)
}

/// Integrates, calling `observer(step, t, v)` on the initial state and after every
/// step. Returning `ControlFlow::Break` ends the run early.
pub fn integrate_observed(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    cfg: &StepperConfig,
    mut observer: impl FnMut(usize, f64, &[f64]) -> ControlFlow<()>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    sys.check(v0)?;
    let obs: Observer = &mut observer;
    if obs(0, 0.0, v0).is_break() {
        return Ok(RunOutcome {
            v: v0.to_vec(),
            t: 0.0,
            steps: 0,
            stopped: true,
        });
    }
    match cfg.scheme {
        Scheme::ForwardEuler | Scheme::Rk4 => explicit(sys, v0, cfg, obs),
        Scheme::BackwardEuler => backward_euler_run(sys, v0, cfg, obs),
        Scheme::Bdf2 => {
            if sys.nonlinear.is_some() {
                return Err(Error::InvalidParameter(
                    "bdf2 needs a linear system; use imex-bdf2 for nonlinear terms".into(),
                ));
            }
            bdf2_run(sys, v0, cfg, obs)
        }
        Scheme::ImexBdf2 => bdf2_run(sys, v0, cfg, obs),
    }
}

pub fn forward_euler(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    integrate(
        sys,
        v0,
        &StepperConfig::new(Scheme::ForwardEuler, dt, t_end),
    )
}

pub fn rk4(sys: &SemiDiscreteSystem, v0: &[f64], dt: f64, t_end: f64) -> Result<Vec<f64>> {
    integrate(sys, v0, &StepperConfig::new(Scheme::Rk4, dt, t_end))
}

pub fn backward_euler(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    cfg: &StepperConfig,
) -> Result<Vec<f64>> {
    integrate(
        sys,
        v0,
        &StepperConfig {
            scheme: Scheme::BackwardEuler,
            ..*cfg
        },
    )
}

pub fn bdf2(sys: &SemiDiscreteSystem, v0: &[f64], cfg: &StepperConfig) -> Result<Vec<f64>> {
    integrate(
        sys,
        v0,
        &StepperConfig {
            scheme: Scheme::Bdf2,
            ..*cfg
        },
    )
}

pub fn imex_bdf2(sys: &SemiDiscreteSystem, v0: &[f64], cfg: &StepperConfig) -> Result<Vec<f64>> {
    integrate(
        sys,
        v0,
        &StepperConfig {
            scheme: Scheme::ImexBdf2,
            ..*cfg
        },
    )
}

type Observer<'a> = &'a mut dyn FnMut(usize, f64, &[f64]) -> ControlFlow<()>;

fn explicit(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    cfg: &StepperConfig,
    obs: Observer<'_>,
) -> Result<RunOutcome> {
    let n = v0.len();
    let mut v = v0.to_vec();
    let mut t = 0.0;
    let mut step = 0;
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut tmp) = if cfg.scheme == Scheme::Rk4 {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        Default::default()
    };
    // tolerate rounding in the accumulated time
    let eps = 1e-12 * cfg.t_end.max(1.0);
    while t < cfg.t_end - eps {
        let h = if t + cfg.dt > cfg.t_end - eps {
            cfg.t_end - t
        } else {
            cfg.dt
        };
        match cfg.scheme {
            Scheme::ForwardEuler => {
                sys.rhs(t, &v, &mut k1);
                for i in 0..n {
                    v[i] += h * k1[i];
                }
            }
            _ => {
                sys.rhs(t, &v, &mut k1);
                for i in 0..n {
                    tmp[i] = v[i] + 0.5 * h * k1[i];
                }
                sys.rhs(t + 0.5 * h, &tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = v[i] + 0.5 * h * k2[i];
                }
                sys.rhs(t + 0.5 * h, &tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = v[i] + h * k3[i];
                }
                sys.rhs(t + h, &tmp, &mut k4);
                for i in 0..n {
                    v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        step += 1;
        t = if h == cfg.dt { t + h } else { cfg.t_end };
        finite_or(step, t, &v)?;
        if obs(step, t, &v).is_break() {
            return Ok(RunOutcome {
                v,
                t,
                steps: step,
                stopped: true,
            });
        }
    }
    Ok(RunOutcome {
        v,
        t,
        steps: step,
        stopped: false,
    })
}

/// `c I − h M`
fn shifted(m: &SparseOperator, c: f64, h: f64) -> Result<SparseOperator> {
    SparseOperator::identity(m.nrows()).lin_comb(c, m, -h)
}

fn backward_euler_run(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    cfg: &StepperConfig,
    obs: Observer<'_>,
) -> Result<RunOutcome> {
    let (nsteps, h) = cfg.uniform_steps();
    let n = v0.len();
    let mut v = v0.to_vec();
    if nsteps == 0 {
        return Ok(RunOutcome {
            v,
            t: 0.0,
            steps: 0,
            stopped: false,
        });
    }
    let solver = LinearSolver::new(&shifted(&sys.linear, 1.0, h)?, cfg.linear_solver)?;
    let mut rhs = vec![0.0; n];
    let mut ex = vec![0.0; n];
    for step in 1..=nsteps {
        let t_old = (step - 1) as f64 * h;
        let t = step as f64 * h;
        rhs.copy_from_slice(&v);
        // nonlinear terms explicit at t_n, forcing implicit at t_{n+1}
        if let Some(nl) = &sys.nonlinear {
            nl(t_old, &v, &mut ex);
            rhs.iter_mut().zip(&ex).for_each(|(r, e)| *r += h * e);
        }
        if let Some(f) = &sys.forcing {
            f(t, &mut ex);
            rhs.iter_mut().zip(&ex).for_each(|(r, e)| *r += h * e);
        }
        v = solver.solve(&rhs, Some(&v))?;
        finite_or(step, t, &v)?;
        if obs(step, t, &v).is_break() {
            return Ok(RunOutcome {
                v,
                t,
                steps: step,
                stopped: true,
            });
        }
    }
    Ok(RunOutcome {
        v,
        t: cfg.t_end,
        steps: nsteps,
        stopped: false,
    })
}

/// BDF2, or SBDF2 when the system has a nonlinear part:
/// `(3/2 I − h M) v⁺ = 2vⁿ − ½vⁿ⁻¹ + h(2N(tₙ, vⁿ) − N(tₙ₋₁, vⁿ⁻¹)) + h f(tₙ₊₁)`.
/// The first step is a single (IMEX) backward-Euler step.
fn bdf2_run(
    sys: &SemiDiscreteSystem,
    v0: &[f64],
    cfg: &StepperConfig,
    obs: Observer<'_>,
) -> Result<RunOutcome> {
    let (nsteps, h) = cfg.uniform_steps();
    let n = v0.len();
    if nsteps == 0 {
        return Ok(RunOutcome {
            v: v0.to_vec(),
            t: 0.0,
            steps: 0,
            stopped: false,
        });
    }
    let mut prev = v0.to_vec();
    let mut n_prev = vec![0.0; n];
    let mut n_cur = vec![0.0; n];
    let mut fbuf = vec![0.0; n];

    // startup step
    let mut rhs = v0.to_vec();
    if let Some(nl) = &sys.nonlinear {
        nl(0.0, v0, &mut n_prev);
        rhs.iter_mut().zip(&n_prev).for_each(|(r, e)| *r += h * e);
    }
    if let Some(f) = &sys.forcing {
        f(h, &mut fbuf);
        rhs.iter_mut().zip(&fbuf).for_each(|(r, e)| *r += h * e);
    }
    let mut v = {
        let be = LinearSolver::new(&shifted(&sys.linear, 1.0, h)?, cfg.linear_solver)?;
        be.solve(&rhs, Some(v0))?
    };
    finite_or(1, h, &v)?;
    if obs(1, h, &v).is_break() {
        return Ok(RunOutcome {
            v,
            t: h,
            steps: 1,
            stopped: true,
        });
    }
    if nsteps == 1 {
        return Ok(RunOutcome {
            v,
            t: cfg.t_end,
            steps: 1,
            stopped: false,
        });
    }

    let solver = LinearSolver::new(&shifted(&sys.linear, 1.5, h)?, cfg.linear_solver)?;
    let mut guess = vec![0.0; n];
    for step in 2..=nsteps {
        let t_cur = (step - 1) as f64 * h;
        let t = step as f64 * h;
        for i in 0..n {
            rhs[i] = 2.0 * v[i] - 0.5 * prev[i];
        }
        if let Some(nl) = &sys.nonlinear {
            nl(t_cur, &v, &mut n_cur);
            for i in 0..n {
                rhs[i] += h * (2.0 * n_cur[i] - n_prev[i]);
            }
            std::mem::swap(&mut n_prev, &mut n_cur);
        }
        if let Some(f) = &sys.forcing {
            f(t, &mut fbuf);
            rhs.iter_mut().zip(&fbuf).for_each(|(r, e)| *r += h * e);
        }
        // linear extrapolation as the warm start
        for i in 0..n {
            guess[i] = 2.0 * v[i] - prev[i];
        }
        let next = solver.solve(&rhs, Some(&guess))?;
        prev = std::mem::replace(&mut v, next);
        finite_or(step, t, &v)?;
        if obs(step, t, &v).is_break() {
            return Ok(RunOutcome {
                v,
                t,
                steps: step,
                stopped: true,
            });
        }
    }
    Ok(RunOutcome {
        v,
        t: cfg.t_end,
        steps: nsteps,
        stopped: false,
    })
}

/// Steps taken per stability trial.
pub const STABILITY_STEPS: usize = 500;
/// Growth factor of `‖v‖∞` that counts as unstable.
pub const GROWTH_LIMIT: f64 = 10.0;
const STABILITY_SEED: u64 = 0x5eed_0001;

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Whether `v' = op v` stays bounded for [`STABILITY_STEPS`] explicit steps of `dt`.
pub fn is_stable(op: &SparseOperator, scheme: Scheme, dt: f64) -> bool {
    let n = op.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(STABILITY_SEED);
    let v0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let limit = GROWTH_LIMIT * max_norm(&v0);
    let sys = SemiDiscreteSystem::linear(op.clone());
    let cfg = StepperConfig::new(scheme, dt, dt * STABILITY_STEPS as f64);
    let out = integrate_observed(&sys, &v0, &cfg, |_, _, v| {
        if max_norm(v) > limit {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    matches!(out, Ok(o) if !o.stopped)
}

/// Bisects for the largest stable `dt` in `(0, dt_hi]` to relative precision `rel_tol`.
pub fn stability_boundary(
    op: &SparseOperator,
    scheme: Scheme,
    dt_hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !scheme.is_explicit() {
        return Err(Error::InvalidParameter(format!(
            "stability scan needs an explicit scheme, got {}",
            scheme.name()
        )));
    }
    if !(dt_hi > 0.0) {
        return Err(Error::InvalidParameter("dt_hi must be positive".into()));
    }
    if is_stable(op, scheme, dt_hi) {
        return Ok(dt_hi);
    }
    // find a stable lower bracket
    let mut lo = dt_hi;
    loop {
        lo *= 0.5;
        if is_stable(op, scheme, lo) {
            break;
        }
        if lo < dt_hi * 1e-12 {
            return Ok(0.0);
        }
    }
    let mut hi = 2.0 * lo;
    while (hi - lo) > rel_tol * lo {
        let mid = 0.5 * (lo + hi);
        if is_stable(op, scheme, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - e);
    (x * scale).round() / scale
}

/// Largest stable explicit step for `v' = op v`, to two significant digits.
/// Returns `dt_hi` when no instability is found.
pub fn max_stable_dt(op: &SparseOperator, scheme: Scheme, dt_hi: f64) -> Result<f64> {
    let b = stability_boundary(op, scheme, dt_hi, 1e-3)?;
    if b == dt_hi {
        return Ok(dt_hi);
    }
    Ok(round_sig(b, 2))
}

/// Forward-Euler step bound `min(dx²/2d, 2/γ)`.
pub fn predicted_fe_dt(dim: usize, dx: f64, gamma: f64) -> f64 {
    let diff = dx * dx / (2.0 * dim as f64);
    if gamma > 0.0 {
        diff.min(2.0 / gamma)
    } else {
        diff
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityScanReport {
    pub gamma: f64,
    pub dt_max_observed: f64,
    pub dt_predicted: f64,
}
