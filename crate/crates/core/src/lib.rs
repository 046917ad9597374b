//! Surface PDEs by the penalty-stabilized closest point method of lines.
//!
//! A PDE posed on a curve or surface is extended into a narrow band of a
//! Cartesian grid, where it is discretized with ordinary finite differences and a
//! closest point interpolation matrix `E`. The side condition `v = Ev` is imposed
//! by a penalty term `−γ(v − Ev)`, which turns the problem into a plain system of
//! ODEs that any time stepper can integrate.
//!
//! ```no_run
//! use cpmol::prelude::*;
//!
//! let surface = Surface::unit_circle();
//! let dx = 0.05;
//! let grid = BandedGrid::build(&surface, dx, StencilSpec::laplacian(3)).unwrap();
//! let gamma = PenaltyConfig::recommended().gamma(grid.dim(), dx, None).unwrap();
//! let m = heat_operator(&grid, gamma, 3).unwrap();
//! assert_eq!(m.nrows(), grid.len());
//! ```

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments
)]

pub mod assembly;
pub mod band;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod operators;
pub mod problems;
pub mod sparse;
pub mod timestep;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::assembly::{
        biharmonic_operator, curvature_field, diffusivity_from_curvature, gs_diffusivity_ratio,
        heat_operator, poisson_system, solve_poisson, varcoef_operator, GammaPolicy,
        NullspaceHandling, PenaltyConfig,
    };
    pub use crate::band::{BandedGrid, StencilSpec};
    pub use crate::error::{Error, Result};
    pub use crate::geometry::{CpResult, Param, Point, Surface, TriMesh};
    pub use crate::linsolve::LinearSolverKind;
    pub use crate::operators::{extension_matrix, interpolate, laplacian};
    pub use crate::sparse::SparseOperator;
    pub use crate::timestep::{
        integrate, max_stable_dt, Scheme, SemiDiscreteSystem, StepperConfig,
    };
}
