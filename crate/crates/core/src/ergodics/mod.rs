//! Invariant-measure sampling and cell-problem solvers for the frozen process.

mod func;
mod measure;
mod poisson;
mod quadrature;

pub use func::{PointClosure, PointFn, SharedPointFn, Shifted, Zero};
pub use measure::{
    center, centering_tolerance, check_centered, ergodic_average, sample_invariant, sample_invariant_from,
    Centered, EmpiricalMeasure, Estimate, SamplerParams,
};
pub(crate) use measure::{mean_stderr, shared};
pub use poisson::{
    default_gradient_step, poisson_gradient, solve_poisson_fk, FkParams, PoissonGradient, PoissonProblem,
    PoissonSolution, MIN_T_TRUNC,
};
pub(crate) use poisson::{poisson_gradient_serial, solve_poisson_fk_serial};
pub use quadrature::solve_poisson_quadrature_1d;
