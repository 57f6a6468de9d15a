//! Effective coefficients of the averaged and limit equations.

mod effective;
mod estimate;
mod lattice;
mod psd;
mod spec;

pub use effective::{
    build_limit_spec, collapse_time, diffusion_root, estimate_effective, EffectiveCoefficients,
    HomogenizeParams, Needs, Tabulated,
};
pub use estimate::{
    averaged_drift, cross_average, effective_zeta, grad_y_effective, CellContext, CellParams, CrossKind,
    ZetaEstimate,
};
pub use lattice::{LatticeField, LatticeSpec};
pub use psd::{psd_sqrt, ClampReport, CLAMP_FRACTION};
pub use spec::LimitSdeSpec;
