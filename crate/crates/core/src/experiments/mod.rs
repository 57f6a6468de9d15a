//! Error curves, rate fits, distribution comparisons and the fluctuation
//! diagnostic.

mod config;
mod curve;
mod run;

pub use config::{thread_pool, ExperimentConfig, TestFunctional};
pub use curve::{fit_rate, CurvePoint, ErrorCurve, FitResult, ProfilePoint};
pub use run::{clt_compare, fluctuation_scaling, strong_error, weak_error, AveragedModel, CltReport, CltRow};
