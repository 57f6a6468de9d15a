//! Problem definitions, scale regimes, predicted rates and assumption audits.

mod assumptions;
mod regime;
mod system;

pub use assumptions::{verify_assumptions, AssumptionReport, AuditParams};
pub use regime::{
    classify_averaging_regime, classify_deviation_regime, predicted_fluctuation_rate, predicted_strong_rate,
    predicted_weak_rate, DevTag, DeviationRegime, RateModel, RegimeClass, ScaleSchedule, EXP_TOL,
};
pub use system::{MultiscaleSystem, Scratch, SystemSpec};
