//! Seeded Euler-Maruyama integration of the coupled, frozen, averaged and
//! limit-deviation equations.

mod field;
mod integrate;
mod noise;
mod path;

pub use field::{ConstField, FnField, SharedField, TyField};
pub use integrate::{
    check_stiffness, run_averaged, run_averaged_with_limit, run_frozen, run_multiscale, simulate_averaged,
    simulate_frozen, simulate_limit_deviation, simulate_multiscale, EXPLOSION_BOUND, STIFFNESS_FRACTION,
};
pub use noise::{generate_noise, IncrementStream, NoiseArrays, NoiseBundle};
pub(crate) use path::csv_err;
pub use path::{deviation_path, fmt17, Path, TimeGrid};
