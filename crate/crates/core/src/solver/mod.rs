//! Newton–Krylov solver for the equation family and its `t`-continuation.

pub mod diagnostics;
pub mod family;
pub mod gmres;
pub mod newton;
pub mod path;
pub mod spec;
pub mod studies;

pub use diagnostics::Diagnostics;
pub use family::Instance;
pub use newton::{is_admissible, newton_solve, Guess, SolverState};
pub use path::{continuation_path, geometric_schedule, PathResult};
pub use spec::{EquationSpec, SolverConfig, UnknownMode};
pub use studies::{richardson_limit, stability_compare, uniqueness_gap, volume_lower_bound_check, StabilityRecord};
