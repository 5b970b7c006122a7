//! Next-best-view selection and the active training loop.

mod refine;
mod run;
mod sampling;
mod select;

pub use refine::{refine_pose, RefineOutcome, Stencil};
pub use run::{evaluate_views, run_active_loop, LoopConfig, LoopError, RefineMode, RoundRecord};
pub use sampling::{fibonacci_shell, fibonacci_sphere, ring, spread_subset};
pub use select::{score_candidates, select_next, SelectionPolicy};
