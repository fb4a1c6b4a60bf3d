//! Slice-parallel execution of simulation plans.

mod kernel;
mod run;
mod slice;

pub use kernel::{aggregate, aggregate_supports, apply_kernel, apply_kernel_family, Kernel};
pub use run::{
    apply_deferred_contraction, dry_run, run_plan, run_program, violation_error, PhaseTrace, Trace,
};
pub use slice::{global_local_swap, SliceFamily, StateSlice};
