//! Manufactured cases, error norms, EOC tables and sweep drivers.

mod cases;
mod sweep;
mod table;

pub use cases::{case_one, case_two, residual_check, zero_case, CaseId, ManufacturedCase};
pub use sweep::{
    case_mesh, control_error, gradcheck, optimize_case, run_control_eoc, run_state_eoc, solve_case, state_errors,
    ControlErrorReference, ControlProblemData, GradcheckReport, Level, RefineMode,
};
pub use table::{eoc, error_l2l2, ConvergenceTable, TableKind, TableRow};
