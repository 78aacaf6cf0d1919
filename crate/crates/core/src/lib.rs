//! Space-time finite elements for a viscous damage model with a nonsmooth
//! driving force: dG(0)×P1 state solver, exact discrete adjoint, gradient
//! descent for the tracking-type optimal control problem, and manufactured
//! benchmarks with convergence tables.

pub mod adjoint;
pub mod benchmarks;
pub mod control;
pub mod discretization;
pub mod error;
pub mod forward;
pub mod nonsmooth;

pub use adjoint::{compute_multiplier, solve_adjoint, AdjointSolution};
pub use benchmarks::{
    case_one, case_two, eoc, error_l2l2, residual_check, run_control_eoc, run_state_eoc,
    zero_case, CaseId, ControlErrorReference, ConvergenceTable, Level, ManufacturedCase,
    RefineMode, TableRow,
};
pub use control::{
    armijo_descent, lsigma_inner, project_reference, riesz_gradient, ControlNorm, ControlProblem,
    DescentProblem, IterationRecord, OptimResult, OptimizerConfig, TrackingTarget,
};
pub use discretization::{
    DofKind, MassMode, ModelParams, QuadratureConfig, SpaceTimeField, SpaceTimeMesh,
    SpatialMesh1D, TemporalMesh,
};
pub use error::{Error, Result};
pub use forward::{
    check_contraction, solve_forward, Control, LoadRule, ContractionLevel, ContractionReport,
    ForwardSolution, InitialDamage, SolverConfig, StateOperators, Stepper,
};
pub use nonsmooth::{diff_at_most, max_eps, max_eps_prime, max_plus, MaxVariant, RegularizationConfig};
