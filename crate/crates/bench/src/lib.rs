//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use damopt_core::benchmarks::case_mesh;
use damopt_core::{
    solve_forward, Control, ForwardSolution, InitialDamage, Level, ManufacturedCase, SolverConfig,
    SpaceTimeMesh,
};

/// Forward solve of `case` with its exact control on `level`.
pub fn forward(case: &ManufacturedCase, level: Level, cfg: &SolverConfig) -> (Arc<SpaceTimeMesh>, ForwardSolution) {
    let mesh = case_mesh(case, level).expect("valid level");
    let l = |t: f64, x: f64| case.l(t, x);
    let d0 = |x: f64| case.d0(x);
    let fwd = solve_forward(Control::Analytic(&l), InitialDamage::Analytic(&d0), &case.params, &mesh, cfg)
        .expect("benchmark levels converge");
    (mesh, fwd)
}
