use std::sync::Arc;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cases::{case_two, ManufacturedCase};
use super::table::{error_l2l2, ConvergenceTable, TableKind};
use crate::control::{
    armijo_descent, lsigma_apply, lsigma_inner, project_reference, ControlProblem, OptimResult,
    OptimizerConfig,
};
use crate::discretization::{
    assemble_mass, DofKind, MassMode, ModelParams, SpaceTimeField, SpaceTimeMesh,
};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, Control, ForwardSolution, InitialDamage, SolverConfig};

/// One mesh level: M time slabs and N spatial elements on the unit domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Level {
    pub m: usize,
    pub n: usize,
}

impl Level {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n }
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefineMode {
    Time,
    Space,
}

/// What the recovered control is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlErrorReference {
    /// The analytic optimal control, by quadrature.
    Analytic,
    /// Its discrete representative Π l̄.
    Projected,
}

pub fn case_mesh(case: &ManufacturedCase, level: Level) -> Result<Arc<SpaceTimeMesh>> {
    let (a, b) = case.domain();
    Ok(Arc::new(SpaceTimeMesh::uniform(
        case.t_final(),
        level.m,
        a,
        b,
        level.n,
    )?))
}

/// Forward solve of a manufactured case driven by its exact control.
pub fn solve_case(
    case: &ManufacturedCase,
    level: Level,
    cfg: &SolverConfig,
) -> Result<(Arc<SpaceTimeMesh>, ForwardSolution)> {
    let mesh = case_mesh(case, level)?;
    let l = |t: f64, x: f64| case.l(t, x);
    let d0 = |x: f64| case.d0(x);
    let fwd = solve_forward(
        Control::Analytic(&l),
        InitialDamage::Analytic(&d0),
        &case.params,
        &mesh,
        cfg,
    )?;
    Ok((mesh, fwd))
}

/// (‖φ − φ_h‖, ‖d − d_h‖) in L²(I; L²(Ω)).
pub fn state_errors(case: &ManufacturedCase, fwd: &ForwardSolution, cfg: &SolverConfig) -> (f64, f64) {
    let (qt, qs) = (cfg.quad.q_time, cfg.quad.q_space);
    (
        error_l2l2(&fwd.phi, &|t, x| case.phi(t, x), qt, qs),
        error_l2l2(&fwd.d, &|t, x| case.d(t, x), qt, qs),
    )
}

fn pool(width: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(width)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

fn keep_failures(r: Result<Vec<f64>>) -> Result<Option<Vec<f64>>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_solver_failure() => {
            info!("level marked not converged: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// State errors for every level, levels run concurrently on `width` threads.
pub fn run_state_eoc(
    case: &ManufacturedCase,
    mode: RefineMode,
    levels: &[Level],
    cfg: &SolverConfig,
    width: usize,
) -> Result<ConvergenceTable> {
    let rows = pool(width)?.install(|| {
        levels
            .par_iter()
            .map(|&lv| {
                let r = solve_case(case, lv, cfg).map(|(_, fwd)| {
                    let (ep, ed) = state_errors(case, &fwd, cfg);
                    info!("{} M={} N={}: err_phi={ep:.3e} err_d={ed:.3e}", case.label, lv.m, lv.n);
                    vec![ep, ed]
                });
                keep_failures(r).map(|e| (lv.tau(), lv.h(), e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ConvergenceTable::new(
        TableKind::State,
        format!("{} states", case.label),
        mode == RefineMode::Time,
        rows,
    ))
}

/// Runs gradient descent for `case` on one level, from `l_init` or zero.
pub fn optimize_case(
    case: &ManufacturedCase,
    level: Level,
    solver: &SolverConfig,
    opt: &OptimizerConfig,
    l_init: Option<&SpaceTimeField>,
) -> Result<(ControlProblemData, OptimResult)> {
    let mesh = case_mesh(case, level)?;
    let l_ref = project_reference(|t, x| case.l(t, x), &mesh);
    let d0 = |x: f64| case.d0(x);
    let problem = ControlProblem::new(
        &case.params,
        mesh.clone(),
        case,
        &d0,
        l_ref.clone(),
        case.norm_variant,
        solver,
        opt,
    )?;
    let start = match l_init {
        Some(l) => l.clone(),
        None => problem.zero_control(),
    };
    let res = armijo_descent(&problem, opt, &start)?;
    Ok((ControlProblemData { mesh, l_ref }, res))
}

/// Mesh and projected reference control of an optimization run.
#[derive(Debug, Clone)]
pub struct ControlProblemData {
    pub mesh: Arc<SpaceTimeMesh>,
    pub l_ref: SpaceTimeField,
}

/// ‖l̄ − l‖ in L²(I; L²(Ω)).
pub fn control_error(
    case: &ManufacturedCase,
    l: &SpaceTimeField,
    l_ref: &SpaceTimeField,
    reference: ControlErrorReference,
    cfg: &SolverConfig,
) -> Result<f64> {
    match reference {
        ControlErrorReference::Analytic => Ok(error_l2l2(
            l,
            &|t, x| case.l(t, x),
            cfg.quad.q_time,
            cfg.quad.q_space,
        )),
        ControlErrorReference::Projected => {
            let diff = l.axpy(-1.0, l_ref)?;
            let mass = assemble_mass(&l.mesh().space, l.kind(), MassMode::Consistent);
            let tm = &l.mesh().time;
            Ok((0..diff.num_rows())
                .map(|m| tm.tau(m) * mass.inner(diff.row(m), diff.row(m)))
                .sum::<f64>()
                .sqrt())
        }
    }
}

/// Control errors for every level of an optimization sweep.
pub fn run_control_eoc(
    case: &ManufacturedCase,
    mode: RefineMode,
    levels: &[Level],
    solver: &SolverConfig,
    opt: &OptimizerConfig,
    reference: ControlErrorReference,
    width: usize,
) -> Result<ConvergenceTable> {
    let rows = pool(width)?.install(|| {
        levels
            .par_iter()
            .map(|&lv| {
                let r = optimize_case(case, lv, solver, opt, None).and_then(|(data, res)| {
                    let e = control_error(case, &res.l, &data.l_ref, reference, solver)?;
                    info!(
                        "{} M={} N={}: err_l={e:.3e} after {} iterations (converged: {})",
                        case.label,
                        lv.m,
                        lv.n,
                        res.history.len() - 1,
                        res.converged
                    );
                    Ok(vec![e])
                });
                keep_failures(r).map(|e| (lv.tau(), lv.h(), e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ConvergenceTable::new(
        TableKind::Control,
        format!("{} controls", case.label),
        mode == RefineMode::Time,
        rows,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    /// Worst relative error over single-coefficient derivatives.
    pub max_rel_dof: f64,
    /// Worst relative error over random directions.
    pub max_rel_direction: f64,
    pub dofs: usize,
    pub directions: usize,
}

impl GradcheckReport {
    pub fn max_rel(&self) -> f64 {
        self.max_rel_dof.max(self.max_rel_direction)
    }
}

/// Compares adjoint derivatives of the regularized objective with central
/// differences on an M×N mesh, at a random control for which part of the
/// domain is active. The model uses δ = 1 so that the coarse time step stays
/// inside the contraction range of the state solver.
pub fn gradcheck(
    m: usize,
    n: usize,
    epsilon: f64,
    fd_step: f64,
    dofs: usize,
    directions: usize,
    seed: u64,
) -> Result<GradcheckReport> {
    let params = ModelParams::new(1.0, 1.0, 1.0, 0.25, 1.0)?;
    let target = case_two();
    let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, m, 0.0, 1.0, n)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_field = |lo: f64, hi: f64| {
        let mut f = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
        f.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(lo..hi));
        f
    };
    let l = random_field(0.0, 12.0);
    let l_ref = l.axpy(1.0, &random_field(-0.05, 0.05))?;
    let dirs: Vec<SpaceTimeField> = (0..directions).map(|_| random_field(-1.0, 1.0)).collect();
    let solver = SolverConfig {
        fp_tol: 1e-14,
        fp_maxit: 20_000,
        ..SolverConfig::default()
    };
    let opt = OptimizerConfig {
        epsilon,
        ..OptimizerConfig::default()
    };
    let norm = crate::control::ControlNorm::Full;
    let problem = ControlProblem::new(&params, mesh.clone(), &target, &|_| 0.0, l_ref, norm, &solver, &opt)?;
    let eval = problem.evaluate(&l)?;
    let euclid = lsigma_apply(&eval.gradient, norm);

    let rel = |fd: f64, ad: f64| (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-300);
    let central = |dir: &SpaceTimeField| -> Result<f64> {
        let jp = problem.objective(&l.axpy(fd_step, dir)?)?;
        let jm = problem.objective(&l.axpy(-fd_step, dir)?)?;
        Ok((jp - jm) / (2.0 * fd_step))
    };

    let total = l.as_slice().len();
    let mut picks: Vec<usize> = (0..total).collect();
    for i in 0..dofs.min(total) {
        let j = rng.gen_range(i..total);
        picks.swap(i, j);
    }
    let mut max_rel_dof: f64 = 0.0;
    for &k in &picks[..dofs.min(total)] {
        let mut e = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
        e.as_mut_slice()[k] = 1.0;
        max_rel_dof = max_rel_dof.max(rel(central(&e)?, euclid.as_slice()[k]));
    }
    let mut max_rel_direction: f64 = 0.0;
    for d in &dirs {
        let ad = lsigma_inner(&eval.gradient, d, norm)?;
        max_rel_direction = max_rel_direction.max(rel(central(d)?, ad));
    }
    Ok(GradcheckReport {
        max_rel_dof,
        max_rel_direction,
        dofs: dofs.min(total),
        directions,
    })
}
