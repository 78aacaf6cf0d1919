use std::sync::Arc;

use damopt_core::benchmarks::{control_error, optimize_case, ControlErrorReference};
use damopt_core::control::lsigma_apply;
use damopt_core::discretization::{SpaceTimeField, SpaceTimeMesh};
use damopt_core::{
    case_one, case_two, compute_multiplier, project_reference, solve_forward, Control,
    ControlNorm, ControlProblem, DofKind, Error, InitialDamage, Level, MassMode, ModelParams,
    OptimizerConfig, SolverConfig, TrackingTarget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Desired states given by discrete fields.
struct FieldTarget {
    phi: SpaceTimeField,
    d: SpaceTimeField,
}

impl TrackingTarget for FieldTarget {
    fn phi_desired(&self, t: f64, x: f64) -> f64 {
        self.phi.eval(t, x)
    }
    fn d_desired(&self, t: f64, x: f64) -> f64 {
        self.d.eval(t, x)
    }
}

fn small() -> (ModelParams, Arc<SpaceTimeMesh>) {
    (
        ModelParams::new(1.0, 1.0, 1.0, 0.25, 1.0).unwrap(),
        Arc::new(SpaceTimeMesh::uniform(1.0, 6, 0.0, 1.0, 8).unwrap()),
    )
}

fn random_control(mesh: &Arc<SpaceTimeMesh>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> SpaceTimeField {
    let mut l = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    l.as_mut_slice().iter_mut().for_each(|v| *v = rng.gen_range(lo..hi));
    l
}

#[test]
fn reachable_targets_give_a_stationary_reference() {
    let (params, mesh) = small();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let l = random_control(&mesh, &mut rng, 0.0, 12.0);
    let solver = SolverConfig { fp_tol: 1e-14, ..SolverConfig::default() };
    let opt = OptimizerConfig::default();
    let fwd = solve_forward(
        Control::Discrete(&l),
        InitialDamage::Analytic(&|_| 0.0),
        &params,
        &mesh,
        &solver.regularized(opt.epsilon),
    )
    .unwrap();
    let target = FieldTarget { phi: fwd.phi, d: fwd.d };
    let problem = ControlProblem::new(&params, mesh, &target, &|_| 0.0, l.clone(), ControlNorm::Full, &solver, &opt).unwrap();
    let eval = problem.evaluate(&l).unwrap();
    assert!(eval.value < 1e-20, "{}", eval.value);
    let gmax = eval.gradient.as_slice().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    assert!(gmax < 1e-9, "{gmax}");
    assert!(eval.adjoint.mu.as_slice().iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn zero_regularization_weight_is_rejected() {
    let (params, mesh) = small();
    let l_ref = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    let opt = OptimizerConfig { alpha_l: 0.0, ..OptimizerConfig::default() };
    let target = case_two();
    let r = ControlProblem::new(&params, mesh, &target, &|_| 0.0, l_ref, ControlNorm::Full, &SolverConfig::default(), &opt);
    assert!(matches!(r, Err(Error::InvalidParameter(_))));
}

#[test]
fn wrong_reference_shape_is_rejected() {
    let (params, mesh) = small();
    let l_ref = SpaceTimeField::zeros(mesh.clone(), DofKind::Dirichlet);
    let target = case_two();
    let r = ControlProblem::new(&params, mesh, &target, &|_| 0.0, l_ref, ControlNorm::Full, &SolverConfig::default(), &OptimizerConfig::default());
    assert!(r.is_err());
}

/// Adjoint gradient against central differences for a given solver setup.
fn check_gradient(solver: SolverConfig, norm: ControlNorm, seed: u64) -> f64 {
    let (params, mesh) = small();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = random_control(&mesh, &mut rng, 0.0, 12.0);
    let l_ref = l.axpy(1.0, &random_control(&mesh, &mut rng, -0.1, 0.1)).unwrap();
    let opt = OptimizerConfig { epsilon: 1e-3, ..OptimizerConfig::default() };
    let target = case_two();
    let problem = ControlProblem::new(&params, mesh.clone(), &target, &|_| 0.0, l_ref, norm, &solver, &opt).unwrap();
    let g = lsigma_apply(&problem.evaluate(&l).unwrap().gradient, norm);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in (0..l.as_slice().len()).step_by(5) {
        let mut e = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
        e.as_mut_slice()[k] = 1.0;
        let jp = problem.objective(&l.axpy(h, &e).unwrap()).unwrap();
        let jm = problem.objective(&l.axpy(-h, &e).unwrap()).unwrap();
        let fd = (jp - jm) / (2.0 * h);
        let ad = g.as_slice()[k];
        worst = worst.max((fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-12));
    }
    worst
}

#[test]
fn adjoint_gradient_consistent_mass_seminorm() {
    let solver = SolverConfig { fp_tol: 1e-14, ..SolverConfig::default() };
    let e = check_gradient(solver, ControlNorm::Seminorm, 3);
    assert!(e < 1e-5, "{e}");
}

#[test]
fn adjoint_gradient_lumped_mass() {
    let solver = SolverConfig { fp_tol: 1e-14, mass_mode: MassMode::Lumped, ..SolverConfig::default() };
    let e = check_gradient(solver, ControlNorm::Full, 4);
    assert!(e < 1e-5, "{e}");
}

#[test]
fn multiplier_follows_the_active_set() {
    let (_, mesh) = small();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_control(&mesh, &mut rng, -1.0, 1.0);
    let ones = SpaceTimeField::from_fn(mesh.clone(), DofKind::Free, |_, _| 1.0);
    let zeros = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    assert_eq!(compute_multiplier(&p, &ones).unwrap().as_slice(), p.as_slice());
    assert!(compute_multiplier(&p, &zeros).unwrap().as_slice().iter().all(|&v| v == 0.0));
    assert!(compute_multiplier(&zeros, &ones).unwrap().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn case_two_descent_reaches_the_tolerance() {
    let solver = SolverConfig::default();
    let opt = OptimizerConfig::default();
    let (data, res) = optimize_case(&case_two(), Level::new(32, 8), &solver, &opt, None).unwrap();
    assert!(res.converged);
    let h = &res.history;
    assert!(h.windows(2).all(|w| w[1].objective <= w[0].objective));
    assert!(res.final_grad_norm() <= opt.grad_tol_abs + opt.grad_tol_rel * h[0].grad_norm);
    // the minimizer of the shifted objective sits next to Π l̄
    let near = control_error(&case_two(), &res.l, &data.l_ref, ControlErrorReference::Projected, &solver).unwrap();
    let far = control_error(&case_two(), &res.l, &data.l_ref, ControlErrorReference::Analytic, &solver).unwrap();
    assert!(near < 1e-2 * far, "{near} {far}");
}

#[test]
fn objective_at_the_projected_optimum_decreases_under_refinement() {
    let solver = SolverConfig::default();
    let opt = OptimizerConfig::default();
    let case = case_one();
    let values: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 512, 0.0, 1.0, n).unwrap());
            let l_ref = project_reference(|t, x| case.l(t, x), &mesh);
            let problem = ControlProblem::new(&case.params, mesh, &case, &|_| 0.0, l_ref.clone(), case.norm_variant, &solver, &opt).unwrap();
            problem.objective(&l_ref).unwrap()
        })
        .collect();
    assert!(values[1] < values[0] && values[2] < values[1], "{values:?}");
}
