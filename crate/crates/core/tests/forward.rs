use std::sync::Arc;

use damopt_core::benchmarks::{solve_case, state_errors};
use damopt_core::discretization::{assemble_mass, SpaceTimeField, SpaceTimeMesh};
use damopt_core::forward::control_loads;
use damopt_core::{
    case_one, case_two, check_contraction, solve_forward, ContractionLevel, Control, DofKind,
    Error, InitialDamage, Level, MassMode, MaxVariant, ModelParams, SolverConfig, StateOperators,
    TemporalMesh,
};
use proptest::prelude::*;

fn linf_l2(u: &SpaceTimeField, v: &SpaceTimeField) -> f64 {
    let mass = assemble_mass(&u.mesh().space, u.kind(), MassMode::Consistent);
    (0..u.num_rows())
        .map(|m| {
            let d: Vec<f64> = u.row(m).iter().zip(v.row(m)).map(|(a, b)| a - b).collect();
            mass.inner(&d, &d).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn zero_data_gives_zero_states() {
    let params = ModelParams::new(1.0, 50.0, 0.1, 12.5, 1.0).unwrap();
    let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 512, 0.0, 1.0, 16).unwrap());
    let fwd = solve_forward(
        Control::Analytic(&|_, _| 0.0),
        InitialDamage::Analytic(&|_| 0.0),
        &params,
        &mesh,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(fwd.phi.as_slice().iter().chain(fwd.d.as_slice()).all(|&v| v == 0.0));
    assert!(fwd.fp_iterations.iter().all(|&k| k == 1));
}

#[test]
fn contraction_examples() {
    let one = ModelParams::new(1.0, 50.0, 0.1, 12.5, 1.0).unwrap();
    let r = check_contraction(&one, &TemporalMesh::uniform(1.0, 512).unwrap());
    assert!((r.practical - 0.9765625).abs() < 1e-15);
    assert_eq!(r.level, ContractionLevel::Ok);
    let r = check_contraction(&one, &TemporalMesh::uniform(1.0, 128).unwrap());
    assert!((r.practical - 3.90625).abs() < 1e-15);
    assert_ne!(r.level, ContractionLevel::Ok);
    let two = ModelParams::new(1.0, 1.0, 0.1, 0.25, 1.0).unwrap();
    let r = check_contraction(&two, &TemporalMesh::uniform(1.0, 8).unwrap());
    assert_eq!(r.level, ContractionLevel::Warn);
}

#[test]
fn coarse_case_one_step_does_not_converge() {
    let cfg = SolverConfig { contraction_guard: false, ..SolverConfig::default() };
    let r = solve_case(&case_one(), Level::new(128, 64), &cfg);
    assert!(matches!(r, Err(Error::NonConvergence { .. })), "{r:?}");
    let r = solve_case(&case_one(), Level::new(128, 64), &SolverConfig::default());
    assert!(matches!(r, Err(Error::ContractionRefused { .. })), "{r:?}");
}

#[test]
fn case_two_state_errors_at_h_2_5() {
    let cfg = SolverConfig::default();
    let (_, fwd) = solve_case(&case_two(), Level::new(512, 32), &cfg).unwrap();
    let (ep, ed) = state_errors(&case_two(), &fwd, &cfg);
    assert!((ep / 3.39e-3 - 1.0).abs() < 0.15, "{ep}");
    assert!((ed / 3.01e-3 - 1.0).abs() < 0.15, "{ed}");
}

#[test]
fn fixed_point_step_matches_damped_picard() {
    // one slab of case-1 data well inside the active phase
    let case = case_one();
    let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 512, 0.0, 1.0, 64).unwrap());
    let cfg = SolverConfig::default();
    let l = |t: f64, x: f64| case.l(t, x);
    let fwd = solve_forward(Control::Analytic(&l), InitialDamage::Analytic(&|_| 0.0), &case.params, &mesh, &cfg).unwrap();
    let ops = StateOperators::new(&case.params, &mesh.space, &cfg.quad).unwrap();
    let loads = control_loads(Control::Analytic(&l), &ops, &mesh, &cfg).unwrap();
    let m = 400;
    let d_prev = fwd.d.row(m - 1).to_vec();
    let step = ops.step_fixed_point(&d_prev, m, mesh.time.tau(m), &loads[m], &cfg).unwrap();
    assert!(step.d.iter().zip(fwd.d.row(m)).all(|(a, b)| a == b));

    // damped iteration d ← (d + T(d))/2 from two starting points
    for shift in [0.0, 0.05] {
        let mut d: Vec<f64> = d_prev.iter().map(|v| v + shift).collect();
        for _ in 0..10_000 {
            let t = ops.picard_map(&d_prev, &d, mesh.time.tau(m), &loads[m], &cfg);
            let next: Vec<f64> = d.iter().zip(&t).map(|(a, b)| 0.5 * (a + b)).collect();
            let diff = ops.mass_norm(MassMode::Consistent, &next.iter().zip(&d).map(|(a, b)| a - b).collect::<Vec<_>>());
            d = next;
            if diff <= 1e-14 {
                break;
            }
        }
        let gap = ops.mass_norm(MassMode::Consistent, &d.iter().zip(&step.d).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(gap <= 10.0 * cfg.fp_tol, "start shift {shift}: {gap:e}");
    }
}

#[test]
fn discrete_damage_stays_bounded_under_refinement() {
    let cfg = SolverConfig::default();
    let norms: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&k| {
            let (_, fwd) = solve_case(&case_two(), Level::new(k, k), &cfg).unwrap();
            let zero = SpaceTimeField::zeros(fwd.d.mesh().clone(), DofKind::Free);
            linf_l2(&fwd.d, &zero)
        })
        .collect();
    assert!((norms[2] / norms[1] - 1.0).abs() < 0.05, "{norms:?}");
}

#[test]
fn consistent_and_lumped_agree_under_refinement() {
    let lumped = SolverConfig { mass_mode: MassMode::Lumped, ..SolverConfig::default() };
    let gaps: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let (_, a) = solve_case(&case_two(), Level::new(64, n), &SolverConfig::default()).unwrap();
            let (_, b) = solve_case(&case_two(), Level::new(64, n), &lumped).unwrap();
            linf_l2(&a.d, &b.d)
        })
        .collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn regularized_states_converge_linearly_in_epsilon() {
    let exact = solve_case(&case_two(), Level::new(64, 16), &SolverConfig::default()).unwrap().1;
    let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let cfg = SolverConfig { variant: MaxVariant::Regularized(eps), ..SolverConfig::default() };
            let fwd = solve_case(&case_two(), Level::new(64, 16), &cfg).unwrap().1;
            linf_l2(&fwd.d, &exact.d).max(linf_l2(&fwd.phi, &exact.phi))
        })
        .collect();
    for w in gaps.windows(2) {
        // O(ε): one decade of ε buys roughly one decade of error
        assert!(w[1] < 0.2 * w[0], "{gaps:?}");
    }
    assert!(gaps[0] <= 1e-2, "{gaps:?}");
}

fn small_problem() -> (ModelParams, Arc<SpaceTimeMesh>) {
    let params = ModelParams::new(1.0, 1.0, 0.1, 0.25, 1.0).unwrap();
    (params, Arc::new(SpaceTimeMesh::uniform(1.0, 16, 0.0, 1.0, 8).unwrap()))
}

fn control_from(mesh: &Arc<SpaceTimeMesh>, vals: &[f64]) -> SpaceTimeField {
    let mut l = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    l.as_mut_slice().iter_mut().zip(vals.iter().cycle()).for_each(|(a, b)| *a = *b);
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lumped_damage_never_decreases(vals in prop::collection::vec(-5.0f64..15.0, 1..40)) {
        let (params, mesh) = small_problem();
        let l = control_from(&mesh, &vals);
        let cfg = SolverConfig { mass_mode: MassMode::Lumped, ..SolverConfig::default() };
        let fwd = solve_forward(Control::Discrete(&l), InitialDamage::Analytic(&|_| 0.0), &params, &mesh, &cfg).unwrap();
        let mut prev = fwd.d0.clone();
        for m in 0..fwd.d.num_rows() {
            for (a, b) in fwd.d.row(m).iter().zip(&prev) {
                prop_assert!(*a >= *b - 1e-12);
            }
            prev = fwd.d.row(m).to_vec();
        }
    }

    #[test]
    fn states_depend_lipschitz_on_control(a in prop::collection::vec(-5.0f64..15.0, 1..40),
                                          b in prop::collection::vec(-5.0f64..15.0, 1..40)) {
        let (params, mesh) = small_problem();
        let (la, lb) = (control_from(&mesh, &a), control_from(&mesh, &b));
        let cfg = SolverConfig::default();
        let solve = |l: &SpaceTimeField| solve_forward(Control::Discrete(l), InitialDamage::Analytic(&|_| 0.0), &params, &mesh, &cfg).unwrap();
        let (fa, fb) = (solve(&la), solve(&lb));
        let dl = linf_l2(&la, &lb);
        // the solution map is Lipschitz; 10 is a generous constant for these data
        let gap = linf_l2(&fa.phi, &fb.phi).max(linf_l2(&fa.d, &fb.d));
        prop_assert!(gap <= 10.0 * dl + 1e-12, "{} vs {}", gap, dl);
    }
}
