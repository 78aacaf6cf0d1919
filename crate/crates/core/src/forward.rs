//! Slab-by-slab solution of the fully discrete state system: an elliptic
//! solve for φ_m coupled to the nonsmooth damage update for d_m.

use std::sync::Arc;

use log::warn;

use crate::discretization::{
    assemble_mass, assemble_stiffness, check_len, l2_project_space, time_average_load, DofKind,
    MassMode, ModelParams, QuadratureConfig, SpaceTimeField, SpaceTimeMesh, SpatialMesh1D,
    SpatialQuadrature, TemporalMesh, TridiagFactor, TridiagMatrix,
};
use crate::error::{ensure, Error, Result};
use crate::nonsmooth::{driver_arg_nodal, MaxVariant};

/// How an analytic control becomes a slab load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadRule {
    /// Nodal interpolation of l(t_m, ·) at the right slab end, all nodes.
    Interpolated,
    /// L² load of the slab average (1/τ_m)∫ l dt.
    SlabAverage,
}

/// Which per-slab solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    /// Picard iteration on d with the elliptic solve inside.
    FixedPoint,
    /// Outer iteration on φ with the exact nodal d-update (lumped, exact max only).
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute tolerance on the mass-weighted increment.
    pub fp_tol: f64,
    pub fp_maxit: usize,
    pub mass_mode: MassMode,
    pub variant: MaxVariant,
    pub stepper: Stepper,
    pub quad: QuadratureConfig,
    pub load: LoadRule,
    /// Refuse time steps with τβ/δ >= 2 before iterating.
    pub contraction_guard: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            fp_tol: 1e-12,
            fp_maxit: 5000,
            mass_mode: MassMode::Consistent,
            variant: MaxVariant::Exact,
            stepper: Stepper::FixedPoint,
            quad: QuadratureConfig::default(),
            load: LoadRule::Interpolated,
            contraction_guard: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.fp_tol > 0.0, || format!("fp_tol must be > 0, got {}", self.fp_tol))?;
        ensure(self.fp_maxit >= 1, || "fp_maxit must be >= 1".into())?;
        QuadratureConfig::new(self.quad.q_time, self.quad.q_space)?;
        self.variant.validate()?;
        if self.stepper == Stepper::ClosedForm {
            ensure(self.mass_mode == MassMode::Lumped, || {
                "closed-form stepper needs lumped mass".into()
            })?;
            ensure(self.variant == MaxVariant::Exact, || {
                "closed-form stepper needs the exact max".into()
            })?;
        }
        Ok(())
    }

    pub fn regularized(mut self, eps: f64) -> Self {
        self.variant = MaxVariant::Regularized(eps);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionLevel {
    Ok,
    /// τβ/δ in [1, 2): may still converge.
    Warn,
    /// τβ/δ >= 2: the solver refuses.
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    /// max_m τ_m β/δ.
    pub practical: f64,
    /// max_m τ_m (β/δ)(1 + L_Φ) with L_Φ = 1.
    pub sufficient: f64,
    pub level: ContractionLevel,
}

pub fn check_contraction(params: &ModelParams, tmesh: &TemporalMesh) -> ContractionReport {
    let practical = tmesh.tau_max() * params.beta_over_delta();
    let level = if practical >= 2.0 {
        ContractionLevel::Error
    } else if practical >= 1.0 {
        ContractionLevel::Warn
    } else {
        ContractionLevel::Ok
    };
    ContractionReport {
        practical,
        sufficient: 2.0 * practical,
        level,
    }
}

/// Solution of one slab.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabStep {
    pub phi: Vec<f64>,
    pub d: Vec<f64>,
    pub iterations: usize,
}

/// Spatial operators shared by every slab of a solve.
#[derive(Debug, Clone)]
pub struct StateOperators {
    params: ModelParams,
    quad: SpatialQuadrature,
    mass: TridiagMatrix,
    mass_factor: TridiagFactor,
    lumped: Vec<f64>,
    elliptic: TridiagFactor,
    elliptic_matrix: TridiagMatrix,
    num_nodes: usize,
}

impl StateOperators {
    pub fn new(params: &ModelParams, mesh: &SpatialMesh1D, quad: &QuadratureConfig) -> Result<Self> {
        let mass = assemble_mass(mesh, DofKind::Free, MassMode::Consistent);
        let lumped = assemble_mass(mesh, DofKind::Free, MassMode::Lumped).diagonal();
        let elliptic_matrix = assemble_stiffness(mesh, DofKind::Dirichlet)
            .scaled(params.alpha)
            .add_scaled(params.beta, &mass.view(DofKind::Dirichlet, DofKind::Dirichlet));
        Ok(Self {
            params: *params,
            quad: SpatialQuadrature::new(mesh, quad.q_space),
            mass_factor: mass.factor()?,
            mass,
            lumped,
            elliptic: elliptic_matrix.factor()?,
            elliptic_matrix,
            num_nodes: mesh.num_nodes(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn quadrature(&self) -> &SpatialQuadrature {
        &self.quad
    }

    /// Consistent mass on all nodes; other dof views via [`TridiagMatrix::view`].
    pub fn mass(&self) -> &TridiagMatrix {
        &self.mass
    }

    pub fn mass_factor(&self) -> &TridiagFactor {
        &self.mass_factor
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// αK + βM on interior nodes.
    pub fn elliptic_matrix(&self) -> &TridiagMatrix {
        &self.elliptic_matrix
    }

    pub fn elliptic_factor(&self) -> &TridiagFactor {
        &self.elliptic
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Solves (αK + βM)φ = βM d + load on interior nodes.
    pub fn elliptic_solve(&self, load: &[f64], d_slab: &[f64]) -> Vec<f64> {
        let mut phi = self.mass.view(DofKind::Dirichlet, DofKind::Free).matvec(d_slab);
        for (p, l) in phi.iter_mut().zip(load) {
            *p = self.params.beta * *p + l;
        }
        self.elliptic.solve_in_place(&mut phi);
        phi
    }

    /// ‖v‖ in the mass norm matching `mode`.
    pub fn mass_norm(&self, mode: MassMode, v: &[f64]) -> f64 {
        match mode {
            MassMode::Consistent => self.mass.inner(v, v).max(0.0).sqrt(),
            MassMode::Lumped => v
                .iter()
                .zip(&self.lumped)
                .map(|(a, w)| w * a * a)
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Increment (τ/δ) M⁻¹ (max(w), ψ) of the damage update for a given (φ, d).
    fn damage_increment(&self, phi: &[f64], d: &[f64], tau: f64, cfg: &SolverConfig) -> Vec<f64> {
        let a = tau / self.params.delta;
        match cfg.mass_mode {
            MassMode::Consistent => {
                let mut w = self.quad.interpolate(DofKind::Dirichlet, phi);
                let dq = self.quad.interpolate(DofKind::Free, d);
                for (p, dv) in w.iter_mut().zip(&dq) {
                    *p = cfg.variant.apply(-self.params.beta * (dv - *p) - self.params.r);
                }
                let mut inc = self.quad.load_from_values(DofKind::Free, &w);
                self.mass_factor.solve_in_place(&mut inc);
                inc.iter_mut().for_each(|v| *v *= a);
                inc
            }
            MassMode::Lumped => driver_arg_nodal(phi, d, &self.params)
                .into_iter()
                .map(|w| a * cfg.variant.apply(w))
                .collect(),
        }
    }

    /// One Picard sweep T(d) = d_prev + (τ/δ) M⁻¹(max(w(φ(d), d)), ψ).
    pub fn picard_map(&self, d_prev: &[f64], d: &[f64], tau: f64, load: &[f64], cfg: &SolverConfig) -> Vec<f64> {
        let phi = self.elliptic_solve(load, d);
        let inc = self.damage_increment(&phi, d, tau, cfg);
        d_prev.iter().zip(&inc).map(|(a, b)| a + b).collect()
    }

    /// Picard iteration d ← d_prev + (τ/δ) M⁻¹(max(w(φ(d), d)), ψ) starting
    /// from d_prev, stopped on the mass-norm increment.
    pub fn step_fixed_point(
        &self,
        d_prev: &[f64],
        slab: usize,
        tau: f64,
        load: &[f64],
        cfg: &SolverConfig,
    ) -> Result<SlabStep> {
        check_len("d_prev", self.num_nodes, d_prev.len())?;
        check_len("slab load", self.num_nodes - 2, load.len())?;
        let mut d = d_prev.to_vec();
        let mut last = f64::INFINITY;
        for k in 1..=cfg.fp_maxit {
            let next = self.picard_map(d_prev, &d, tau, load, cfg);
            let diff: Vec<f64> = next.iter().zip(&d).map(|(a, b)| a - b).collect();
            last = self.mass_norm(cfg.mass_mode, &diff);
            d = next;
            if !last.is_finite() {
                break;
            }
            if last <= cfg.fp_tol {
                let phi = self.elliptic_solve(load, &d);
                return Ok(SlabStep { phi, d, iterations: k });
            }
        }
        Err(self.non_convergence(slab, tau, cfg.fp_maxit, last))
    }

    /// Lumped stepper that eliminates the inner d-iteration: given φ, the
    /// nodal equation d = d_prev + (τ/δ) max(-β(d - φ) - r) is solved exactly.
    pub fn step_closed_form(
        &self,
        d_prev: &[f64],
        slab: usize,
        tau: f64,
        load: &[f64],
        cfg: &SolverConfig,
    ) -> Result<SlabStep> {
        check_len("d_prev", self.num_nodes, d_prev.len())?;
        check_len("slab load", self.num_nodes - 2, load.len())?;
        let p = &self.params;
        let bd = p.beta_over_delta() * tau;
        let n = self.num_nodes;
        let mut d = d_prev.to_vec();
        let mut last = f64::INFINITY;
        for k in 1..=cfg.fp_maxit {
            let phi = self.elliptic_solve(load, &d);
            let omega = driver_arg_nodal(&phi, d_prev, p);
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    if omega[i] <= 0.0 {
                        d_prev[i]
                    } else {
                        let phi_i = if i == 0 || i == n - 1 { 0.0 } else { phi[i - 1] };
                        (d_prev[i] + bd * phi_i - tau / p.delta * p.r) / (1.0 + bd)
                    }
                })
                .collect();
            let diff: Vec<f64> = next.iter().zip(&d).map(|(a, b)| a - b).collect();
            last = self.mass_norm(MassMode::Lumped, &diff);
            d = next;
            if !last.is_finite() {
                break;
            }
            if last <= cfg.fp_tol {
                let phi = self.elliptic_solve(load, &d);
                return Ok(SlabStep { phi, d, iterations: k });
            }
        }
        Err(self.non_convergence(slab, tau, cfg.fp_maxit, last))
    }

    fn non_convergence(&self, slab: usize, tau: f64, iterations: usize, increment: f64) -> Error {
        Error::NonConvergence {
            slab,
            iterations,
            increment,
            margin: tau * self.params.beta_over_delta(),
        }
    }

    pub fn step(
        &self,
        d_prev: &[f64],
        slab: usize,
        tau: f64,
        load: &[f64],
        cfg: &SolverConfig,
    ) -> Result<SlabStep> {
        match cfg.stepper {
            Stepper::FixedPoint => self.step_fixed_point(d_prev, slab, tau, load, cfg),
            Stepper::ClosedForm => self.step_closed_form(d_prev, slab, tau, load, cfg),
        }
    }
}

/// Elliptic sub-solve (αK + βM)φ = βM d + load on a fresh operator set.
pub fn elliptic_solve(
    load: &[f64],
    d_slab: &[f64],
    params: &ModelParams,
    mesh: &SpatialMesh1D,
) -> Result<Vec<f64>> {
    check_len("load (interior nodes)", mesh.num_dofs(DofKind::Dirichlet), load.len())?;
    check_len("d slab (all nodes)", mesh.num_nodes(), d_slab.len())?;
    let ops = StateOperators::new(params, mesh, &QuadratureConfig::default())?;
    Ok(ops.elliptic_solve(load, d_slab))
}

/// Control entering the elliptic equation.
#[derive(Clone, Copy)]
pub enum Control<'a> {
    /// dG(0)×P1 control; slab m uses its row directly.
    Discrete(&'a SpaceTimeField),
    /// Analytic control, discretized per [`LoadRule`].
    Analytic(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

/// Initial damage: analytic (L²-projected) or given nodal coefficients.
#[derive(Clone, Copy)]
pub enum InitialDamage<'a> {
    Analytic(&'a (dyn Fn(f64) -> f64 + Sync)),
    Coefficients(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    /// φ on interior nodes.
    pub phi: SpaceTimeField,
    /// d on all nodes.
    pub d: SpaceTimeField,
    /// Projected initial damage d_0.
    pub d0: Vec<f64>,
    pub fp_iterations: Vec<usize>,
    pub contraction_margin: f64,
}

/// Load vectors (l, ψ) of every slab on interior nodes.
pub fn control_loads(
    control: Control<'_>,
    ops: &StateOperators,
    mesh: &SpaceTimeMesh,
    cfg: &SolverConfig,
) -> Result<Vec<Vec<f64>>> {
    let m = mesh.time.num_slabs();
    let (cfg_load, quad) = (cfg.load, &cfg.quad);
    match control {
        Control::Discrete(l) => {
            check_len("control rows", m, l.num_rows())?;
            check_len("control cols", mesh.space.num_dofs(l.kind()), l.num_cols())?;
            let coupling = ops.mass().view(DofKind::Dirichlet, l.kind());
            Ok((0..m).map(|k| coupling.matvec(l.row(k))).collect())
        }
        Control::Analytic(f) => Ok(match cfg_load {
            LoadRule::Interpolated => {
                let coupling = ops.mass().view(DofKind::Dirichlet, DofKind::Free);
                let nodes = mesh.space.nodes();
                (0..m)
                    .map(|k| {
                        let t = mesh.time.slab(k).1;
                        let vals: Vec<f64> = nodes.iter().map(|&x| f(t, x)).collect();
                        coupling.matvec(&vals)
                    })
                    .collect()
            }
            LoadRule::SlabAverage => (0..m)
                .map(|k| {
                    time_average_load(f, k, &mesh.time, ops.quadrature(), DofKind::Dirichlet, quad.q_time)
                })
                .collect(),
        }),
    }
}

pub fn solve_forward(
    control: Control<'_>,
    d0: InitialDamage<'_>,
    params: &ModelParams,
    mesh: &Arc<SpaceTimeMesh>,
    cfg: &SolverConfig,
) -> Result<ForwardSolution> {
    let ops = StateOperators::new(params, &mesh.space, &cfg.quad)?;
    solve_forward_with(&ops, control, d0, mesh, cfg)
}

/// [`solve_forward`] reusing prebuilt spatial operators.
pub fn solve_forward_with(
    ops: &StateOperators,
    control: Control<'_>,
    d0: InitialDamage<'_>,
    mesh: &Arc<SpaceTimeMesh>,
    cfg: &SolverConfig,
) -> Result<ForwardSolution> {
    cfg.validate()?;
    let report = check_contraction(ops.params(), &mesh.time);
    match report.level {
        ContractionLevel::Error if cfg.contraction_guard => {
            return Err(Error::ContractionRefused {
                margin: report.practical,
            })
        }
        ContractionLevel::Ok => {}
        _ => warn!(
            "tau*beta/delta = {:.4} >= 1: fixed-point iteration may not converge",
            report.practical
        ),
    }
    let d0 = match d0 {
        InitialDamage::Analytic(f) => l2_project_space(f, &mesh.space, DofKind::Free, &cfg.quad)?,
        InitialDamage::Coefficients(c) => {
            check_len("d0 coefficients", mesh.space.num_nodes(), c.len())?;
            c.to_vec()
        }
    };
    let loads = control_loads(control, ops, mesh, cfg)?;
    let mut phi = SpaceTimeField::zeros(mesh.clone(), DofKind::Dirichlet);
    let mut d = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    let mut iters = Vec::with_capacity(loads.len());
    let mut prev = d0.clone();
    for (m, load) in loads.iter().enumerate() {
        let step = ops.step(&prev, m, mesh.time.tau(m), load, cfg)?;
        phi.row_mut(m).copy_from_slice(&step.phi);
        d.row_mut(m).copy_from_slice(&step.d);
        iters.push(step.iterations);
        prev = step.d;
    }
    Ok(ForwardSolution {
        phi,
        d,
        d0,
        fp_iterations: iters,
        contraction_margin: report.practical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_one_params() -> ModelParams {
        ModelParams::new(1.0, 50.0, 0.1, 12.5, 1.0).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_step() {
        let mesh = SpatialMesh1D::uniform(0.0, 1.0, 8).unwrap();
        let ops = StateOperators::new(&case_one_params(), &mesh, &QuadratureConfig::default()).unwrap();
        let cfg = SolverConfig::default();
        let s = ops.step_fixed_point(&[0.0; 9], 0, 0.01, &[0.0; 7], &cfg).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.phi.iter().chain(&s.d).all(|&v| v == 0.0));
    }

    #[test]
    fn elliptic_solve_is_linear() {
        let p = ModelParams::new(1.0, 2.0, 0.1, 0.25, 1.0).unwrap();
        let mesh = SpatialMesh1D::uniform(0.0, 1.0, 10).unwrap();
        let l1: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let l2: Vec<f64> = (0..9).map(|i| (i as f64 * 0.3).cos()).collect();
        let d1: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let d2: Vec<f64> = (0..11).map(|i| 1.0 - (i as f64 * 0.2).powi(2)).collect();
        let ls: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| a + b).collect();
        let ds: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
        let a = elliptic_solve(&l1, &d1, &p, &mesh).unwrap();
        let b = elliptic_solve(&l2, &d2, &p, &mesh).unwrap();
        let c = elliptic_solve(&ls, &ds, &p, &mesh).unwrap();
        for i in 0..9 {
            assert!((a[i] + b[i] - c[i]).abs() < 1e-13);
        }
        assert!(elliptic_solve(&[0.0; 9], &[0.0; 11], &p, &mesh).unwrap().iter().all(|&v| v == 0.0));
        assert!(elliptic_solve(&[0.0; 8], &[0.0; 11], &p, &mesh).is_err());
    }

    #[test]
    fn contraction_diagnostics() {
        let p = case_one_params();
        let r9 = check_contraction(&p, &TemporalMesh::uniform(1.0, 512).unwrap());
        assert!((r9.practical - 500.0 / 512.0).abs() < 1e-14);
        assert_eq!(r9.level, ContractionLevel::Ok);
        assert!((r9.sufficient - 2.0 * r9.practical).abs() < 1e-14);
        let r7 = check_contraction(&p, &TemporalMesh::uniform(1.0, 128).unwrap());
        assert!((r7.practical - 3.90625).abs() < 1e-14);
        assert_eq!(r7.level, ContractionLevel::Error);
        let r8 = check_contraction(&p, &TemporalMesh::uniform(1.0, 256).unwrap());
        assert_eq!(r8.level, ContractionLevel::Warn);
        let p2 = ModelParams::new(1.0, 1.0, 0.1, 0.25, 1.0).unwrap();
        let r = check_contraction(&p2, &TemporalMesh::uniform(1.0, 8).unwrap());
        assert!((r.practical - 1.25).abs() < 1e-14);
        assert_eq!(r.level, ContractionLevel::Warn);
    }

    #[test]
    fn inactive_closed_form_keeps_previous_damage() {
        let p = case_one_params();
        let mesh = SpatialMesh1D::uniform(0.0, 1.0, 8).unwrap();
        let ops = StateOperators::new(&p, &mesh, &QuadratureConfig::default()).unwrap();
        let cfg = SolverConfig {
            mass_mode: MassMode::Lumped,
            stepper: Stepper::ClosedForm,
            ..Default::default()
        };
        let d_prev: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let s = ops.step_closed_form(&d_prev, 0, 1e-3, &[0.0; 7], &cfg).unwrap();
        assert_eq!(s.iterations, 1);
        assert_eq!(s.d, d_prev);
    }

    #[test]
    fn closed_form_scalar_update() {
        // constant φ = c enforced by a huge load is not exact; instead check the
        // nodal formula on a node where φ is known after the solve
        let p = ModelParams::new(1.0, 50.0, 0.1, 12.5, 1.0).unwrap();
        let mesh = SpatialMesh1D::uniform(0.0, 1.0, 4).unwrap();
        let ops = StateOperators::new(&p, &mesh, &QuadratureConfig::default()).unwrap();
        let cfg = SolverConfig {
            mass_mode: MassMode::Lumped,
            stepper: Stepper::ClosedForm,
            ..Default::default()
        };
        let load = vec![30.0; 3];
        let tau = 1e-3;
        let s = ops.step_closed_form(&[0.0; 5], 0, tau, &load, &cfg).unwrap();
        let bd = p.beta_over_delta() * tau;
        for i in 1..4 {
            let c = s.phi[i - 1];
            let expect = if p.beta * c - p.r > 0.0 {
                (tau / p.delta) * (p.beta * c - p.r) / (1.0 + bd)
            } else {
                0.0
            };
            assert!((s.d[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            stepper: Stepper::ClosedForm,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(SolverConfig { fp_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { fp_maxit: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig::default().regularized(-1.0).validate().is_err());
    }
}
