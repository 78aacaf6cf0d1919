//! Discrete objective, the L_σ control geometry, Riesz gradients and
//! gradient descent with Armijo backtracking.

use std::sync::Arc;

use log::{debug, info};

use crate::adjoint::{solve_adjoint, AdjointSolution};
use crate::discretization::{
    l2_project_space, space_time_error_sq, DofKind, ModelParams, SpaceTimeField, SpaceTimeMesh,
    TridiagFactor,
};
use crate::error::{ensure, Error, Result};
use crate::forward::{solve_forward_with, Control, ForwardSolution, InitialDamage, SolverConfig, StateOperators};

/// Desired states of the tracking functional.
pub trait TrackingTarget: Sync {
    fn phi_desired(&self, t: f64, x: f64) -> f64;
    fn d_desired(&self, t: f64, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlNorm {
    /// Σ_m τ_m⁻¹‖[u]_{m-1}‖² with a zero ghost value before t_0.
    Seminorm,
    /// Interior jumps only, plus Σ_m τ_m‖u_m‖².
    Full,
}

/// Temporal matrix K_t of the L_σ inner product as (lower, diag, upper):
/// (u, v)_{L_σ} = Σ_{m,k} K_t[m,k] (u_m, v_k)_{L²(Ω)}.
pub fn temporal_matrix(tau: &[f64], norm: ControlNorm) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = tau.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for m in 0..n {
        let w = 1.0 / tau[m];
        if m == 0 {
            if norm == ControlNorm::Seminorm {
                diag[0] += w;
            }
        } else {
            diag[m] += w;
            diag[m - 1] += w;
            off[m - 1] -= w;
        }
        if norm == ControlNorm::Full {
            diag[m] += tau[m];
        }
    }
    (off.clone(), diag, off)
}

fn spatial_products(u: &SpaceTimeField, v: &SpaceTimeField) -> Result<(Vec<f64>, Vec<f64>)> {
    u.same_shape(v)?;
    let mass = crate::discretization::assemble_mass(
        &u.mesh().space,
        u.kind(),
        crate::discretization::MassMode::Consistent,
    );
    let n = u.num_rows();
    let same: Vec<f64> = (0..n).map(|m| mass.inner(u.row(m), v.row(m))).collect();
    // (u_m, v_{m-1}) + (u_{m-1}, v_m) for m >= 1
    let cross: Vec<f64> = (1..n)
        .map(|m| mass.inner(u.row(m), v.row(m - 1)) + mass.inner(u.row(m - 1), v.row(m)))
        .collect();
    Ok((same, cross))
}

/// (u, v)_{L_σ} for dG(0) fields.
pub fn lsigma_inner(u: &SpaceTimeField, v: &SpaceTimeField, norm: ControlNorm) -> Result<f64> {
    let (same, cross) = spatial_products(u, v)?;
    let (off, diag, _) = temporal_matrix(u.mesh().time.lengths(), norm);
    let mut s: f64 = diag.iter().zip(&same).map(|(k, p)| k * p).sum();
    s += off.iter().zip(&cross).map(|(k, p)| k * p).sum::<f64>();
    Ok(s)
}

/// Applies K_t per spatial dof and the spatial mass per slab: the Euclidean
/// coefficient vector of the functional (u, ·)_{L_σ}.
pub fn lsigma_apply(u: &SpaceTimeField, norm: ControlNorm) -> SpaceTimeField {
    let (lower, diag, upper) = temporal_matrix(u.mesh().time.lengths(), norm);
    let mass = crate::discretization::assemble_mass(
        &u.mesh().space,
        u.kind(),
        crate::discretization::MassMode::Consistent,
    );
    let n = u.num_rows();
    let mut out = SpaceTimeField::zeros(u.mesh().clone(), u.kind());
    for m in 0..n {
        let mut row: Vec<f64> = u.row(m).iter().map(|v| diag[m] * v).collect();
        if m > 0 {
            row.iter_mut().zip(u.row(m - 1)).for_each(|(r, v)| *r += lower[m - 1] * v);
        }
        if m + 1 < n {
            row.iter_mut().zip(u.row(m + 1)).for_each(|(r, v)| *r += upper[m] * v);
        }
        out.row_mut(m).copy_from_slice(&mass.matvec(&row));
    }
    out
}

/// G = α_l (l − l_ref) + H, with K_t H = −τ z solved per spatial dof.
pub fn riesz_gradient(
    z: &SpaceTimeField,
    l: &SpaceTimeField,
    l_ref_proj: &SpaceTimeField,
    norm: ControlNorm,
    alpha_l: f64,
) -> Result<SpaceTimeField> {
    l.same_shape(l_ref_proj)?;
    if !Arc::ptr_eq(z.mesh(), l.mesh()) && **z.mesh() != **l.mesh() {
        return Err(Error::MeshMismatch);
    }
    // M_{FD} z = M_{FF} (z extended by zero), so the mass cancels either way
    let z_row = |m: usize| -> Vec<f64> {
        if z.kind() == l.kind() {
            z.row(m).to_vec()
        } else {
            z.nodal_row(m)
        }
    };
    if z.kind() == DofKind::Free && l.kind() == DofKind::Dirichlet {
        return Err(Error::MeshMismatch);
    }
    let tau = l.mesh().time.lengths();
    let (lower, diag, upper) = temporal_matrix(tau, norm);
    let kt = TridiagFactor::new(&lower, &diag, &upper)?;
    let mut g = l.axpy(-1.0, l_ref_proj)?.scale(alpha_l);
    let (rows, cols) = (l.num_rows(), l.num_cols());
    let zr: Vec<Vec<f64>> = (0..rows).map(z_row).collect();
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        for m in 0..rows {
            col[m] = -tau[m] * zr[m][j];
        }
        kt.solve_in_place(&mut col);
        for m in 0..rows {
            g.row_mut(m)[j] += col[m];
        }
    }
    Ok(g)
}

/// Π l: nodal interpolation of l(t_m, ·) at the right end of every slab,
/// on all nodes.
pub fn project_reference<F: Fn(f64, f64) -> f64>(l: F, mesh: &Arc<SpaceTimeMesh>) -> SpaceTimeField {
    SpaceTimeField::from_fn(mesh.clone(), DofKind::Free, |m, x| l(mesh.time.slab(m).1, x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub alpha_l: f64,
    /// Width of the smoothed max used by objective and gradient.
    pub epsilon: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub s0: f64,
    pub grad_tol_abs: f64,
    pub grad_tol_rel: f64,
    pub maxit: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha_l: 10.0,
            epsilon: 1e-9,
            armijo_c: 1e-4,
            backtrack: 0.5,
            s0: 1.0,
            grad_tol_abs: 1e-10,
            grad_tol_rel: 1e-6,
            maxit: 500,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.alpha_l > 0.0, || format!("alpha_l must be > 0, got {}", self.alpha_l))?;
        ensure(self.epsilon > 0.0, || format!("epsilon must be > 0, got {}", self.epsilon))?;
        ensure(self.armijo_c > 0.0 && self.armijo_c < 1.0, || {
            format!("armijo_c must lie in (0, 1), got {}", self.armijo_c)
        })?;
        ensure(self.backtrack > 0.0 && self.backtrack < 1.0, || {
            format!("backtrack must lie in (0, 1), got {}", self.backtrack)
        })?;
        ensure(self.s0 > 0.0, || format!("s0 must be > 0, got {}", self.s0))?;
        ensure(self.grad_tol_abs >= 0.0 && self.grad_tol_rel >= 0.0, || {
            "gradient tolerances must be >= 0".into()
        })
    }
}

/// Anything [`armijo_descent`] can minimize.
pub trait DescentProblem {
    fn value(&self, l: &SpaceTimeField) -> Result<f64>;
    /// Objective and Riesz gradient in the problem's inner product.
    fn value_and_gradient(&self, l: &SpaceTimeField) -> Result<(f64, SpaceTimeField)>;
    fn inner(&self, u: &SpaceTimeField, v: &SpaceTimeField) -> Result<f64>;
}

/// Regularized discrete tracking problem
/// j(l) = ½‖φ − φ_d‖² + ½‖d − d_d‖² + (α_l/2)‖l − Πl_ref‖²_{L_σ}
/// over dG(0)×P1 controls on all nodes.
pub struct ControlProblem<'a> {
    ops: StateOperators,
    mesh: Arc<SpaceTimeMesh>,
    target: &'a dyn TrackingTarget,
    d0: Vec<f64>,
    l_ref: SpaceTimeField,
    norm: ControlNorm,
    alpha_l: f64,
    solver: SolverConfig,
}

/// Everything computed at one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub forward: ForwardSolution,
    pub adjoint: AdjointSolution,
    pub gradient: SpaceTimeField,
}

impl<'a> ControlProblem<'a> {
    /// `solver` is switched to the regularized max with width `opt.epsilon`.
    pub fn new(
        params: &ModelParams,
        mesh: Arc<SpaceTimeMesh>,
        target: &'a dyn TrackingTarget,
        d0: &(dyn Fn(f64) -> f64 + Sync),
        l_ref: SpaceTimeField,
        norm: ControlNorm,
        solver: &SolverConfig,
        opt: &OptimizerConfig,
    ) -> Result<Self> {
        opt.validate()?;
        let solver = solver.regularized(opt.epsilon);
        solver.validate()?;
        l_ref.same_shape(&SpaceTimeField::zeros(mesh.clone(), DofKind::Free))?;
        let ops = StateOperators::new(params, &mesh.space, &solver.quad)?;
        let d0 = l2_project_space(d0, &mesh.space, DofKind::Free, &solver.quad)?;
        Ok(Self {
            ops,
            mesh,
            target,
            d0,
            l_ref,
            norm,
            alpha_l: opt.alpha_l,
            solver,
        })
    }

    pub fn mesh(&self) -> &Arc<SpaceTimeMesh> {
        &self.mesh
    }

    pub fn norm(&self) -> ControlNorm {
        self.norm
    }

    pub fn reference(&self) -> &SpaceTimeField {
        &self.l_ref
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn zero_control(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.mesh.clone(), DofKind::Free)
    }

    pub fn forward(&self, l: &SpaceTimeField) -> Result<ForwardSolution> {
        solve_forward_with(
            &self.ops,
            Control::Discrete(l),
            InitialDamage::Coefficients(&self.d0),
            &self.mesh,
            &self.solver,
        )
    }

    fn value_from(&self, l: &SpaceTimeField, fwd: &ForwardSolution) -> Result<f64> {
        let quad = self.ops.quadrature();
        let q_time = self.solver.quad.q_time;
        let t = self.target;
        let track = space_time_error_sq(&fwd.phi, &|t_, x| t.phi_desired(t_, x), quad, q_time)
            + space_time_error_sq(&fwd.d, &|t_, x| t.d_desired(t_, x), quad, q_time);
        let shift = l.axpy(-1.0, &self.l_ref)?;
        Ok(0.5 * track + 0.5 * self.alpha_l * lsigma_inner(&shift, &shift, self.norm)?)
    }

    pub fn objective(&self, l: &SpaceTimeField) -> Result<f64> {
        let fwd = self.forward(l)?;
        self.value_from(l, &fwd)
    }

    pub fn evaluate(&self, l: &SpaceTimeField) -> Result<Evaluation> {
        let forward = self.forward(l)?;
        let value = self.value_from(l, &forward)?;
        let adjoint = solve_adjoint(&self.ops, &forward, self.target, &self.mesh, &self.solver)?;
        let gradient = riesz_gradient(&adjoint.z, l, &self.l_ref, self.norm, self.alpha_l)?;
        Ok(Evaluation {
            value,
            forward,
            adjoint,
            gradient,
        })
    }

    /// Euclidean gradient ∂j/∂l, one entry per control coefficient.
    pub fn euclidean_gradient(&self, l: &SpaceTimeField) -> Result<SpaceTimeField> {
        Ok(lsigma_apply(&self.evaluate(l)?.gradient, self.norm))
    }
}

impl DescentProblem for ControlProblem<'_> {
    fn value(&self, l: &SpaceTimeField) -> Result<f64> {
        self.objective(l)
    }

    fn value_and_gradient(&self, l: &SpaceTimeField) -> Result<(f64, SpaceTimeField)> {
        let e = self.evaluate(l)?;
        Ok((e.value, e.gradient))
    }

    fn inner(&self, u: &SpaceTimeField, v: &SpaceTimeField) -> Result<f64> {
        lsigma_inner(u, v, self.norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub objective: f64,
    pub grad_norm: f64,
    /// Accepted step; zero on the final, converged record.
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub l: SpaceTimeField,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl OptimResult {
    pub fn final_grad_norm(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.grad_norm)
    }
}

/// Steepest descent in the problem's inner product with Armijo backtracking.
/// Trial points whose state solve fails are treated as rejected steps.
pub fn armijo_descent<P: DescentProblem + ?Sized>(
    problem: &P,
    opt: &OptimizerConfig,
    l_init: &SpaceTimeField,
) -> Result<OptimResult> {
    opt.validate()?;
    let mut l = l_init.clone();
    let mut history = Vec::new();
    let mut s_next = opt.s0;
    let mut tol = None;
    for it in 0..opt.maxit {
        let (j, g) = problem.value_and_gradient(&l)?;
        let gg = problem.inner(&g, &g)?.max(0.0);
        let gnorm = gg.sqrt();
        let tol = *tol.get_or_insert(opt.grad_tol_abs + opt.grad_tol_rel * gnorm);
        debug!("iteration {it}: j = {j:.6e}, |G| = {gnorm:.3e}");
        if gnorm <= tol {
            history.push(IterationRecord {
                objective: j,
                grad_norm: gnorm,
                step: 0.0,
            });
            info!("converged after {it} iterations, |G| = {gnorm:.3e}");
            return Ok(OptimResult {
                l,
                history,
                converged: true,
            });
        }
        let mut s = s_next;
        let mut solver_failed = None;
        let trial = loop {
            let trial = l.axpy(-s, &g)?;
            match problem.value(&trial) {
                Ok(jt) if jt <= j - opt.armijo_c * s * gg => break trial,
                Ok(_) => {}
                Err(e) if e.is_solver_failure() => {
                    debug!("trial step {s:.3e} rejected: {e}");
                    solver_failed = Some(e);
                }
                Err(e) => return Err(e),
            }
            s *= opt.backtrack;
            if s < 1e-14 {
                // a search that ran into solver failures reports the solver failure
                return Err(solver_failed.unwrap_or(Error::LineSearchFailure { iteration: it, step: s }));
            }
        };
        history.push(IterationRecord {
            objective: j,
            grad_norm: gnorm,
            step: s,
        });
        l = trial;
        s_next = (2.0 * s).min(opt.s0);
    }
    let (j, g) = problem.value_and_gradient(&l)?;
    history.push(IterationRecord {
        objective: j,
        grad_norm: problem.inner(&g, &g)?.max(0.0).sqrt(),
        step: 0.0,
    });
    info!("stopped at maxit = {}", opt.maxit);
    Ok(OptimResult {
        l,
        history,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(m: usize, n: usize, f: impl Fn(usize, f64) -> f64) -> SpaceTimeField {
        let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, m, 0.0, 1.0, n).unwrap());
        SpaceTimeField::from_fn(mesh, DofKind::Free, f)
    }

    #[test]
    fn lsigma_reference_values() {
        let u = field(2, 4, |_, _| 1.0);
        assert!((lsigma_inner(&u, &u, ControlNorm::Seminorm).unwrap() - 2.0).abs() < 1e-14);
        assert!((lsigma_inner(&u, &u, ControlNorm::Full).unwrap() - 1.0).abs() < 1e-14);
        let z = field(2, 4, |_, _| 0.0);
        let v = field(2, 4, |m, x| m as f64 + x);
        assert_eq!(lsigma_inner(&z, &v, ControlNorm::Seminorm).unwrap(), 0.0);
    }

    #[test]
    fn lsigma_matches_jump_sum() {
        let u = field(5, 6, |m, x| (m as f64 * 0.7 + x).sin());
        let v = field(5, 6, |m, x| (m as f64 * 0.3 - 2.0 * x).cos());
        let mass = crate::discretization::assemble_mass(&u.mesh().space, DofKind::Free, crate::discretization::MassMode::Consistent);
        let tau = 0.2;
        let mut semi = 0.0;
        for m in 0..5 {
            let ju = crate::discretization::jump(&u, m).unwrap();
            let jv = crate::discretization::jump(&v, m).unwrap();
            semi += mass.inner(&ju, &jv) / tau;
        }
        let full = semi - mass.inner(u.row(0), v.row(0)) / tau
            + (0..5).map(|m| tau * mass.inner(u.row(m), v.row(m))).sum::<f64>();
        assert!((lsigma_inner(&u, &v, ControlNorm::Seminorm).unwrap() - semi).abs() < 1e-12);
        assert!((lsigma_inner(&u, &v, ControlNorm::Full).unwrap() - full).abs() < 1e-12);
        // symmetric, and lsigma_apply represents it
        for norm in [ControlNorm::Seminorm, ControlNorm::Full] {
            let a = lsigma_inner(&u, &v, norm).unwrap();
            assert!((a - lsigma_inner(&v, &u, norm).unwrap()).abs() < 1e-12);
            let au = lsigma_apply(&u, norm);
            let b: f64 = au.as_slice().iter().zip(v.as_slice()).map(|(p, q)| p * q).sum();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn riesz_gradient_trivial_cases() {
        let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 4, 0.0, 1.0, 5).unwrap());
        let l = SpaceTimeField::from_fn(mesh.clone(), DofKind::Dirichlet, |m, x| m as f64 * x);
        let r = SpaceTimeField::from_fn(mesh.clone(), DofKind::Dirichlet, |_, x| x * x);
        let z = SpaceTimeField::zeros(mesh, DofKind::Dirichlet);
        let g = riesz_gradient(&z, &l, &r, ControlNorm::Seminorm, 3.0).unwrap();
        let expect = l.axpy(-1.0, &r).unwrap().scale(3.0);
        assert!(g.max_abs_diff(&expect) < 1e-14);
        let g0 = riesz_gradient(&z, &l, &l, ControlNorm::Full, 3.0).unwrap();
        assert!(g0.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_identity() {
        // (G, δl)_{L_σ} = α_l(l − r, δl)_{L_σ} − Σ_m τ_m (z_m, δl_m)_M
        let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 6, 0.0, 1.0, 7).unwrap());
        let mk = |s: f64| SpaceTimeField::from_fn(mesh.clone(), DofKind::Dirichlet, move |m, x| (s * (m as f64 + 1.0) * x).sin());
        let (l, r, z) = (mk(1.3), mk(0.4), mk(2.1));
        let mass = crate::discretization::assemble_mass(&mesh.space, DofKind::Dirichlet, crate::discretization::MassMode::Consistent);
        for norm in [ControlNorm::Seminorm, ControlNorm::Full] {
            let g = riesz_gradient(&z, &l, &r, norm, 10.0).unwrap();
            for k in 0..10 {
                let dl = mk(0.37 * k as f64 + 0.1);
                let lhs = lsigma_inner(&g, &dl, norm).unwrap();
                let shift = l.axpy(-1.0, &r).unwrap();
                let rhs = 10.0 * lsigma_inner(&shift, &dl, norm).unwrap()
                    - (0..6).map(|m| mesh.time.tau(m) * mass.inner(z.row(m), dl.row(m))).sum::<f64>();
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn riesz_identity_free_control() {
        // interior-only z acts on all-node controls through M_{DF}
        let mesh = Arc::new(SpaceTimeMesh::uniform(1.0, 5, 0.0, 1.0, 6).unwrap());
        let mk = |s: f64, kind| SpaceTimeField::from_fn(mesh.clone(), kind, move |m, x| (s * (m as f64 + 1.0) * x + 0.2).cos());
        let (l, r) = (mk(1.1, DofKind::Free), mk(0.5, DofKind::Free));
        let z = mk(1.7, DofKind::Dirichlet);
        let coupling = crate::discretization::assemble_mass(&mesh.space, DofKind::Free, crate::discretization::MassMode::Consistent);
        let coupling = coupling.view(DofKind::Dirichlet, DofKind::Free);
        let g = riesz_gradient(&z, &l, &r, ControlNorm::Full, 2.0).unwrap();
        assert_eq!(g.kind(), DofKind::Free);
        for k in 0..6 {
            let dl = mk(0.29 * k as f64 + 0.3, DofKind::Free);
            let lhs = lsigma_inner(&g, &dl, ControlNorm::Full).unwrap();
            let shift = l.axpy(-1.0, &r).unwrap();
            let rhs = 2.0 * lsigma_inner(&shift, &dl, ControlNorm::Full).unwrap()
                - (0..5)
                    .map(|m| {
                        let mz = coupling.matvec(dl.row(m));
                        mesh.time.tau(m) * z.row(m).iter().zip(&mz).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
        assert!(riesz_gradient(&mk(1.0, DofKind::Free), &mk(1.0, DofKind::Dirichlet), &mk(1.0, DofKind::Dirichlet), ControlNorm::Full, 1.0).is_err());
    }

    struct Quadratic {
        norm: ControlNorm,
    }

    impl DescentProblem for Quadratic {
        fn value(&self, l: &SpaceTimeField) -> Result<f64> {
            Ok(0.5 * lsigma_inner(l, l, self.norm)?)
        }
        fn value_and_gradient(&self, l: &SpaceTimeField) -> Result<(f64, SpaceTimeField)> {
            Ok((self.value(l)?, l.clone()))
        }
        fn inner(&self, u: &SpaceTimeField, v: &SpaceTimeField) -> Result<f64> {
            lsigma_inner(u, v, self.norm)
        }
    }

    #[test]
    fn quadratic_converges_in_one_unit_step() {
        let l0 = field(4, 5, |m, x| (m as f64 + 1.0) * x * (1.0 - x));
        let res = armijo_descent(&Quadratic { norm: ControlNorm::Seminorm }, &OptimizerConfig::default(), &l0).unwrap();
        assert!(res.converged);
        assert_eq!(res.history.len(), 2);
        assert_eq!(res.history[0].step, 1.0);
        assert!(res.l.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        for bad in [
            OptimizerConfig { alpha_l: 0.0, ..Default::default() },
            OptimizerConfig { armijo_c: 1.0, ..Default::default() },
            OptimizerConfig { backtrack: 0.0, ..Default::default() },
            OptimizerConfig { s0: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
