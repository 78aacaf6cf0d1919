//! Exact discrete adjoint of the (regularized) state system, solved backward
//! in time, and the multiplier surrogate μ_ε = g·p.
//!
//! With a = τ_m β/δ, g_m = max_ε′(w(φ_m, d_m)) and M_g the g-weighted mass
//! matrix, slab m solves
//!
//! ```text
//! (αK + βM) z_m       = (β/δ) M_g p_m − (M φ_m − ⟨φ_d⟩_m)
//! (M + a M_g) p_m     = M p_{m+1} + τ_m β M z_m − τ_m (M d_m − ⟨d_d⟩_m)
//! ```
//!
//! with p_{M+1} = 0, where ⟨·⟩_m is the load of the slab average. The lumped
//! variant replaces M and M_g in the damage rows by their nodal diagonals.

use std::sync::Arc;

use crate::control::TrackingTarget;
use crate::discretization::{
    time_average_load, DofKind, MassMode, SpaceTimeField, SpaceTimeMesh, TridiagFactor,
    TridiagMatrix,
};
use crate::error::{Error, Result};
use crate::forward::{ForwardSolution, SolverConfig, StateOperators};
use crate::nonsmooth::{driver_arg_at_quadrature, driver_arg_nodal};

#[derive(Debug, Clone)]
pub struct AdjointSolution {
    /// Adjoint of the elliptic equation (interior nodes).
    pub z: SpaceTimeField,
    /// Adjoint of the damage equation (all nodes).
    pub p: SpaceTimeField,
    /// μ_ε = g·p at the nodes.
    pub mu: SpaceTimeField,
    pub inner_iterations: Vec<usize>,
}

/// g on one slab in the representation the damage rows use.
enum Weight {
    /// At the spatial quadrature points.
    Quadrature(Vec<f64>),
    /// At the nodes.
    Nodal(Vec<f64>),
}

impl Weight {
    fn is_zero(&self) -> bool {
        match self {
            Weight::Quadrature(g) | Weight::Nodal(g) => g.iter().all(|&v| v == 0.0),
        }
    }
}

/// Slab operators of the coupled pair.
struct SlabSystem {
    /// (β/δ) M_g restricted to interior rows, as a matvec on free vectors.
    coupling: Coupling,
    damage: DamageSolver,
}

enum Coupling {
    Matrix(TridiagMatrix),
    Diagonal(Vec<f64>),
}

impl Coupling {
    fn apply(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Coupling::Matrix(m) => m.matvec(p),
            Coupling::Diagonal(w) => (1..p.len() - 1).map(|i| w[i] * p[i]).collect(),
        }
    }
}

enum DamageSolver {
    Tridiag(TridiagFactor),
    Diagonal(Vec<f64>),
}

impl DamageSolver {
    fn solve_in_place(&self, rhs: &mut [f64]) {
        match self {
            DamageSolver::Tridiag(f) => f.solve_in_place(rhs),
            DamageSolver::Diagonal(d) => rhs.iter_mut().zip(d).for_each(|(r, v)| *r /= v),
        }
    }
}

fn slab_weight(
    ops: &StateOperators,
    phi: &[f64],
    d: &[f64],
    cfg: &SolverConfig,
) -> Result<Weight> {
    Ok(match cfg.mass_mode {
        MassMode::Consistent => {
            let w = driver_arg_at_quadrature(phi, d, ops.params(), ops.quadrature())?;
            Weight::Quadrature(w.into_iter().map(|v| cfg.variant.derivative(v)).collect())
        }
        MassMode::Lumped => Weight::Nodal(
            driver_arg_nodal(phi, d, ops.params())
                .into_iter()
                .map(|v| cfg.variant.derivative(v))
                .collect(),
        ),
    })
}

fn slab_system(ops: &StateOperators, g: &Weight, tau: f64) -> Result<SlabSystem> {
    let bd = ops.params().beta_over_delta();
    let a = tau * bd;
    Ok(match g {
        Weight::Quadrature(g) => {
            let mg = ops.quadrature().weighted_mass(g);
            let damage = ops.mass().add_scaled(a, &mg).factor()?;
            SlabSystem {
                coupling: Coupling::Matrix(mg.view(DofKind::Dirichlet, DofKind::Free).scaled(bd)),
                damage: DamageSolver::Tridiag(damage),
            }
        }
        Weight::Nodal(g) => {
            let ml = ops.lumped_mass();
            SlabSystem {
                coupling: Coupling::Diagonal(ml.iter().zip(g).map(|(m, g)| bd * m * g).collect()),
                damage: DamageSolver::Diagonal(
                    ml.iter().zip(g).map(|(m, g)| m * (1.0 + a * g)).collect(),
                ),
            }
        }
    })
}

/// Backward sweep over all slabs. `fwd` must come from the same operators and
/// solver configuration; the regularized variant makes the adjoint exact.
pub fn solve_adjoint(
    ops: &StateOperators,
    fwd: &ForwardSolution,
    target: &dyn TrackingTarget,
    mesh: &Arc<SpaceTimeMesh>,
    cfg: &SolverConfig,
) -> Result<AdjointSolution> {
    cfg.validate()?;
    fwd.phi.same_shape(&SpaceTimeField::zeros(mesh.clone(), DofKind::Dirichlet))?;
    fwd.d.same_shape(&SpaceTimeField::zeros(mesh.clone(), DofKind::Free))?;
    let beta = ops.params().beta;
    let nslabs = mesh.time.num_slabs();
    let quad = ops.quadrature();
    let mass = ops.mass();
    let mass_dd = mass.view(DofKind::Dirichlet, DofKind::Dirichlet);
    let mass_fd = mass.view(DofKind::Free, DofKind::Dirichlet);
    let lumped = ops.lumped_mass();
    let elliptic = ops.elliptic_factor();

    let mut z = SpaceTimeField::zeros(mesh.clone(), DofKind::Dirichlet);
    let mut p = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    let mut mu = SpaceTimeField::zeros(mesh.clone(), DofKind::Free);
    let mut iters = vec![0; nslabs];
    let mut p_next = vec![0.0; mesh.space.num_nodes()];

    for m in (0..nslabs).rev() {
        let tau = mesh.time.tau(m);
        let phi_m = fwd.phi.row(m);
        let d_m = fwd.d.row(m);
        let g = slab_weight(ops, phi_m, d_m, cfg)?;
        let sys = slab_system(ops, &g, tau)?;

        // −τ⁻¹ ∂J/∂φ_m and the p-independent part of the damage row
        let phi_d = time_average_load(
            |t, x| target.phi_desired(t, x),
            m,
            &mesh.time,
            quad,
            DofKind::Dirichlet,
            cfg.quad.q_time,
        );
        let track_phi: Vec<f64> =
            mass_dd.matvec(phi_m).iter().zip(&phi_d).map(|(a, b)| b - a).collect();
        let d_d = time_average_load(
            |t, x| target.d_desired(t, x),
            m,
            &mesh.time,
            quad,
            DofKind::Free,
            cfg.quad.q_time,
        );
        let carry = match cfg.mass_mode {
            MassMode::Consistent => mass.matvec(&p_next),
            MassMode::Lumped => p_next.iter().zip(lumped).map(|(v, w)| v * w).collect(),
        };
        let base: Vec<f64> = mass
            .matvec(d_m)
            .iter()
            .zip(&d_d)
            .zip(&carry)
            .map(|((md, dd), c)| c - tau * (md - dd))
            .collect();

        let solve_pair = |p_guess: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut rhs_z = sys.coupling.apply(p_guess);
            rhs_z.iter_mut().zip(&track_phi).for_each(|(r, t)| *r += t);
            elliptic.solve_in_place(&mut rhs_z);
            let zc = mass_fd.matvec(&rhs_z);
            let mut rhs_p: Vec<f64> =
                base.iter().zip(&zc).map(|(b, c)| b + tau * beta * c).collect();
            sys.damage.solve_in_place(&mut rhs_p);
            (rhs_z, rhs_p)
        };

        let (mut zm, mut pm);
        if g.is_zero() {
            (zm, pm) = solve_pair(&p_next);
            iters[m] = 1;
        } else {
            let mut guess = p_next.clone();
            let mut k = 0;
            loop {
                k += 1;
                (zm, pm) = solve_pair(&guess);
                let diff: Vec<f64> = pm.iter().zip(&guess).map(|(a, b)| a - b).collect();
                let inc = ops.mass_norm(cfg.mass_mode, &diff);
                guess.clone_from(&pm);
                if inc <= cfg.fp_tol {
                    break;
                }
                if k >= cfg.fp_maxit || !inc.is_finite() {
                    return Err(Error::NonConvergence {
                        slab: m,
                        iterations: k,
                        increment: inc,
                        margin: tau * ops.params().beta_over_delta(),
                    });
                }
            }
            iters[m] = k;
        }
        mu.row_mut(m).copy_from_slice(&multiplier_row(ops, &g, &pm)?);
        z.row_mut(m).copy_from_slice(&zm);
        p.row_mut(m).copy_from_slice(&pm);
        p_next = pm;
    }
    Ok(AdjointSolution {
        z,
        p,
        mu,
        inner_iterations: iters,
    })
}

fn multiplier_row(ops: &StateOperators, g: &Weight, p: &[f64]) -> Result<Vec<f64>> {
    Ok(match g {
        Weight::Nodal(g) => g.iter().zip(p).map(|(a, b)| a * b).collect(),
        Weight::Quadrature(g) => {
            let quad = ops.quadrature();
            let mut pq = quad.interpolate(DofKind::Free, p);
            pq.iter_mut().zip(g).for_each(|(v, w)| *v *= w);
            let mut b = quad.load_from_values(DofKind::Free, &pq);
            ops.mass_factor().solve_in_place(&mut b);
            b
        }
    })
}

/// Pointwise product g·p of nodal weights g ∈ [0, 1] with a free field p.
pub fn compute_multiplier(p: &SpaceTimeField, g: &SpaceTimeField) -> Result<SpaceTimeField> {
    p.same_shape(g)?;
    let mut out = p.clone();
    for (o, w) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *o *= w;
    }
    Ok(out)
}
