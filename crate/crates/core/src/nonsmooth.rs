//! The max Nemytskii operator, its C¹ regularization, and evaluation of the
//! damage driver w = -β(d - φ) - r.

use crate::discretization::{check_len, DofKind, ModelParams, SpatialQuadrature};
use crate::error::{ensure, Result};

#[inline]
pub fn max_plus(x: f64) -> f64 {
    x.max(0.0)
}

/// Quartic-smoothed max: 0 for x ≤ 0, x - ε/2 for x ≥ ε,
/// -x⁴/(2ε³) + x³/ε² in between.
pub fn max_eps(x: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(max_eps_unchecked(x, eps))
}

/// Derivative of [`max_eps`]; takes values in [0, 1].
pub fn max_eps_prime(x: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(max_eps_prime_unchecked(x, eps))
}

fn check_eps(eps: f64) -> Result<()> {
    ensure(eps > 0.0 && eps.is_finite(), || {
        format!("regularization width must be positive, got {eps}")
    })
}

/// Error-free difference: a − b = s + e exactly.
#[inline]
pub fn two_diff(a: f64, b: f64) -> (f64, f64) {
    let s = a - b;
    let bb = a - s;
    let e = (a - (s + bb)) + (bb - b);
    (s, e)
}

/// Whether a − b ≤ c holds in exact arithmetic.
#[inline]
pub fn diff_at_most(a: f64, b: f64, c: f64) -> bool {
    let (s, e) = two_diff(a, b);
    s < c || (s == c && e <= 0.0)
}

/// x − h rounded up just enough that x − result ≤ h exactly.
#[inline]
fn shift_down(x: f64, h: f64) -> f64 {
    let mut y = x - h;
    while !diff_at_most(x, y, h) {
        y = y.next_up();
    }
    y
}

#[inline]
fn max_eps_unchecked(x: f64, eps: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= eps {
        shift_down(x, 0.5 * eps)
    } else {
        let s = x / eps;
        // x³/ε² (1 - x/(2ε)); near x = ε rounding could push the gap past ε/2
        (x * s * s * (1.0 - 0.5 * s)).max(shift_down(x, 0.5 * eps))
    }
}

#[inline]
fn max_eps_prime_unchecked(x: f64, eps: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= eps {
        1.0
    } else {
        let s = x / eps;
        s * s * (3.0 - 2.0 * s)
    }
}

/// Smoothing width; zero selects the exact max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConfig {
    pub epsilon: f64,
}

impl RegularizationConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        ensure(epsilon >= 0.0 && epsilon.is_finite(), || {
            format!("epsilon must be >= 0, got {epsilon}")
        })?;
        Ok(Self { epsilon })
    }

    pub fn variant(&self) -> MaxVariant {
        if self.epsilon == 0.0 {
            MaxVariant::Exact
        } else {
            MaxVariant::Regularized(self.epsilon)
        }
    }
}

/// Which max the state equation uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxVariant {
    Exact,
    Regularized(f64),
}

impl MaxVariant {
    pub fn regularized(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(MaxVariant::Regularized(eps))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MaxVariant::Exact => Ok(()),
            MaxVariant::Regularized(eps) => check_eps(eps),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            MaxVariant::Exact => max_plus(x),
            MaxVariant::Regularized(eps) => max_eps_unchecked(x, eps),
        }
    }

    /// Derivative; for the exact max this is the indicator of x > 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            MaxVariant::Exact => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            MaxVariant::Regularized(eps) => max_eps_prime_unchecked(x, eps),
        }
    }

    pub fn epsilon(self) -> Option<f64> {
        match self {
            MaxVariant::Exact => None,
            MaxVariant::Regularized(e) => Some(e),
        }
    }
}

/// w = -β(d - φ) - r at each spatial quadrature point, by P1 interpolation of
/// φ (interior dofs) and d (all nodes).
pub fn driver_arg_at_quadrature(
    phi_slab: &[f64],
    d_slab: &[f64],
    params: &ModelParams,
    quad: &SpatialQuadrature,
) -> Result<Vec<f64>> {
    let nn = quad.num_elements() + 1;
    check_len("phi slab (interior nodes)", nn - 2, phi_slab.len())?;
    check_len("d slab (all nodes)", nn, d_slab.len())?;
    let mut phi_q = quad.interpolate(DofKind::Dirichlet, phi_slab);
    let d_q = quad.interpolate(DofKind::Free, d_slab);
    for (p, d) in phi_q.iter_mut().zip(&d_q) {
        *p = -params.beta * (d - *p) - params.r;
    }
    Ok(phi_q)
}

/// The max-variant applied to the driver at each spatial quadrature point.
pub fn driver_at_quadrature(
    phi_slab: &[f64],
    d_slab: &[f64],
    params: &ModelParams,
    quad: &SpatialQuadrature,
    variant: MaxVariant,
) -> Result<Vec<f64>> {
    variant.validate()?;
    let mut w = driver_arg_at_quadrature(phi_slab, d_slab, params, quad)?;
    w.iter_mut().for_each(|v| *v = variant.apply(*v));
    Ok(w)
}

/// Driver argument at the mesh nodes (φ is zero on the boundary).
pub fn driver_arg_nodal(phi_slab: &[f64], d_slab: &[f64], params: &ModelParams) -> Vec<f64> {
    let n = d_slab.len();
    debug_assert_eq!(phi_slab.len() + 2, n);
    (0..n)
        .map(|i| {
            let phi = if i == 0 || i == n - 1 { 0.0 } else { phi_slab[i - 1] };
            -params.beta * (d_slab[i] - phi) - params.r
        })
        .collect()
}
