//! Manufactured solutions with known states and optimal controls.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{ControlNorm, TrackingTarget};
use crate::discretization::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseId {
    /// Moving biactive set of measure zero; kinks travel in time.
    One,
    /// Biactive set of positive measure on (1/3, 2/3).
    Two,
    /// All functions zero.
    Zero,
}

/// Exact space-time solution bundle on Ω = (0, 1), T = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub params: ModelParams,
    pub norm_variant: ControlNorm,
    pub label: &'static str,
}

pub fn case_one() -> ManufacturedCase {
    let beta = 50.0;
    ManufacturedCase {
        id: CaseId::One,
        params: ModelParams::new(1.0, beta, 0.1, 0.25 * beta, 1.0).unwrap(),
        norm_variant: ControlNorm::Seminorm,
        label: "case1",
    }
}

pub fn case_two() -> ManufacturedCase {
    let beta = 1.0;
    ManufacturedCase {
        id: CaseId::Two,
        params: ModelParams::new(1.0, beta, 0.1, 0.25 * beta, 1.0).unwrap(),
        norm_variant: ControlNorm::Full,
        label: "case2",
    }
}

pub fn zero_case() -> ManufacturedCase {
    ManufacturedCase {
        id: CaseId::Zero,
        params: ModelParams::new(1.0, 1.0, 0.1, 0.25, 1.0).unwrap(),
        norm_variant: ControlNorm::Seminorm,
        label: "zero",
    }
}

impl ManufacturedCase {
    pub fn by_number(n: u32) -> Option<Self> {
        match n {
            1 => Some(case_one()),
            2 => Some(case_two()),
            _ => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn t_final(&self) -> f64 {
        self.params.t_final
    }

    /// Time at which x becomes active (case 1); +∞ where it never does.
    pub fn t_active(&self, x: f64) -> f64 {
        match self.id {
            CaseId::One => {
                let s = (3.0 * PI * x).sin();
                if s > 0.0 {
                    self.params.r / (self.params.beta * s)
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    pub fn phi(&self, t: f64, x: f64) -> f64 {
        match self.id {
            CaseId::One => (3.0 * PI * x).sin() * t,
            CaseId::Two => phi_two(self.threshold(), x),
            CaseId::Zero => 0.0,
        }
    }

    pub fn phi_xx(&self, t: f64, x: f64) -> f64 {
        match self.id {
            CaseId::One => -9.0 * PI * PI * (3.0 * PI * x).sin() * t,
            CaseId::Two => {
                let c = 9.0 * self.threshold();
                if x <= 1.0 / 3.0 {
                    c * (-324.0 * x * x + 180.0 * x - 24.0)
                } else if x < 2.0 / 3.0 {
                    0.0
                } else {
                    c * (-324.0 * x * x + 468.0 * x - 168.0)
                }
            }
            CaseId::Zero => 0.0,
        }
    }

    pub fn d(&self, t: f64, x: f64) -> f64 {
        let p = &self.params;
        match self.id {
            CaseId::One => {
                let s = (3.0 * PI * x).sin();
                let ta = self.t_active(x);
                if s > 0.0 && t >= ta {
                    s * t - p.r / p.beta
                        - p.delta / p.beta * s * (1.0 - (p.beta_over_delta() * (ta - t)).exp())
                } else {
                    self.d0(x)
                }
            }
            CaseId::Two => {
                let gap = phi_two(self.threshold(), x) - self.threshold();
                if gap > 0.0 {
                    gap * (1.0 - (-p.beta_over_delta() * t).exp())
                } else {
                    0.0
                }
            }
            CaseId::Zero => 0.0,
        }
    }

    pub fn d_t(&self, t: f64, x: f64) -> f64 {
        let p = &self.params;
        match self.id {
            CaseId::One => {
                let s = (3.0 * PI * x).sin();
                let ta = self.t_active(x);
                if s > 0.0 && t >= ta {
                    s * (1.0 - (p.beta_over_delta() * (ta - t)).exp())
                } else {
                    0.0
                }
            }
            CaseId::Two => {
                let gap = phi_two(self.threshold(), x) - self.threshold();
                if gap > 0.0 {
                    gap * p.beta_over_delta() * (-p.beta_over_delta() * t).exp()
                } else {
                    0.0
                }
            }
            CaseId::Zero => 0.0,
        }
    }

    /// Load that makes (φ, d) solve the elliptic equation.
    pub fn l(&self, t: f64, x: f64) -> f64 {
        let p = &self.params;
        match self.id {
            CaseId::One => {
                (9.0 * p.alpha * PI * PI + p.beta) * (3.0 * PI * x).sin() * t - p.beta * self.d(t, x)
            }
            CaseId::Two => {
                let c = 9.0 * self.threshold();
                let minus_phi_xx = if x <= 1.0 / 3.0 {
                    c * (324.0 * x * x - 180.0 * x + 24.0)
                } else if x < 2.0 / 3.0 {
                    0.0
                } else {
                    c * (324.0 * x * x - 468.0 * x + 168.0)
                };
                p.alpha * minus_phi_xx + p.beta * phi_two(self.threshold(), x) - p.beta * self.d(t, x)
            }
            CaseId::Zero => 0.0,
        }
    }

    pub fn d0(&self, _x: f64) -> f64 {
        0.0
    }

    fn threshold(&self) -> f64 {
        self.params.r / self.params.beta
    }

    /// Whether (t, x) lies within `tol` of a locus where the exact solution is
    /// not differentiable.
    pub fn near_kink(&self, t: f64, x: f64, tol: f64) -> bool {
        match self.id {
            CaseId::One => {
                let s = (3.0 * PI * x).sin();
                s.abs() < tol || (t - self.t_active(x)).abs() < tol
            }
            CaseId::Two => (x - 1.0 / 3.0).abs() < tol || (x - 2.0 / 3.0).abs() < tol,
            CaseId::Zero => false,
        }
    }
}

fn phi_two(c: f64, x: f64) -> f64 {
    if x <= 1.0 / 3.0 {
        9.0 * c * (((-27.0 * x + 30.0) * x - 12.0) * x + 2.0) * x
    } else if x < 2.0 / 3.0 {
        c
    } else {
        9.0 * c * ((((-27.0 * x + 78.0) * x - 84.0) * x + 40.0) * x - 7.0)
    }
}

impl TrackingTarget for ManufacturedCase {
    fn phi_desired(&self, t: f64, x: f64) -> f64 {
        self.phi(t, x)
    }

    fn d_desired(&self, t: f64, x: f64) -> f64 {
        self.d(t, x)
    }
}

/// Largest strong-form residual of the elliptic equation and of the damage
/// ODE over `n_samples` points drawn away from the kink loci.
pub fn residual_check(case: &ManufacturedCase, n_samples: usize) -> f64 {
    let p = &case.params;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (a, b) = case.domain();
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < n_samples {
        let t = rng.gen_range(0.0..case.t_final());
        let x = rng.gen_range(a..b);
        if case.near_kink(t, x, 1e-6) {
            continue;
        }
        taken += 1;
        let pde = -p.alpha * case.phi_xx(t, x) + p.beta * case.phi(t, x)
            - p.beta * case.d(t, x)
            - case.l(t, x);
        let w = -p.beta * (case.d(t, x) - case.phi(t, x)) - p.r;
        let ode = case.d_t(t, x) - w.max(0.0) / p.delta;
        worst = worst.max(pde.abs()).max(ode.abs());
    }
    worst
}
