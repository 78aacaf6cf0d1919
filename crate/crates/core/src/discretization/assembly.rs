//! P1 assembly on a 1D mesh: mass, stiffness, weighted mass, load vectors and
//! L² projections.

use super::mesh::{check_len, DofKind, SpatialMesh1D, TemporalMesh};
use super::quadrature::{GaussRule, QuadratureConfig};
use super::tridiag::TridiagMatrix;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassMode {
    Consistent,
    Lumped,
}

/// Gauss points of every element, with the two local hat functions tabulated.
#[derive(Debug, Clone)]
pub struct SpatialQuadrature {
    num_elements: usize,
    q: usize,
    /// Physical coordinates, element-major (`e * q + k`).
    points: Vec<f64>,
    /// Physical weights, element-major.
    weights: Vec<f64>,
    /// Left and right hat values at the reference points.
    hat_left: Vec<f64>,
    hat_right: Vec<f64>,
}

impl SpatialQuadrature {
    pub fn new(mesh: &SpatialMesh1D, q: usize) -> Self {
        let rule = GaussRule::new(q);
        let ne = mesh.num_elements();
        let mut points = Vec::with_capacity(ne * q);
        let mut weights = Vec::with_capacity(ne * q);
        for e in 0..ne {
            let (a, b) = mesh.element(e);
            for (x, w) in rule.mapped(a, b) {
                points.push(x);
                weights.push(w);
            }
        }
        let hat_left = rule.points.iter().map(|p| 0.5 * (1.0 - p)).collect();
        let hat_right = rule.points.iter().map(|p| 0.5 * (1.0 + p)).collect();
        Self {
            num_elements: ne,
            q,
            points,
            weights,
            hat_left,
            hat_right,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn points_per_element(&self) -> usize {
        self.q
    }

    /// Total number of quadrature points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn num_nodes(&self) -> usize {
        self.num_elements + 1
    }

    /// Values of the P1 function with coefficients `coeffs` at all quadrature points.
    pub fn interpolate(&self, kind: DofKind, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.interpolate_into(kind, coeffs, &mut out);
        out
    }

    pub fn interpolate_into(&self, kind: DofKind, coeffs: &[f64], out: &mut [f64]) {
        let nodal = to_nodal(kind, coeffs, self.num_nodes());
        let q = self.q;
        for e in 0..self.num_elements {
            let (ul, ur) = (nodal[e], nodal[e + 1]);
            let row = &mut out[e * q..(e + 1) * q];
            for k in 0..q {
                row[k] = ul * self.hat_left[k] + ur * self.hat_right[k];
            }
        }
    }

    /// Load vector Σ_q w_q v_q φ_i(x_q) of values given at the quadrature points.
    pub fn load_from_values(&self, kind: DofKind, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len(), "quadrature values");
        let n = self.num_nodes();
        let mut nodal = vec![0.0; n];
        let q = self.q;
        for e in 0..self.num_elements {
            let mut sl = 0.0;
            let mut sr = 0.0;
            for k in 0..q {
                let wv = self.weights[e * q + k] * values[e * q + k];
                sl += wv * self.hat_left[k];
                sr += wv * self.hat_right[k];
            }
            nodal[e] += sl;
            nodal[e + 1] += sr;
        }
        from_nodal(kind, nodal)
    }

    /// Load vector of an analytic function.
    pub fn load<F: Fn(f64) -> f64>(&self, kind: DofKind, f: F) -> Vec<f64> {
        let values: Vec<f64> = self.points.iter().map(|&x| f(x)).collect();
        self.load_from_values(kind, &values)
    }

    /// Σ_q w_q v_q over all quadrature points.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted mass matrix with entries Σ_q w_q g_q φ_i φ_j.
    pub fn weighted_mass(&self, weight: &[f64]) -> TridiagMatrix {
        assert_eq!(weight.len(), self.len());
        let n = self.num_nodes();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let q = self.q;
        for e in 0..self.num_elements {
            let (mut ll, mut lr, mut rr) = (0.0, 0.0, 0.0);
            for k in 0..q {
                let wg = self.weights[e * q + k] * weight[e * q + k];
                ll += wg * self.hat_left[k] * self.hat_left[k];
                lr += wg * self.hat_left[k] * self.hat_right[k];
                rr += wg * self.hat_right[k] * self.hat_right[k];
            }
            diag[e] += ll;
            diag[e + 1] += rr;
            off[e] += lr;
        }
        TridiagMatrix::from_nodal(off.clone(), diag, off, DofKind::Free, DofKind::Free)
    }
}

/// Extend dof coefficients to all nodes (zero boundary values for dirichlet).
pub fn to_nodal(kind: DofKind, coeffs: &[f64], num_nodes: usize) -> Vec<f64> {
    match kind {
        DofKind::Free => {
            assert_eq!(coeffs.len(), num_nodes, "free coefficients");
            coeffs.to_vec()
        }
        DofKind::Dirichlet => {
            assert_eq!(coeffs.len() + 2, num_nodes, "dirichlet coefficients");
            let mut v = Vec::with_capacity(num_nodes);
            v.push(0.0);
            v.extend_from_slice(coeffs);
            v.push(0.0);
            v
        }
    }
}

/// Restrict a nodal vector to the dofs of `kind`.
pub fn from_nodal(kind: DofKind, mut nodal: Vec<f64>) -> Vec<f64> {
    match kind {
        DofKind::Free => nodal,
        DofKind::Dirichlet => {
            nodal.pop();
            nodal.remove(0);
            nodal
        }
    }
}

/// P1 mass matrix; lumped mode replaces it by its diagonal of row sums.
pub fn assemble_mass(mesh: &SpatialMesh1D, kind: DofKind, mode: MassMode) -> TridiagMatrix {
    let n = mesh.num_nodes();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for e in 0..mesh.num_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        match mode {
            MassMode::Consistent => {
                diag[e] += h / 3.0;
                diag[e + 1] += h / 3.0;
                off[e] += h / 6.0;
            }
            MassMode::Lumped => {
                diag[e] += h / 2.0;
                diag[e + 1] += h / 2.0;
            }
        }
    }
    TridiagMatrix::from_nodal(off.clone(), diag, off, kind, kind)
}

/// P1 stiffness matrix (∇φ_j, ∇φ_i) with unit coefficient.
pub fn assemble_stiffness(mesh: &SpatialMesh1D, kind: DofKind) -> TridiagMatrix {
    let n = mesh.num_nodes();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for e in 0..mesh.num_elements() {
        let (a, b) = mesh.element(e);
        let k = 1.0 / (b - a);
        diag[e] += k;
        diag[e + 1] += k;
        off[e] -= k;
    }
    TridiagMatrix::from_nodal(off.clone(), diag, off, kind, kind)
}

/// Mass matrix weighted by `weight`, given at the element quadrature points
/// (`elements × q_space`, element-major).
pub fn assemble_weighted_mass(
    quad: &SpatialQuadrature,
    kind_row: DofKind,
    kind_col: DofKind,
    weight: &[f64],
) -> Result<TridiagMatrix> {
    check_len("weight array (elements x q_space)", quad.len(), weight.len())?;
    Ok(quad.weighted_mass(weight).view(kind_row, kind_col))
}

/// Coefficients of the L² projection of `f` onto the P1 space of `kind`.
pub fn l2_project_space<F: Fn(f64) -> f64>(
    f: F,
    mesh: &SpatialMesh1D,
    kind: DofKind,
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let sq = SpatialQuadrature::new(mesh, quad.q_space);
    let b = sq.load(kind, f);
    let m = assemble_mass(mesh, kind, MassMode::Consistent).factor()?;
    Ok(m.solve(&b))
}

/// Load vector of the slab average (1/τ_m) ∫_{I_m} l(t, ·) dt, computed with
/// `q_time` Gauss points in time and the spatial quadrature in space.
pub fn time_average_load<F: Fn(f64, f64) -> f64>(
    l: F,
    slab: usize,
    tmesh: &TemporalMesh,
    quad: &SpatialQuadrature,
    kind: DofKind,
    q_time: usize,
) -> Vec<f64> {
    let values = time_average_values(&l, slab, tmesh, quad, q_time);
    quad.load_from_values(kind, &values)
}

/// Slab average of `l` at every spatial quadrature point.
pub fn time_average_values<F: Fn(f64, f64) -> f64>(
    l: &F,
    slab: usize,
    tmesh: &TemporalMesh,
    quad: &SpatialQuadrature,
    q_time: usize,
) -> Vec<f64> {
    let (t0, t1) = tmesh.slab(slab);
    let tau = t1 - t0;
    let rule = GaussRule::new(q_time);
    let mut values = vec![0.0; quad.len()];
    for (t, wt) in rule.mapped(t0, t1) {
        let c = wt / tau;
        for (v, &x) in values.iter_mut().zip(quad.points()) {
            *v += c * l(t, x);
        }
    }
    values
}
