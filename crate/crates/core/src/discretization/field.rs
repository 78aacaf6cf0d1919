use std::sync::Arc;

use super::assembly::to_nodal;
use super::mesh::{DofKind, SpaceTimeMesh};
use crate::error::{Error, Result};

/// Piecewise constant in time, P1 in space. Row `m` holds the nodal values on
/// slab `m` (zero based).
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    kind: DofKind,
    mesh: Arc<SpaceTimeMesh>,
    cols: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(mesh: Arc<SpaceTimeMesh>, kind: DofKind) -> Self {
        let cols = mesh.space.num_dofs(kind);
        let rows = mesh.time.num_slabs();
        Self {
            kind,
            mesh,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(mesh: Arc<SpaceTimeMesh>, kind: DofKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = mesh.space.num_dofs(kind);
        let m = mesh.time.num_slabs();
        if rows.len() != m {
            return Err(Error::ShapeMismatch {
                what: "field rows",
                expected: m,
                got: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(m * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    what: "field columns",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(Self {
            kind,
            mesh,
            cols,
            data,
        })
    }

    /// Row `m` set to `f(m, node_coordinate)` at the dofs of `kind`.
    pub fn from_fn<F: Fn(usize, f64) -> f64>(mesh: Arc<SpaceTimeMesh>, kind: DofKind, f: F) -> Self {
        let mut out = Self::zeros(mesh, kind);
        let off = kind.node_offset();
        for m in 0..out.num_rows() {
            for j in 0..out.cols {
                let x = out.mesh.space.nodes()[j + off];
                out.data[m * out.cols + j] = f(m, x);
            }
        }
        out
    }

    pub fn kind(&self) -> DofKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<SpaceTimeMesh> {
        &self.mesh
    }

    pub fn num_rows(&self) -> usize {
        self.mesh.time.num_slabs()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Nodal values of row `m` including boundary nodes.
    pub fn nodal_row(&self, m: usize) -> Vec<f64> {
        to_nodal(self.kind, self.row(m), self.mesh.space.num_nodes())
    }

    /// Value at (t, x) by P1 interpolation on the slab containing `t`.
    /// Dirichlet fields vanish at the boundary nodes.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let m = self.mesh.time.locate(t);
        let nodal = self.nodal_row(m);
        let nodes = self.mesh.space.nodes();
        let e = match nodes[1..].binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => i,
            Err(i) => i.min(nodes.len() - 2),
        };
        let (a, b) = (nodes[e], nodes[e + 1]);
        let s = (x - a) / (b - a);
        nodal[e] * (1.0 - s) + nodal[e + 1] * s
    }

    pub fn same_shape(&self, other: &SpaceTimeField) -> Result<()> {
        if self.kind != other.kind
            || self.cols != other.cols
            || !(Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh)
        {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> SpaceTimeField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn max_abs_diff(&self, other: &SpaceTimeField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Jump across t_m: row m minus row m-1, with a zero ghost row before slab 0.
pub fn jump(u: &SpaceTimeField, m: usize) -> Result<Vec<f64>> {
    let rows = u.num_rows();
    if m >= rows {
        return Err(Error::IndexOutOfRange { index: m, len: rows });
    }
    Ok(if m == 0 {
        u.row(0).to_vec()
    } else {
        u.row(m).iter().zip(u.row(m - 1)).map(|(a, b)| a - b).collect()
    })
}

/// Continuous piecewise linear-in-time lift of a dG(0) field, starting at 0:
/// it ramps from the previous slab value to the current one across each slab.
#[derive(Debug, Clone)]
pub struct ControlLift {
    field: SpaceTimeField,
}

pub fn lift_control(u: &SpaceTimeField) -> ControlLift {
    ControlLift { field: u.clone() }
}

impl ControlLift {
    fn previous(&self, m: usize) -> Vec<f64> {
        if m == 0 {
            vec![0.0; self.field.num_cols()]
        } else {
            self.field.row(m - 1).to_vec()
        }
    }

    /// Coefficient vector of the lift at time `t`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 {
            return vec![0.0; self.field.num_cols()];
        }
        let tm = &self.field.mesh().time;
        let m = tm.locate(t);
        let (t0, t1) = tm.slab(m);
        let s = (t - t0) / (t1 - t0);
        let prev = self.previous(m);
        prev.iter()
            .zip(self.field.row(m))
            .map(|(p, c)| p + s * (c - p))
            .collect()
    }

    /// Time derivative of the lift at `t` (constant on each slab).
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let tm = &self.field.mesh().time;
        let m = tm.locate(t);
        let tau = tm.tau(m);
        let prev = self.previous(m);
        prev.iter()
            .zip(self.field.row(m))
            .map(|(p, c)| (c - p) / tau)
            .collect()
    }

    pub fn field(&self) -> &SpaceTimeField {
        &self.field
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(m: usize, n: usize) -> Arc<SpaceTimeMesh> {
        Arc::new(SpaceTimeMesh::uniform(1.0, m, 0.0, 1.0, n).unwrap())
    }

    #[test]
    fn jumps_of_simple_fields() {
        let msh = mesh(3, 4);
        let c = SpaceTimeField::from_fn(msh.clone(), DofKind::Free, |_, x| 1.0 + x);
        assert_eq!(jump(&c, 0).unwrap(), c.row(0).to_vec());
        for m in 1..3 {
            assert!(jump(&c, m).unwrap().iter().all(|&v| v == 0.0));
        }
        assert!(matches!(jump(&c, 3), Err(Error::IndexOutOfRange { .. })));
        let z = SpaceTimeField::zeros(msh, DofKind::Dirichlet);
        assert!((0..3).all(|m| jump(&z, m).unwrap().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn jumps_of_two_row_field() {
        let msh = mesh(2, 2);
        let u = SpaceTimeField::from_rows(msh, DofKind::Dirichlet, vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(jump(&u, 0).unwrap(), vec![0.0]);
        assert_eq!(jump(&u, 1).unwrap(), vec![1.0]);
    }

    #[test]
    fn dirichlet_field_vanishes_on_boundary() {
        let u = SpaceTimeField::from_fn(mesh(2, 4), DofKind::Dirichlet, |_, _| 3.0);
        assert_eq!(u.eval(0.3, 0.0), 0.0);
        assert_eq!(u.eval(0.3, 1.0), 0.0);
        assert_eq!(u.eval(0.3, 0.5), 3.0);
    }

    #[test]
    fn lift_of_constant_field() {
        let u = SpaceTimeField::from_fn(mesh(4, 2), DofKind::Free, |_, _| 2.0);
        let lift = lift_control(&u);
        assert_eq!(lift.eval(0.0), vec![0.0; 3]);
        assert!((lift.eval(0.125)[1] - 1.0).abs() < 1e-15);
        assert_eq!(lift.eval(0.25), vec![2.0; 3]);
        assert_eq!(lift.eval(0.8), vec![2.0; 3]);
    }

    #[test]
    fn shape_checks() {
        let a = SpaceTimeField::zeros(mesh(2, 4), DofKind::Free);
        let b = SpaceTimeField::zeros(mesh(2, 8), DofKind::Free);
        let c = SpaceTimeField::zeros(mesh(2, 4), DofKind::Dirichlet);
        assert!(a.axpy(1.0, &b).is_err());
        assert!(a.axpy(1.0, &c).is_err());
        assert!(SpaceTimeField::from_rows(mesh(2, 4), DofKind::Free, vec![vec![0.0; 5]]).is_err());
    }
}
