//! Tridiagonal matrices over the nodes of a 1D P1 mesh.
//!
//! Every spatial operator here is assembled on the full node set and then
//! viewed through a row and a column [`DofKind`]; dirichlet views drop the
//! two boundary nodes.

use super::mesh::DofKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagMatrix {
    pub(crate) row_kind: DofKind,
    pub(crate) col_kind: DofKind,
    /// Entries (i, i-1) of the node matrix, length n-1.
    pub(crate) lower: Vec<f64>,
    /// Entries (i, i), length n.
    pub(crate) diag: Vec<f64>,
    /// Entries (i, i+1), length n-1.
    pub(crate) upper: Vec<f64>,
}

impl TridiagMatrix {
    pub(crate) fn from_nodal(
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
        row_kind: DofKind,
        col_kind: DofKind,
    ) -> Self {
        debug_assert_eq!(lower.len() + 1, diag.len());
        debug_assert_eq!(upper.len() + 1, diag.len());
        Self {
            row_kind,
            col_kind,
            lower,
            diag,
            upper,
        }
    }

    fn num_nodes(&self) -> usize {
        self.diag.len()
    }

    fn dim(&self, kind: DofKind) -> usize {
        match kind {
            DofKind::Free => self.num_nodes(),
            DofKind::Dirichlet => self.num_nodes() - 2,
        }
    }

    pub fn rows(&self) -> usize {
        self.dim(self.row_kind)
    }

    pub fn cols(&self) -> usize {
        self.dim(self.col_kind)
    }

    pub fn row_kind(&self) -> DofKind {
        self.row_kind
    }

    pub fn col_kind(&self) -> DofKind {
        self.col_kind
    }

    /// Entry (i, j) in dof numbering.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let ni = i + self.row_kind.node_offset();
        let nj = j + self.col_kind.node_offset();
        if ni == nj {
            self.diag[ni]
        } else if nj + 1 == ni {
            self.lower[nj]
        } else if ni + 1 == nj {
            self.upper[ni]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols(), "matvec: column dimension");
        assert_eq!(y.len(), self.rows(), "matvec: row dimension");
        let n = self.num_nodes();
        let co = self.col_kind.node_offset();
        let ro = self.row_kind.node_offset();
        let node_val = |k: usize| -> f64 {
            if k < co || k - co >= x.len() {
                0.0
            } else {
                x[k - co]
            }
        };
        for (i, yi) in y.iter_mut().enumerate() {
            let k = i + ro;
            let mut s = self.diag[k] * node_val(k);
            if k > 0 {
                s += self.lower[k - 1] * node_val(k - 1);
            }
            if k + 1 < n {
                s += self.upper[k] * node_val(k + 1);
            }
            *yi = s;
        }
    }

    /// xᵀ A y for a square view.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// `self + c * other`, both with identical views.
    pub fn add_scaled(&self, c: f64, other: &TridiagMatrix) -> TridiagMatrix {
        assert_eq!(self.row_kind, other.row_kind);
        assert_eq!(self.col_kind, other.col_kind);
        assert_eq!(self.num_nodes(), other.num_nodes());
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        TridiagMatrix {
            row_kind: self.row_kind,
            col_kind: self.col_kind,
            lower: zip(&self.lower, &other.lower),
            diag: zip(&self.diag, &other.diag),
            upper: zip(&self.upper, &other.upper),
        }
    }

    pub fn scaled(&self, c: f64) -> TridiagMatrix {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect();
        TridiagMatrix {
            row_kind: self.row_kind,
            col_kind: self.col_kind,
            lower: s(&self.lower),
            diag: s(&self.diag),
            upper: s(&self.upper),
        }
    }

    /// Same node matrix, seen through different row/column dof kinds.
    pub fn view(&self, row_kind: DofKind, col_kind: DofKind) -> TridiagMatrix {
        TridiagMatrix {
            row_kind,
            col_kind,
            ..self.clone()
        }
    }

    /// Diagonal of the square view.
    pub fn diagonal(&self) -> Vec<f64> {
        let o = self.row_kind.node_offset();
        self.diag[o..o + self.rows()].to_vec()
    }

    /// Thomas factorization of a square view.
    pub fn factor(&self) -> Result<TridiagFactor> {
        if self.row_kind != self.col_kind {
            return Err(Error::InvalidParameter(
                "cannot factor a rectangular view".into(),
            ));
        }
        let n = self.rows();
        let o = self.row_kind.node_offset();
        let diag = &self.diag[o..o + n];
        let lower = if n > 1 { &self.lower[o..o + n - 1] } else { &[][..] };
        let upper = if n > 1 { &self.upper[o..o + n - 1] } else { &[][..] };
        TridiagFactor::new(lower, diag, upper)
    }
}

/// LU factors of a tridiagonal matrix without pivoting (used on SPD systems).
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    lower: Vec<f64>,
    /// Pivots u_i.
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagFactor {
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut pivots = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        let mut u0 = diag[0];
        if u0 == 0.0 {
            return Err(Error::Singular("tridiagonal factorization"));
        }
        pivots.push(u0);
        for i in 1..n {
            let li = lower[i - 1] / u0;
            u0 = diag[i] - li * upper[i - 1];
            if u0 == 0.0 || !u0.is_finite() {
                return Err(Error::Singular("tridiagonal factorization"));
            }
            l.push(li);
            pivots.push(u0);
        }
        Ok(Self {
            lower: l,
            pivots,
            upper: upper.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.pivots.len();
        assert_eq!(x.len(), n, "tridiagonal solve: dimension");
        for i in 1..n {
            x[i] -= self.lower[i - 1] * x[i - 1];
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
    }
}
