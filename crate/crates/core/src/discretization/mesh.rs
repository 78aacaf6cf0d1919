use crate::error::{ensure, Error, Result};

/// Physical constants of the state system and the time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Diffusion coefficient of the elliptic equation.
    pub alpha: f64,
    /// Coupling/penalty coefficient.
    pub beta: f64,
    /// Viscosity of the damage evolution.
    pub delta: f64,
    /// Activation threshold.
    pub r: f64,
    /// Final time.
    pub t_final: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, delta: f64, r: f64, t_final: f64) -> Result<Self> {
        for (name, v) in [
            ("alpha", alpha),
            ("beta", beta),
            ("delta", delta),
            ("r", r),
            ("T", t_final),
        ] {
            ensure(v > 0.0 && v.is_finite(), || {
                format!("{name} must be positive and finite, got {v}")
            })?;
        }
        Ok(Self {
            alpha,
            beta,
            delta,
            r,
            t_final,
        })
    }

    pub fn beta_over_delta(&self) -> f64 {
        self.beta / self.delta
    }
}

/// Partition 0 = t_0 < t_1 < ... < t_M = T of the time horizon.
///
/// Slab `m` (zero based) is the interval (t_m, t_{m+1}].
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    points: Vec<f64>,
    lengths: Vec<f64>,
    tau_max: f64,
}

impl TemporalMesh {
    /// Uniform mesh with `m` slabs on [0, t_final].
    pub fn uniform(t_final: f64, m: usize) -> Result<Self> {
        ensure(m >= 1, || "temporal mesh needs M >= 1".into())?;
        ensure(t_final > 0.0 && t_final.is_finite(), || {
            format!("T must be positive, got {t_final}")
        })?;
        let mut points: Vec<f64> = (0..=m).map(|i| t_final * i as f64 / m as f64).collect();
        points[m] = t_final;
        Self::from_points(points)
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        ensure(points.len() >= 2, || "temporal mesh needs at least 2 points".into())?;
        ensure(points[0] == 0.0, || format!("first time point must be 0, got {}", points[0]))?;
        ensure(points.windows(2).all(|w| w[1] > w[0]), || {
            "time points must be strictly increasing".into()
        })?;
        let lengths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        let tau_max = lengths.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            points,
            lengths,
            tau_max,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Number of slabs M.
    pub fn num_slabs(&self) -> usize {
        self.lengths.len()
    }

    pub fn tau(&self, slab: usize) -> f64 {
        self.lengths[slab]
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn t_final(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Endpoints (t_m, t_{m+1}) of slab `m`.
    pub fn slab(&self, slab: usize) -> (f64, f64) {
        (self.points[slab], self.points[slab + 1])
    }

    /// Slab containing `t`, using the left-open convention; `t = 0` maps to slab 0.
    pub fn locate(&self, t: f64) -> usize {
        let m = self.num_slabs();
        match self.points[1..].binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => i.min(m - 1),
        }
    }
}

/// Nodes a = x_0 < ... < x_N = b of a 1D P1 mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh1D {
    nodes: Vec<f64>,
    h_max: f64,
}

impl SpatialMesh1D {
    /// Uniform mesh with `n` elements on [a, b].
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        ensure(n >= 2, || format!("spatial mesh needs N >= 2 elements, got {n}"))?;
        ensure(a < b, || format!("need a < b, got a={a}, b={b}"))?;
        let mut nodes: Vec<f64> = (0..=n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .collect();
        nodes[n] = b;
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        ensure(nodes.len() >= 3, || "spatial mesh needs at least 2 elements".into())?;
        ensure(nodes.windows(2).all(|w| w[1] > w[0]), || {
            "nodes must be strictly increasing".into()
        })?;
        let h_max = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(Self { nodes, h_max })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn num_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn num_dofs(&self, kind: DofKind) -> usize {
        match kind {
            DofKind::Dirichlet => self.num_nodes() - 2,
            DofKind::Free => self.num_nodes(),
        }
    }
}

/// Degrees of freedom of a P1 field: all nodes, or interior nodes only with
/// zero boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKind {
    Dirichlet,
    Free,
}

impl DofKind {
    /// Offset of dof 0 within the node numbering.
    pub fn node_offset(self) -> usize {
        match self {
            DofKind::Dirichlet => 1,
            DofKind::Free => 0,
        }
    }
}

/// Temporal and spatial mesh of one space-time discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeMesh {
    pub time: TemporalMesh,
    pub space: SpatialMesh1D,
}

impl SpaceTimeMesh {
    pub fn new(time: TemporalMesh, space: SpatialMesh1D) -> Self {
        Self { time, space }
    }

    /// Uniform `m` slabs on [0, t_final] and `n` elements on [a, b].
    pub fn uniform(t_final: f64, m: usize, a: f64, b: f64, n: usize) -> Result<Self> {
        Ok(Self {
            time: TemporalMesh::uniform(t_final, m)?,
            space: SpatialMesh1D::uniform(a, b, n)?,
        })
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            what,
            expected,
            got,
        })
    }
}
