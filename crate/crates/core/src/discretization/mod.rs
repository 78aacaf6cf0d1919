//! Meshes, P1 assembly, projections and the dG(0)×P1 field container.

mod assembly;
mod field;
mod mesh;
mod norms;
mod quadrature;
mod tridiag;

pub use assembly::{
    assemble_mass, assemble_stiffness, assemble_weighted_mass, from_nodal, l2_project_space,
    time_average_load, time_average_values, to_nodal, MassMode, SpatialQuadrature,
};
pub use field::{jump, lift_control, ControlLift, SpaceTimeField};
pub use norms::{slab_error_sq, space_time_error_sq};
pub use mesh::{DofKind, ModelParams, SpaceTimeMesh, SpatialMesh1D, TemporalMesh};
pub use quadrature::{GaussRule, QuadratureConfig};
pub use tridiag::{TridiagFactor, TridiagMatrix};

pub(crate) use mesh::check_len;
