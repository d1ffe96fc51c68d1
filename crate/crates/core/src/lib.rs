//! Procedural plant geometry.
//!
//! A plant descriptor (YAML) is resolved into per-node parameters, turned into
//! stems swept along integrated centerlines and leaves deformed from planar
//! control grids, and exported as B-spline surfaces (SMESH) or triangle
//! meshes (STL). [`metrics`] compares a model against a target point cloud.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembler;
pub mod descriptor;
pub mod frame;
pub mod io;
pub mod leaf;
pub mod metrics;
pub mod spline;

/// Points and directions, in centimetres unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Plant architecture: grasses with clasping blades, or stems with trifoliate
/// compound leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Monocot,
    Dicot,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Monocot => "monocot",
            Family::Dicot => "dicot",
        }
    }
}

pub use assembler::{generate_plant, surface_census, Census, OrganKind, OrganSurface, PlantModel};
pub use descriptor::{parse_descriptor, resolve_parameters, seed_template, PlantDescriptor};
pub use spline::{BSplineSurface, KnotVector, TriangleMesh};
