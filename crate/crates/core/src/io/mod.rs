//! File formats: STL meshes, SMESH parametric surfaces and point clouds.

pub mod cloud;
pub mod smesh;
pub mod stl;

pub use cloud::{read_point_cloud, write_ply, write_xyz, CloudError, CloudFormat, LengthUnit, PointCloud};
pub use smesh::{read_smesh, write_smesh, SmeshDocument, SmeshError, SMESH_VERSION};
pub use stl::{read_stl, stl_bytes, write_stl, StlError, StlMode};
