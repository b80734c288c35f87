//! Finite-element infrastructure: meshes, shape functions, quadrature and
//! degree-of-freedom maps for equal-order bilinear/trilinear elements.

mod dofs;
mod mesh;
pub mod meshes;
mod quadrature;
mod shape;

pub use dofs::{DirichletBc, DofMap, Field, FieldLayout, Profile, TimeFunction};
pub use mesh::{ElementKind, Face, Mesh};
pub use quadrature::{face_rule, QuadRule};
pub use shape::{
    face_eval, integration_points, shape_eval, shape_eval_coords, small_strain, FaceValues, IntegrationPoint,
    ShapeValues, MAX_NODES,
};
