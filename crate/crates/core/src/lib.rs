//! Discrete Willmore flow on genus-0 triangle meshes.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: validated closed triangle meshes and OFF/OBJ I/O;
//! - [`geometry`]: per-vertex discrete curvature (cotangent mean curvature,
//!   angle-defect Gauss curvature, tracefree density);
//! - [`functionals`]: area, barycenter, quadratic moment, volume, total mean
//!   curvature, energies, isoperimetric deficit and DLM ratio;
//! - [`flow`]: the energy-monotone discrete Willmore flow with remeshing and
//!   space-time diagnostics;
//! - [`shapes`]: test surfaces, sphere fitting and the analytic oracle;
//! - [`harness`]: stability, limit-sphere, DLM and deficit experiments.

pub mod autodiff;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod shapes;

pub use functionals::{dlm_ratio, iso_deficit, measure, FunctionalError, FunctionalRecord};
pub use geometry::{pl_gradient_sq_integral, sup_tracefree, vertex_geometry, GeometryError, VertexGeometry};
pub use mesh::{read_mesh, write_mesh, MeshError, MeshFormat, TriMesh, Vec3};
pub use shapes::{
    analytic_functionals, ellipsoid, fit_sphere, icosphere, normalize_area, perturbed_sphere, AnalyticSurface,
    PerturbationSpec, ShapeError, SphereFit,
};
