//! Test geometries, sphere fitting and the analytic quadrature oracle.

mod fit;
mod generators;
mod harmonics;
mod icosphere;
pub mod oracle;
pub mod quadrature;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::mesh::MeshError;

pub use fit::{fit_sphere, fit_sphere_points, SphereFit};
pub use generators::{
    ellipsoid, normalize_area, perturbed_sphere, random_sphere_mesh, HarmonicCoeff, PerturbationSpec, PerturbedSphere,
};
pub use harmonics::{real_sph_harm, RadialField};
pub use icosphere::{icosphere, MAX_ICOSPHERE_LEVEL};
pub use oracle::{analytic_functionals, AnalyticSurface};

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("icosphere level {0} exceeds the maximum of {MAX_ICOSPHERE_LEVEL}")]
    LevelTooLarge(u32),
    #[error("radial graph 1 + eps*u reaches {min_radius} <= 0 (amplitude too large)")]
    SelfIntersectingRadial { min_radius: f64 },
    #[error("invalid shape specification: {0}")]
    InvalidSpec(String),
    #[error("sphere fit is singular (degenerate or coplanar input)")]
    SingularFit,
    #[error("quadrature not converged for {quantity}: relative change {change:e} on doubling the order")]
    QuadratureNotConverged { quantity: &'static str, change: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
