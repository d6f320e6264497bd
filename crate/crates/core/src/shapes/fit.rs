use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::geometry::VertexGeometry;
use crate::mesh::{TriMesh, Vec3};

use super::ShapeError;

const MAX_REFINEMENTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: Vec3,
    pub radius: f64,
    /// Area-weighted RMS of `|f_i - x| - R`.
    pub rms: f64,
}

/// Area-weighted sphere fit of the mesh vertices.
pub fn fit_sphere(mesh: &TriMesh, geom: &VertexGeometry) -> Result<SphereFit, ShapeError> {
    fit_sphere_points(mesh.vertices(), &geom.area)
}

/// Weighted algebraic fit followed by Gauss-Newton on the geometric residual.
pub fn fit_sphere_points(points: &[Vec3], weights: &[f64]) -> Result<SphereFit, ShapeError> {
    assert_eq!(points.len(), weights.len());
    if points.len() < 4 {
        return Err(ShapeError::SingularFit);
    }
    // Shift to the weighted centroid for conditioning.
    let wsum: f64 = weights.iter().sum();
    let origin = points.iter().zip(weights).map(|(p, w)| p * *w).sum::<Vec3>() / wsum;

    // |p|² = 2⟨x, p⟩ + (R² - |x|²), unknowns (x, c).
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Vector4::<f64>::zeros();
    for (p, &w) in points.iter().zip(weights) {
        let q = p - origin;
        let row = Vector4::new(2.0 * q.x, 2.0 * q.y, 2.0 * q.z, 1.0);
        ata += row * row.transpose() * w;
        atb += row * (q.norm_squared() * w);
    }
    let svd = ata.svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-12 * smax) {
        return Err(ShapeError::SingularFit);
    }
    let sol = svd.solve(&atb, 0.0).map_err(|_| ShapeError::SingularFit)?;
    let mut center = Vec3::new(sol[0], sol[1], sol[2]);
    let r2 = sol[3] + center.norm_squared();
    if !(r2 > 0.0) {
        return Err(ShapeError::SingularFit);
    }
    let mut radius = r2.sqrt();

    for _ in 0..MAX_REFINEMENTS {
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for (p, &w) in points.iter().zip(weights) {
            let d = p - origin - center;
            let dist = d.norm();
            if dist == 0.0 {
                continue;
            }
            let res = dist - radius;
            let u = d / dist;
            let jac = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            jtj += jac * jac.transpose() * w;
            jtr += jac * (res * w);
        }
        let Some(step) = jtj.cholesky().map(|c| c.solve(&(-jtr))) else { break };
        center += Vec3::new(step[0], step[1], step[2]);
        radius += step[3];
        if step.norm() <= 1e-15 * (1.0 + radius) {
            break;
        }
    }

    let mut acc = 0.0;
    for (p, &w) in points.iter().zip(weights) {
        acc += w * ((p - origin - center).norm() - radius).powi(2);
    }
    Ok(SphereFit { center: center + origin, radius, rms: (acc / wsum).sqrt() })
}
