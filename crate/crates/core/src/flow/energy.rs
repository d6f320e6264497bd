//! Discrete Willmore energy, its exact gradient and the pointwise operator.

use rayon::prelude::*;

use crate::autodiff::{Dual, Real};
use crate::geometry::{
    areas_and_laplacian, face_points, face_terms, CotanLaplacian, GeometryError, VertexGeometry,
};
use crate::mesh::{TriMesh, Vec3};

/// `W = ¼ Σ Ā_i |H⃗_i|² = (1/16) Σ |L_i|² / Ā_i`.
pub fn discrete_energy(mesh: &TriMesh) -> Result<f64, GeometryError> {
    let (area, lap) = areas_and_laplacian(mesh)?;
    Ok(area.iter().zip(&lap).map(|(a, l)| l.norm_squared() / a).sum::<f64>() / 16.0)
}

/// Exact gradient of [`discrete_energy`] with respect to every vertex position.
///
/// The energy depends on each face only through the face's contributions to
/// `L_i` and `Ā_i`, so with the adjoints `∂W/∂L_i = L_i / (8Ā_i)` and
/// `∂W/∂Ā_i = -|L_i|² / (16Ā_i²)` the gradient is a sum of per-face
/// derivatives, taken with 9-slot dual numbers.
pub fn energy_gradient(mesh: &TriMesh) -> Result<Vec<Vec3>, GeometryError> {
    let (area, lap) = areas_and_laplacian(mesh)?;
    let adj_l: Vec<Vec3> = lap.iter().zip(&area).map(|(l, a)| l / (8.0 * a)).collect();
    let adj_a: Vec<f64> = lap.iter().zip(&area).map(|(l, a)| -l.norm_squared() / (16.0 * a * a)).collect();

    let per_face: Vec<[Vec3; 3]> = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(fi, f)| {
            let p = face_points(mesh, fi);
            let mut x = [[Dual::<9>::constant(0.0); 3]; 3];
            for a in 0..3 {
                for k in 0..3 {
                    x[a][k] = Dual::var(p[a][k], 3 * a + k);
                }
            }
            let t = face_terms(&x);
            let mut phi = Dual::<9>::zero();
            for a in 0..3 {
                let v = f[a];
                for k in 0..3 {
                    phi += t.lap[a][k] * adj_l[v][k];
                }
                phi += t.voronoi[a] * adj_a[v];
            }
            [0, 1, 2].map(|a| Vec3::new(phi.d[3 * a], phi.d[3 * a + 1], phi.d[3 * a + 2]))
        })
        .collect();

    let mut grad = vec![Vec3::zeros(); mesh.num_vertices()];
    for (f, g) in mesh.faces().iter().zip(&per_face) {
        for a in 0..3 {
            grad[f[a]] += g[a];
        }
    }
    Ok(grad)
}

/// `W_i = (ΔH)_i + |A°|²_i H_i` with the cotangent Laplace-Beltrami operator.
pub fn willmore_operator_pointwise(mesh: &TriMesh, geom: &VertexGeometry) -> Result<Vec<f64>, GeometryError> {
    let lb = CotanLaplacian::new(mesh)?;
    let lap_h = lb.laplace_beltrami(&geom.scalar_h, &geom.area);
    Ok((0..geom.len()).map(|i| lap_h[i] + geom.tracefree_sq[i] * geom.scalar_h[i]).collect())
}

/// Conformal Killing fields of `R³` used for the invariance residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KillingField {
    Translation(Vec3),
    Dilation,
    /// `X(x) = axis × x`.
    Rotation(Vec3),
}

impl KillingField {
    pub fn at(&self, x: &Vec3, center: &Vec3) -> Vec3 {
        match self {
            KillingField::Translation(e) => *e,
            KillingField::Dilation => x - center,
            KillingField::Rotation(axis) => axis.cross(&(x - center)),
        }
    }
}

/// `Σ ⟨-grad_i, X(f_i)⟩ / (Σ |grad_i| · max |X(f_i)|)`.
///
/// Dilations and rotations are taken about the area barycenter so the
/// normalization does not depend on where the mesh sits.
pub fn conformal_killing_residual(mesh: &TriMesh, field: KillingField) -> Result<f64, GeometryError> {
    let grad = energy_gradient(mesh)?;
    Ok(killing_residual_with(mesh, &grad, field))
}

pub(crate) fn killing_residual_with(mesh: &TriMesh, grad: &[Vec3], field: KillingField) -> f64 {
    let center = area_barycenter(mesh);
    let mut pairing = 0.0;
    let mut gsum = 0.0;
    let mut xmax = 0.0f64;
    for (p, g) in mesh.vertices().iter().zip(grad) {
        let x = field.at(p, &center);
        pairing -= g.dot(&x);
        gsum += g.norm();
        xmax = xmax.max(x.norm());
    }
    let scale = gsum * xmax;
    if scale > 0.0 {
        (pairing / scale).abs()
    } else {
        0.0
    }
}

pub(crate) fn area_barycenter(mesh: &TriMesh) -> Vec3 {
    let mut area = 0.0;
    let mut moment = Vec3::zeros();
    for f in 0..mesh.num_faces() {
        let a = mesh.face_area(f);
        let [p, q, r] = mesh.face_positions(f);
        area += a;
        moment += (p + q + r) * (a / 3.0);
    }
    moment / area
}
