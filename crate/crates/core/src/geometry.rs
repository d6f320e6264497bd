//! Per-vertex discrete curvature.
//!
//! Conventions: `mean_curv_vec` is the cotangent Laplacian of the position,
//! `H⃗ = Δf`, which points into the enclosed region. Scalar mean curvature is
//! taken against the interior normal, so a round sphere of radius `R` has
//! `H = 2/R > 0`. Gauss curvature is the angle defect over the mixed Voronoi
//! area, and the tracefree density comes from the Gauss identity
//! `|A°|² = H²/2 - 2K`, clamped at zero.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::autodiff::{v3, Real};
use crate::mesh::{face_angles, TriMesh, Vec3};

/// Cotangent magnitudes above this are treated as a collapsed angle.
pub const MAX_COTANGENT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("face {face} has cotangent weight {cot:e} (near-zero angle)")]
    NumericallyDegenerate { face: usize, cot: f64 },
    #[error("field has {got} values, mesh has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
}

/// Quantities one triangle contributes to its three corners.
#[derive(Clone, Copy, Debug)]
pub(crate) struct FaceTerms<T> {
    /// Cotangent of the interior angle at each corner.
    pub cot: [T; 3],
    /// Mixed Voronoi area assigned to each corner.
    pub voronoi: [T; 3],
    /// `Σ cot (p_i - p_j)` restricted to this face; twice the area gradient.
    pub lap: [[T; 3]; 3],
}

pub(crate) fn face_terms<T: Real>(p: &[[T; 3]; 3]) -> FaceTerms<T> {
    let e01 = v3::sub(p[1], p[0]);
    let e02 = v3::sub(p[2], p[0]);
    let n = v3::cross(e01, e02);
    let dbl_area = v3::norm(n);
    let area = dbl_area * 0.5;

    let mut cot = [T::zero(); 3];
    let mut sq = [T::zero(); 3]; // squared length of the edge opposite each corner
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let u = v3::sub(p[b], p[a]);
        let v = v3::sub(p[c], p[a]);
        cot[a] = v3::dot(u, v) / dbl_area;
        let opp = v3::sub(p[c], p[b]);
        sq[a] = v3::dot(opp, opp);
    }

    let obtuse = (0..3).find(|&a| cot[a].val() < 0.0);
    let mut voronoi = [T::zero(); 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        voronoi[a] = match obtuse {
            None => (sq[c] * cot[c] + sq[b] * cot[b]) * 0.125,
            Some(o) if o == a => area * 0.5,
            Some(_) => area * 0.25,
        };
    }

    let mut lap = [[T::zero(); 3]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        lap[a] = v3::add(
            v3::scale(v3::sub(p[a], p[b]), cot[c]),
            v3::scale(v3::sub(p[a], p[c]), cot[b]),
        );
    }
    FaceTerms { cot, voronoi, lap }
}

pub(crate) fn to_arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub(crate) fn face_points(mesh: &TriMesh, f: usize) -> [[f64; 3]; 3] {
    let [a, b, c] = mesh.face_positions(f);
    [to_arr(&a), to_arr(&b), to_arr(&c)]
}

/// Face terms for every face, checking cotangent magnitudes.
pub(crate) fn all_face_terms(mesh: &TriMesh) -> Result<Vec<FaceTerms<f64>>, GeometryError> {
    (0..mesh.num_faces())
        .into_par_iter()
        .map(|f| {
            let t = face_terms(&face_points(mesh, f));
            match t.cot.iter().find(|c| !(c.abs() <= MAX_COTANGENT)) {
                Some(&cot) => Err(GeometryError::NumericallyDegenerate { face: f, cot }),
                None => Ok(t),
            }
        })
        .collect()
}

/// Mixed Voronoi vertex areas and the cotangent sums `L_i = Σ_j (cot α + cot β)(f_i - f_j)`.
pub(crate) fn areas_and_laplacian(mesh: &TriMesh) -> Result<(Vec<f64>, Vec<Vec3>), GeometryError> {
    let terms = all_face_terms(mesh)?;
    let mut area = vec![0.0; mesh.num_vertices()];
    let mut lap = vec![Vec3::zeros(); mesh.num_vertices()];
    for (f, t) in mesh.faces().iter().zip(&terms) {
        for a in 0..3 {
            area[f[a]] += t.voronoi[a];
            lap[f[a]] += Vec3::from(t.lap[a]);
        }
    }
    Ok((area, lap))
}

/// Per-vertex discrete curvature data.
#[derive(Clone, Debug)]
pub struct VertexGeometry {
    /// Mixed Voronoi area `Ā_i`.
    pub area: Vec<f64>,
    /// `H⃗_i`, the cotangent Laplacian of the position.
    pub mean_curv_vec: Vec<Vec3>,
    /// Unit interior normal (negated angle-weighted face normal average).
    pub normal: Vec<Vec3>,
    /// `|H⃗_i|`, signed by `⟨H⃗_i, ν_i⟩`.
    pub scalar_h: Vec<f64>,
    /// Angle defect over `Ā_i`.
    pub gauss_k: Vec<f64>,
    /// `max(0, H²/2 - 2K)`.
    pub tracefree_sq: Vec<f64>,
    /// `Σ Ā_i max(0, 2K - H²/2)`, the area-weighted amount removed by clamping.
    pub clamped_mass: f64,
}

impl VertexGeometry {
    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    /// `Σ Ā_i K_i`, equal to `2πχ = 4π` up to roundoff.
    pub fn total_gauss_curvature(&self) -> f64 {
        self.area.iter().zip(&self.gauss_k).map(|(a, k)| a * k).sum()
    }

    /// `Σ Ā_i (H²/2 - 2K)` before clamping.
    pub fn unclamped_tracefree_energy(&self) -> f64 {
        (0..self.len())
            .map(|i| self.area[i] * (0.5 * self.scalar_h[i].powi(2) - 2.0 * self.gauss_k[i]))
            .sum()
    }
}

pub fn vertex_geometry(mesh: &TriMesh) -> Result<VertexGeometry, GeometryError> {
    let n = mesh.num_vertices();
    let terms = all_face_terms(mesh)?;
    let mut area = vec![0.0; n];
    let mut lap = vec![Vec3::zeros(); n];
    let mut angle_sum = vec![0.0; n];
    let mut outward = vec![Vec3::zeros(); n];
    for (fi, (f, t)) in mesh.faces().iter().zip(&terms).enumerate() {
        let angles = face_angles(&mesh.face_positions(fi));
        let unit = mesh.face_area_vector(fi).normalize();
        for a in 0..3 {
            area[f[a]] += t.voronoi[a];
            lap[f[a]] += Vec3::from(t.lap[a]);
            angle_sum[f[a]] += angles[a];
            outward[f[a]] += unit * angles[a];
        }
    }

    let mut mean_curv_vec = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut scalar_h = Vec::with_capacity(n);
    let mut gauss_k = Vec::with_capacity(n);
    let mut tracefree_sq = Vec::with_capacity(n);
    let mut clamped_mass = 0.0;
    for i in 0..n {
        let hv = -lap[i] / (2.0 * area[i]);
        let nu = -outward[i].normalize();
        let h = if hv.dot(&nu) >= 0.0 { hv.norm() } else { -hv.norm() };
        let k = (2.0 * PI - angle_sum[i]) / area[i];
        let raw = 0.5 * h * h - 2.0 * k;
        if raw < 0.0 {
            clamped_mass -= area[i] * raw;
        }
        mean_curv_vec.push(hv);
        normal.push(nu);
        scalar_h.push(h);
        gauss_k.push(k);
        tracefree_sq.push(raw.max(0.0));
    }
    Ok(VertexGeometry { area, mean_curv_vec, normal, scalar_h, gauss_k, tracefree_sq, clamped_mass })
}

/// Constant gradient of the piecewise-linear interpolant of `field` on each face.
pub fn pl_gradients(mesh: &TriMesh, field: &[f64]) -> Result<Vec<Vec3>, GeometryError> {
    if field.len() != mesh.num_vertices() {
        return Err(GeometryError::LengthMismatch { expected: mesh.num_vertices(), got: field.len() });
    }
    Ok((0..mesh.num_faces())
        .map(|fi| {
            let f = mesh.faces()[fi];
            let p = mesh.face_positions(fi);
            let n = mesh.face_area_vector(fi);
            let dbl_area_sq = n.norm_squared();
            // ∇λ_a = n × (p_c - p_b) / |n|², and Σ ∇λ_a = 0.
            let grad_bary = |a: usize| n.cross(&(p[(a + 2) % 3] - p[(a + 1) % 3])) / dbl_area_sq;
            grad_bary(1) * (field[f[1]] - field[f[0]]) + grad_bary(2) * (field[f[2]] - field[f[0]])
        })
        .collect())
}

/// `Σ_faces area · |∇φ|²` for the piecewise-linear interpolant of `field`.
pub fn pl_gradient_sq_integral(mesh: &TriMesh, field: &[f64]) -> Result<f64, GeometryError> {
    let grads = pl_gradients(mesh, field)?;
    Ok(grads.iter().enumerate().map(|(f, g)| mesh.face_area(f) * g.norm_squared()).sum())
}

/// `‖A°‖²_∞ = max_i |A°|²_i`.
pub fn sup_tracefree(geom: &VertexGeometry) -> f64 {
    geom.tracefree_sq.iter().copied().fold(0.0, f64::max)
}

/// Sparse cotangent weights `w_ij = (cot α_ij + cot β_ij) / 2` in CSR layout
/// matching [`TriMesh::neighbors`].
#[derive(Clone, Debug)]
pub struct CotanLaplacian {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
    diag: Vec<f64>,
}

impl CotanLaplacian {
    pub fn new(mesh: &TriMesh) -> Result<Self, GeometryError> {
        let terms = all_face_terms(mesh)?;
        let n = mesh.num_vertices();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for v in 0..n {
            cols.extend_from_slice(mesh.neighbors(v));
            offsets.push(cols.len());
        }
        let mut weights = vec![0.0; cols.len()];
        let slot = |i: usize, j: usize| -> usize {
            let row = &cols[offsets[i]..offsets[i + 1]];
            offsets[i] + row.iter().position(|&c| c == j).expect("edge in one-ring")
        };
        for (f, t) in mesh.faces().iter().zip(&terms) {
            for a in 0..3 {
                let (b, c) = (f[(a + 1) % 3], f[(a + 2) % 3]);
                let w = 0.5 * t.cot[a];
                let (s1, s2) = (slot(b, c), slot(c, b));
                weights[s1] += w;
                weights[s2] += w;
            }
        }
        let diag = (0..n).map(|i| weights[offsets[i]..offsets[i + 1]].iter().sum()).collect();
        Ok(Self { offsets, cols, weights, diag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Off-diagonal neighbours and weights of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.weights[r])
    }

    /// `Σ_j w_ij`, the diagonal of the stiffness.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `(Sφ)_i = Σ_j w_ij (φ_i - φ_j)`, the positive semidefinite stiffness.
    pub fn stiffness_apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = self.diag[i] * x[i];
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc -= self.weights[k] * x[self.cols[k]];
            }
            *o = acc;
        });
    }

    /// Discrete Laplace-Beltrami `(Δφ)_i = -(Sφ)_i / Ā_i`.
    pub fn laplace_beltrami(&self, field: &[f64], area: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        self.stiffness_apply(field, &mut out);
        out.iter_mut().zip(area).for_each(|(o, a)| *o = -*o / a);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::icosphere;

    #[test]
    fn tetrahedron_gauss_bonnet() {
        let m = crate::mesh::tests::tetrahedron();
        let g = vertex_geometry(&m).unwrap();
        assert!((g.total_gauss_curvature() - 4.0 * PI).abs() < 1e-9);
        let total: f64 = g.area.iter().sum();
        assert!((total - m.total_area()).abs() < 1e-12 * total);
    }

    #[test]
    fn icosphere_curvatures() {
        let m = icosphere(4).unwrap();
        let g = vertex_geometry(&m).unwrap();
        for i in 0..m.num_vertices() {
            assert!((g.scalar_h[i] - 2.0).abs() <= 0.05, "H = {}", g.scalar_h[i]);
            assert!((g.gauss_k[i] - 1.0).abs() <= 0.05, "K = {}", g.gauss_k[i]);
            assert!(g.tracefree_sq[i] >= 0.0);
        }
    }

    #[test]
    fn scaling_laws_are_exact() {
        let m = icosphere(2).unwrap();
        let g1 = vertex_geometry(&m).unwrap();
        let g2 = vertex_geometry(&m.scaled(2.0).unwrap()).unwrap();
        for i in 0..m.num_vertices() {
            assert!((g2.scalar_h[i] - 0.5 * g1.scalar_h[i]).abs() < 1e-12);
            assert!((g2.gauss_k[i] - 0.25 * g1.gauss_k[i]).abs() < 1e-12);
            assert!((g2.area[i] - 4.0 * g1.area[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn clamped_mass_accounts_for_gauss_identity() {
        let m = icosphere(3).unwrap();
        let g = vertex_geometry(&m).unwrap();
        let clamped: f64 = g.area.iter().zip(&g.tracefree_sq).map(|(a, t)| a * t).sum();
        assert!((g.unclamped_tracefree_energy() + g.clamped_mass - clamped).abs() < 1e-9);
    }

    #[test]
    fn gradient_integral_homogeneity_and_constants() {
        let m = icosphere(2).unwrap();
        assert_eq!(pl_gradient_sq_integral(&m, &vec![3.5; m.num_vertices()]).unwrap(), 0.0);
        let x: Vec<f64> = m.vertices().iter().map(|p| p.x).collect();
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let a = pl_gradient_sq_integral(&m, &x).unwrap();
        let b = pl_gradient_sq_integral(&m, &x2).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-12 * b);
        assert!(matches!(
            pl_gradient_sq_integral(&m, &x[1..]),
            Err(GeometryError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn stiffness_matches_cotan_dirichlet_energy() {
        let m = icosphere(2).unwrap();
        let lap = CotanLaplacian::new(&m).unwrap();
        let phi: Vec<f64> = m.vertices().iter().map(|p| p.x * p.y + p.z).collect();
        let mut s = vec![0.0; phi.len()];
        lap.stiffness_apply(&phi, &mut s);
        let quad: f64 = phi.iter().zip(&s).map(|(a, b)| a * b).sum();
        let direct = pl_gradient_sq_integral(&m, &phi).unwrap();
        assert!((quad - direct).abs() < 1e-10 * direct);
    }
}
