//! Global functionals of a surface: area, barycenter, quadratic moment,
//! enclosed volume, total mean curvature, Willmore and tracefree energies,
//! isoperimetric deficit and the almost-umbilical (DLM) ratio.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sup_tracefree, VertexGeometry};
use crate::mesh::{TriMesh, Vec3};

/// Below this tracefree energy the DLM ratio is reported as undefined.
pub const DLM_MIN_ENERGY: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("enclosed volume {0} is not positive")]
    NonpositiveVolume(f64),
    #[error("tracefree energy {0:e} is too small for a ratio")]
    ZeroDenominator(f64),
}

/// One snapshot of every tracked functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub area: f64,
    pub barycenter: [f64; 3],
    pub quad_moment: f64,
    pub volume: f64,
    pub total_mean_curvature: f64,
    pub willmore: f64,
    pub tracefree_energy: f64,
    pub iso_deficit: f64,
    /// `None` when the tracefree energy vanishes.
    pub dlm_ratio: Option<f64>,
    pub sup_tracefree: f64,
    pub clamped_mass: f64,
}

impl FunctionalRecord {
    pub fn barycenter_vec(&self) -> Vec3 {
        Vec3::from(self.barycenter)
    }
}

/// `(36π)^{1/3}`, the scale-invariant isoperimetric ratio of a round sphere.
pub fn isoperimetric_constant() -> f64 {
    (36.0 * PI).cbrt()
}

/// `A / V^{2/3} - (36π)^{1/3}`, or NaN for nonpositive volume.
pub(crate) fn deficit_value(area: f64, volume: f64) -> f64 {
    if volume > 0.0 {
        area / volume.powf(2.0 / 3.0) - isoperimetric_constant()
    } else {
        f64::NAN
    }
}

/// `[∫|S|² - (∫H)²/(2A)] / ∫|S°|²` from the integrals of `H² - 2K`, `H` and `|A°|²`.
pub(crate) fn dlm_value(sq_shape: f64, htot: f64, area: f64, energy: f64) -> Option<f64> {
    (energy > DLM_MIN_ENERGY).then(|| (sq_shape - htot * htot / (2.0 * area)) / energy)
}

pub fn measure(mesh: &TriMesh, geom: &VertexGeometry) -> FunctionalRecord {
    let mut area = 0.0;
    let mut moment = Vec3::zeros();
    for f in 0..mesh.num_faces() {
        let a = mesh.face_area(f);
        let [p, q, r] = mesh.face_positions(f);
        area += a;
        moment += (p + q + r) * (a / 3.0);
    }
    let c = moment / area;

    // Edge-midpoint rule, exact for the quadratic |f - C|² on each triangle.
    let quad: f64 = (0..mesh.num_faces())
        .map(|f| {
            let [p, q, r] = mesh.face_positions(f);
            let mids = [(p + q) * 0.5, (q + r) * 0.5, (r + p) * 0.5];
            mesh.face_area(f) * mids.iter().map(|m| (m - c).norm_squared()).sum::<f64>() / 3.0
        })
        .sum();

    let volume = mesh.signed_volume();
    let n = geom.len();
    let mut htot = 0.0;
    let mut h2 = 0.0;
    let mut energy = 0.0;
    let mut sq_shape = 0.0;
    for i in 0..n {
        let (a, h) = (geom.area[i], geom.scalar_h[i]);
        htot += a * h;
        h2 += a * h * h;
        energy += a * geom.tracefree_sq[i];
        sq_shape += a * (h * h - 2.0 * geom.gauss_k[i]);
    }

    FunctionalRecord {
        area,
        barycenter: [c.x, c.y, c.z],
        quad_moment: quad / area,
        volume,
        total_mean_curvature: htot,
        willmore: 0.25 * h2,
        tracefree_energy: energy,
        iso_deficit: deficit_value(area, volume),
        dlm_ratio: dlm_value(sq_shape, htot, area, energy),
        sup_tracefree: sup_tracefree(geom),
        clamped_mass: geom.clamped_mass,
    }
}

pub fn iso_deficit(rec: &FunctionalRecord) -> Result<f64, FunctionalError> {
    if rec.volume > 0.0 {
        Ok(deficit_value(rec.area, rec.volume))
    } else {
        Err(FunctionalError::NonpositiveVolume(rec.volume))
    }
}

/// `∫|S - (H̄/2) Id|² / ∫|S°|²`, with `∫|S|² = ∫(H² - 2K)`.
pub fn dlm_ratio(rec: &FunctionalRecord, geom: &VertexGeometry, mesh: &TriMesh) -> Result<f64, FunctionalError> {
    debug_assert_eq!(geom.len(), mesh.num_vertices());
    let sq_shape: f64 = (0..geom.len())
        .map(|i| geom.area[i] * (geom.scalar_h[i].powi(2) - 2.0 * geom.gauss_k[i]))
        .sum();
    dlm_value(sq_shape, rec.total_mean_curvature, rec.area, rec.tracefree_energy)
        .ok_or(FunctionalError::ZeroDenominator(rec.tracefree_energy))
}

/// `∫|f|² dμ` by the edge-midpoint rule.
pub fn position_second_moment(mesh: &TriMesh) -> f64 {
    (0..mesh.num_faces())
        .map(|f| {
            let [p, q, r] = mesh.face_positions(f);
            let mids = [(p + q) * 0.5, (q + r) * 0.5, (r + p) * 0.5];
            mesh.face_area(f) * mids.iter().map(|m| m.norm_squared()).sum::<f64>() / 3.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::vertex_geometry;
    use crate::shapes::icosphere;

    fn record(mesh: &TriMesh) -> FunctionalRecord {
        measure(mesh, &vertex_geometry(mesh).unwrap())
    }

    #[test]
    fn parallel_axis_identity() {
        let m = crate::shapes::ellipsoid(1.0, 1.3, 0.8, 3).unwrap().translated(Vec3::new(0.3, -1.0, 2.0)).unwrap();
        let r = record(&m);
        let i = position_second_moment(&m);
        let c = r.barycenter_vec();
        assert!((r.quad_moment - (i / r.area - c.norm_squared())).abs() < 1e-12);
    }

    #[test]
    fn translation_only_moves_barycenter() {
        let m = icosphere(3).unwrap();
        let shift = Vec3::new(5.0, 0.0, 0.0);
        let (a, b) = (record(&m), record(&m.translated(shift).unwrap()));
        assert!((b.barycenter_vec() - a.barycenter_vec() - shift).norm() < 1e-12);
        for (x, y) in [
            (a.area, b.area),
            (a.quad_moment, b.quad_moment),
            (a.volume, b.volume),
            (a.total_mean_curvature, b.total_mean_curvature),
            (a.willmore, b.willmore),
            (a.tracefree_energy, b.tracefree_energy),
        ] {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn deficit_is_scale_invariant_and_needs_volume() {
        let m = crate::shapes::ellipsoid(1.0, 1.0, 1.25, 3).unwrap();
        let a = iso_deficit(&record(&m)).unwrap();
        let b = iso_deficit(&record(&m.scaled(3.7).unwrap())).unwrap();
        assert!((a - b).abs() < 1e-10);
        let mut r = record(&m);
        r.volume = -1.0;
        assert!(matches!(iso_deficit(&r), Err(FunctionalError::NonpositiveVolume(_))));
    }

    #[test]
    fn dlm_ratio_requires_energy() {
        let m = icosphere(2).unwrap();
        let g = vertex_geometry(&m).unwrap();
        let mut r = measure(&m, &g);
        r.tracefree_energy = 0.0;
        assert!(matches!(dlm_ratio(&r, &g, &m), Err(FunctionalError::ZeroDenominator(_))));
    }

    #[test]
    fn gauss_bonnet_links_energies() {
        let m = crate::shapes::ellipsoid(1.0, 1.2, 0.9, 3).unwrap();
        let r = record(&m);
        let gap = r.tracefree_energy - (2.0 * r.willmore - 8.0 * PI);
        assert!(gap >= -1e-9 && gap <= r.clamped_mass + 1e-9, "{gap} {}", r.clamped_mass);
    }
}
