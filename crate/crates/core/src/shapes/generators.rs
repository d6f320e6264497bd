use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::functionals::measure;
use crate::geometry::vertex_geometry;
use crate::mesh::{TriMesh, Vec3};

use super::oracle::AnalyticSurface;
use super::{icosphere, RadialField, ShapeError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoeff {
    pub l: u32,
    pub m: i32,
    pub value: f64,
}

/// Radial spherical-harmonic perturbation of the icosphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Highest harmonic degree drawn (at least 2).
    pub lmax: u32,
    pub seed: u64,
    /// Amplitude `ε` of the normalized field, `max|u| = 1`.
    #[serde(alias = "eps")]
    pub amplitude: f64,
    /// Explicit coefficients; when present they replace the seeded draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<HarmonicCoeff>>,
    /// Icosphere subdivision level.
    pub level: u32,
}

impl PerturbationSpec {
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..self.clone() }
    }

    fn validate(&self) -> Result<(), ShapeError> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(ShapeError::InvalidSpec(format!("amplitude {} must be >= 0", self.amplitude)));
        }
        match &self.coeffs {
            Some(cs) => {
                for c in cs {
                    if c.l < 2 || c.m.unsigned_abs() > c.l {
                        return Err(ShapeError::InvalidSpec(format!(
                            "harmonic ({}, {}) not allowed: need l >= 2 and |m| <= l",
                            c.l, c.m
                        )));
                    }
                }
            }
            None if self.lmax < 2 => {
                return Err(ShapeError::InvalidSpec(format!("lmax {} must be >= 2", self.lmax)));
            }
            None => {}
        }
        Ok(())
    }

    /// Raw (unnormalized) expansion: explicit coefficients or a seeded uniform draw.
    fn raw_field(&self) -> RadialField {
        let terms = match &self.coeffs {
            Some(cs) => cs.iter().map(|c| (c.l, c.m, c.value)).collect(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut terms = Vec::new();
                for l in 2..=self.lmax {
                    for m in -(l as i32)..=(l as i32) {
                        terms.push((l, m, rng.random_range(-1.0..1.0)));
                    }
                }
                terms
            }
        };
        RadialField { terms }
    }
}

/// Output of [`perturbed_sphere`].
#[derive(Clone, Debug)]
pub struct PerturbedSphere {
    pub mesh: TriMesh,
    /// `u` normalized so that `max|u| = 1` over the mesh vertices.
    pub field: RadialField,
    /// Uniform scale applied about the origin to reach area `4π`.
    pub scale: f64,
    /// Tracefree energy `E` of the generated mesh.
    pub tracefree_energy: f64,
}

impl PerturbedSphere {
    /// The smooth surface this mesh samples, for the quadrature oracle.
    pub fn analytic_surface(&self, amplitude: f64) -> AnalyticSurface {
        AnalyticSurface::RadialGraph { field: self.field.scaled(amplitude), scale: self.scale }
    }
}

/// Radial graph `(1 + ε u(ω)) ω` over the icosphere, rescaled to area `4π`.
pub fn perturbed_sphere(spec: &PerturbationSpec) -> Result<PerturbedSphere, ShapeError> {
    spec.validate()?;
    let base = icosphere(spec.level)?;
    let raw = spec.raw_field();
    let samples: Vec<f64> = base.vertices().iter().map(|p| raw.eval_unit(p.x, p.y, p.z)).collect();
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (field, samples) = if peak > 0.0 {
        (raw.scaled(1.0 / peak), samples.iter().map(|v| v / peak).collect())
    } else if spec.amplitude == 0.0 {
        (raw, samples)
    } else {
        return Err(ShapeError::InvalidSpec("perturbation field vanishes on the mesh".into()));
    };

    let min_radius = samples.iter().map(|u| 1.0 + spec.amplitude * u).fold(f64::INFINITY, f64::min);
    if min_radius <= 0.0 {
        return Err(ShapeError::SelfIntersectingRadial { min_radius });
    }
    let positions: Vec<Vec3> = base
        .vertices()
        .iter()
        .zip(&samples)
        .map(|(p, u)| p * (1.0 + spec.amplitude * u))
        .collect();
    let mesh = base.with_positions(positions)?;
    let scale = (4.0 * PI / mesh.total_area()).sqrt();
    let mesh = mesh.scaled(scale)?;
    let geom = vertex_geometry(&mesh)?;
    let tracefree_energy = measure(&mesh, &geom).tracefree_energy;
    Ok(PerturbedSphere { mesh, field, scale, tracefree_energy })
}

/// Icosphere vertices mapped by `diag(a, b, c)`.
pub fn ellipsoid(a: f64, b: f64, c: f64, level: u32) -> Result<TriMesh, ShapeError> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(ShapeError::InvalidSpec(format!("semi-axes ({a}, {b}, {c}) must be positive")));
    }
    let ico = icosphere(level)?;
    Ok(ico.map_positions(|p| Vec3::new(a * p.x, b * p.y, c * p.z))?)
}

/// Uniform scaling about the area barycenter so that the total area equals `target`.
pub fn normalize_area(mesh: &TriMesh, target: f64) -> Result<TriMesh, ShapeError> {
    let mut area = 0.0;
    let mut moment = Vec3::zeros();
    for f in 0..mesh.num_faces() {
        let a = mesh.face_area(f);
        let [p, q, r] = mesh.face_positions(f);
        area += a;
        moment += (p + q + r) * (a / 3.0);
    }
    let center = moment / area;
    let lambda = (target / area).sqrt();
    Ok(mesh.map_positions(|p| center + (p - center) * lambda)?)
}

/// Irregular sphere-like mesh: the level-1 icosphere refined by random edge
/// splits (midpoints pushed back to the unit sphere) until it has `vertices`
/// vertices, then every vertex moved radially by a factor in `1 ± jitter`.
///
/// Each split takes the longest of a few randomly drawn edges, which keeps
/// the triangles well shaped.
pub fn random_sphere_mesh(vertices: usize, jitter: f64, seed: u64) -> Result<TriMesh, ShapeError> {
    let base = icosphere(1)?;
    if vertices < base.num_vertices() {
        return Err(ShapeError::InvalidSpec(format!(
            "random mesh needs at least {} vertices, got {vertices}",
            base.num_vertices()
        )));
    }
    if !(0.0..0.5).contains(&jitter) {
        return Err(ShapeError::InvalidSpec(format!("jitter {jitter} must lie in [0, 0.5)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = base.vertices().to_vec();
    let mut faces = base.faces().to_vec();
    // Directed edge -> face index.
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            owner.insert((f[k], f[(k + 1) % 3]), fi);
        }
    }
    while pos.len() < vertices {
        let mut best: Option<(f64, usize, usize)> = None;
        for _ in 0..6 {
            let f = faces[rng.random_range(0..faces.len())];
            let k = rng.random_range(0..3);
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let len = (pos[a] - pos[b]).norm();
            if best.is_none_or(|(l, _, _)| len > l) {
                best = Some((len, a, b));
            }
        }
        let (_, a, b) = best.expect("at least one draw");
        let (f1, f2) = (owner[&(a, b)], owner[&(b, a)]);
        let c = faces[f1].into_iter().find(|&v| v != a && v != b).expect("triangle");
        let d = faces[f2].into_iter().find(|&v| v != a && v != b).expect("triangle");
        let m = pos.len();
        pos.push(((pos[a] + pos[b]) * 0.5).normalize());
        let (f3, f4) = (faces.len(), faces.len() + 1);
        faces[f1] = [a, m, c];
        faces[f2] = [b, m, d];
        faces.push([m, b, c]);
        faces.push([m, a, d]);
        for (fi, f) in [(f1, faces[f1]), (f2, faces[f2]), (f3, faces[f3]), (f4, faces[f4])] {
            for k in 0..3 {
                owner.insert((f[k], f[(k + 1) % 3]), fi);
            }
        }
        owner.remove(&(a, b));
        owner.remove(&(b, a));
    }
    for p in &mut pos {
        *p *= 1.0 + jitter * rng.random_range(-1.0..1.0);
    }
    Ok(TriMesh::build(pos, faces)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::measure;

    fn spec(amplitude: f64) -> PerturbationSpec {
        PerturbationSpec { lmax: 4, seed: 7, amplitude, coeffs: None, level: 3 }
    }

    #[test]
    fn zero_amplitude_is_unit_icosphere() {
        let p = perturbed_sphere(&spec(0.0)).unwrap();
        let ico = icosphere(3).unwrap();
        let r = p.mesh.vertices()[0].norm();
        assert!((p.mesh.total_area() - 4.0 * PI).abs() < 1e-10);
        // Inscribed icosphere has area slightly below 4π, so the rescaled radius is slightly above 1.
        assert!(r > 1.0 && r < 1.01);
        for (a, b) in p.mesh.vertices().iter().zip(ico.vertices()) {
            assert!((a - b * r).norm() < 1e-12);
        }
    }

    #[test]
    fn area_is_normalized() {
        let p = perturbed_sphere(&spec(0.05)).unwrap();
        assert!((p.mesh.total_area() - 4.0 * PI).abs() < 1e-10 * 4.0 * PI);
        assert!(p.tracefree_energy > 0.0 && p.tracefree_energy < 8.0 * PI);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = perturbed_sphere(&spec(0.05)).unwrap();
        let b = perturbed_sphere(&spec(0.05)).unwrap();
        assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        let c = perturbed_sphere(&PerturbationSpec { seed: 8, ..spec(0.05) }).unwrap();
        assert_ne!(a.mesh.vertices(), c.mesh.vertices());
    }

    #[test]
    fn energy_increases_with_amplitude() {
        let energies: Vec<f64> = [0.01, 0.02, 0.04, 0.08]
            .iter()
            .map(|&e| perturbed_sphere(&spec(e)).unwrap().tracefree_energy)
            .collect();
        assert!(energies.windows(2).all(|w| w[1] > w[0]), "{energies:?}");
    }

    #[test]
    fn axisymmetric_even_mode_is_centered() {
        let s = PerturbationSpec {
            coeffs: Some(vec![HarmonicCoeff { l: 2, m: 0, value: 1.0 }]),
            ..spec(0.3)
        };
        let p = perturbed_sphere(&s).unwrap();
        let g = vertex_geometry(&p.mesh).unwrap();
        let rec = measure(&p.mesh, &g);
        assert!(rec.barycenter_vec().norm() <= 1e-8, "{:?}", rec.barycenter);
    }

    #[test]
    fn huge_amplitude_is_rejected() {
        let s = PerturbationSpec {
            coeffs: Some(vec![HarmonicCoeff { l: 2, m: 0, value: 1.0 }]),
            ..spec(2.5)
        };
        // u = 1 at the poles and -1/2 on the equator.
        assert!(matches!(
            perturbed_sphere(&s),
            Err(ShapeError::SelfIntersectingRadial { .. })
        ));
    }

    #[test]
    fn low_degree_modes_are_rejected() {
        let s = PerturbationSpec { coeffs: Some(vec![HarmonicCoeff { l: 1, m: 0, value: 1.0 }]), ..spec(0.1) };
        assert!(matches!(perturbed_sphere(&s), Err(ShapeError::InvalidSpec(_))));
    }

    #[test]
    fn normalize_area_scales_about_barycenter() {
        let m = icosphere(3).unwrap().scaled(2.0).unwrap();
        let n = normalize_area(&m, m.total_area() / 4.0).unwrap();
        for (a, b) in m.vertices().iter().zip(n.vertices()) {
            assert!((a * 0.5 - b).norm() < 1e-12);
        }
        let again = normalize_area(&n, n.total_area()).unwrap();
        for (a, b) in n.vertices().iter().zip(again.vertices()) {
            assert!((a - b).norm() <= 1e-15);
        }
    }

    #[test]
    fn normalize_area_keeps_energy() {
        let m = ellipsoid(2.0, 2.0, 2.5, 3).unwrap();
        let n = normalize_area(&m, 4.0 * PI).unwrap();
        assert!((n.total_area() - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
        let e = |m: &TriMesh| measure(m, &vertex_geometry(m).unwrap()).tracefree_energy;
        assert!((e(&m) - e(&n)).abs() < 1e-10);
    }

    #[test]
    fn random_meshes_are_valid_and_seeded() {
        for seed in 0..5 {
            let m = random_sphere_mesh(60 + 10 * seed as usize, 0.05, seed).unwrap();
            assert_eq!(m.num_vertices(), 60 + 10 * seed as usize);
            assert!(m.min_angle() > 0.05);
        }
        let a = random_sphere_mesh(80, 0.05, 3).unwrap();
        let b = random_sphere_mesh(80, 0.05, 3).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert!(random_sphere_mesh(10, 0.0, 0).is_err());
    }

    #[test]
    fn unit_ellipsoid_is_icosphere() {
        let e = ellipsoid(1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(e.vertices(), icosphere(2).unwrap().vertices());
        assert!(ellipsoid(1.0, 0.0, 1.0, 1).is_err());
    }
}
