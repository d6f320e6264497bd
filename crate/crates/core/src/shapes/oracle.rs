//! Analytic reference values for smooth test surfaces.
//!
//! Surfaces are parametrized over `(θ, φ) ∈ (0, π) × (0, 2π)` and integrated
//! with tensor-product Gauss-Legendre quadrature. Fundamental forms come from
//! exact derivatives of the parametrization via [`Jet2`]; nesting the jets
//! gives the derivatives of `H` needed for `ΔH`. The poles are never sampled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{v3, Jet2, Real};
use crate::functionals::{deficit_value, dlm_value, FunctionalRecord};

use super::quadrature::gauss_legendre_on;
use super::{RadialField, ShapeError};

pub const MIN_QUAD_ORDER: usize = 32;
/// Allowed relative change (floored at 1) when the quadrature order doubles.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticSurface {
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// `scale · (1 + u(ω)) ω` on the unit sphere.
    RadialGraph { field: RadialField, scale: f64 },
}

impl AnalyticSurface {
    pub fn unit_sphere() -> Self {
        Self::Ellipsoid { a: 1.0, b: 1.0, c: 1.0 }
    }

    pub fn point<T: Real>(&self, theta: T, phi: T) -> [T; 3] {
        let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
        match self {
            Self::Ellipsoid { a, b, c } => [st * cp * *a, st * sp * *b, ct * *c],
            Self::RadialGraph { field, scale } => {
                let r = (field.eval(theta, phi) + 1.0) * *scale;
                [r * st * cp, r * st * sp, r * ct]
            }
        }
    }
}

/// Local differential geometry at one parameter point.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint<T> {
    pub position: [T; 3],
    pub outward_normal: [T; 3],
    /// Area element `sqrt(EG - F²)`.
    pub sqrt_g: T,
    /// First fundamental form `[E, F, G]`.
    pub metric: [T; 3],
    /// Mean curvature against the interior normal (2 on the unit sphere).
    pub h: T,
    pub k: T,
}

impl<T: Real> SurfacePoint<T> {
    /// `|A°|² = H²/2 - 2K`.
    pub fn tracefree_sq(&self) -> T {
        self.h * self.h * 0.5 - self.k * 2.0
    }
}

fn seeded<T: Real>(theta: T, phi: T) -> (Jet2<T>, Jet2<T>) {
    (Jet2::var(theta, 0), Jet2::var(phi, 1))
}

fn local_geometry<T: Real>(x: [Jet2<T>; 3]) -> SurfacePoint<T> {
    let comp = |f: &dyn Fn(&Jet2<T>) -> T| [f(&x[0]), f(&x[1]), f(&x[2])];
    let xt = comp(&|j| j.dx(0));
    let xp = comp(&|j| j.dx(1));
    let xtt = comp(&|j| j.dxx(0, 0));
    let xtp = comp(&|j| j.dxx(0, 1));
    let xpp = comp(&|j| j.dxx(1, 1));
    let (e, f, g) = (v3::dot(xt, xt), v3::dot(xt, xp), v3::dot(xp, xp));
    let nvec = v3::cross(xt, xp);
    let sqrt_g = v3::norm(nvec);
    let n = v3::scale(nvec, sqrt_g.recip());
    let (l, m, nn) = (v3::dot(xtt, n), v3::dot(xtp, n), v3::dot(xpp, n));
    let det = e * g - f * f;
    let h_out = (l * g - m * f * 2.0 + nn * e) / det;
    let k = (l * nn - m * m) / det;
    SurfacePoint {
        position: [x[0].v, x[1].v, x[2].v],
        outward_normal: n,
        sqrt_g,
        metric: [e, f, g],
        h: -h_out,
        k,
    }
}

/// Exact local geometry at `(θ, φ)`.
pub fn surface_point(surface: &AnalyticSurface, theta: f64, phi: f64) -> SurfacePoint<f64> {
    let (t, p) = seeded(theta, phi);
    local_geometry(surface.point(t, p))
}

/// Scalar Willmore operator `ΔH + |A°|²H` at `(θ, φ)`, together with the local geometry.
pub fn willmore_operator_at(surface: &AnalyticSurface, theta: f64, phi: f64) -> (f64, SurfacePoint<f64>) {
    let (ti, pi) = seeded(theta, phi);
    let mut t = Jet2::<Jet2<f64>>::constant(ti);
    t.d[0] = Jet2::cst(1.0);
    let mut p = Jet2::<Jet2<f64>>::constant(pi);
    p.d[1] = Jet2::cst(1.0);
    let sp = local_geometry(surface.point(t, p));

    let [e, f, g] = sp.metric;
    let det = e * g - f * f;
    let inv = [g / det, -f / det, e / det];
    let h = sp.h;
    // Δh = (1/√g) ∂_i(√g g^{ij} ∂_j h)
    let mut div = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let gij = inv[i + j];
            let pij = sp.sqrt_g * gij;
            div += pij.d[i] * h.d[j] + pij.v * h.dxx(i, j);
        }
    }
    let lap_h = div / sp.sqrt_g.v;
    let flat = SurfacePoint {
        position: sp.position.map(|c| c.v),
        outward_normal: sp.outward_normal.map(|c| c.v),
        sqrt_g: sp.sqrt_g.v,
        metric: sp.metric.map(|c| c.v),
        h: sp.h.v,
        k: sp.k.v,
    };
    (lap_h + flat.tracefree_sq() * flat.h, flat)
}

/// Quadrature grid: `n` nodes in θ, `2n` in φ.
fn for_each_node(n: usize, mut visit: impl FnMut(f64, f64, f64)) {
    let (tn, tw) = gauss_legendre_on(n, 0.0, PI);
    let (pn, pw) = gauss_legendre_on(2 * n, 0.0, 2.0 * PI);
    for (t, wt) in tn.iter().zip(&tw) {
        for (p, wp) in pn.iter().zip(&pw) {
            visit(*t, *p, wt * wp);
        }
    }
}

fn integrate(surface: &AnalyticSurface, n: usize) -> FunctionalRecord {
    let mut pts = Vec::with_capacity(2 * n * n);
    for_each_node(n, |t, p, w| pts.push((surface_point(surface, t, p), w)));

    let (mut area, mut moment, mut vol) = (0.0, [0.0; 3], 0.0);
    let (mut htot, mut h2, mut energy, mut sq_shape, mut sup) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
    for (sp, w) in &pts {
        let dmu = w * sp.sqrt_g;
        area += dmu;
        for k in 0..3 {
            moment[k] += dmu * sp.position[k];
        }
        vol += dmu * v3::dot(sp.position, sp.outward_normal) / 3.0;
        htot += dmu * sp.h;
        h2 += dmu * sp.h * sp.h;
        energy += dmu * sp.tracefree_sq();
        sq_shape += dmu * (sp.h * sp.h - 2.0 * sp.k);
        sup = sup.max(sp.tracefree_sq());
    }
    let c = moment.map(|m| m / area);
    let quad: f64 = pts
        .iter()
        .map(|(sp, w)| w * sp.sqrt_g * v3::dot(v3::sub(sp.position, c), v3::sub(sp.position, c)))
        .sum::<f64>()
        / area;
    FunctionalRecord {
        area,
        barycenter: c,
        quad_moment: quad,
        volume: vol,
        total_mean_curvature: htot,
        willmore: 0.25 * h2,
        tracefree_energy: energy,
        iso_deficit: deficit_value(area, vol),
        dlm_ratio: dlm_value(sq_shape, htot, area, energy),
        sup_tracefree: sup,
        clamped_mass: 0.0,
    }
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

/// Oracle values of every functional, checked for convergence against order `2n`.
pub fn analytic_functionals(surface: &AnalyticSurface, quad_order: usize) -> Result<FunctionalRecord, ShapeError> {
    if quad_order < MIN_QUAD_ORDER {
        return Err(ShapeError::InvalidSpec(format!(
            "quadrature order {quad_order} below minimum {MIN_QUAD_ORDER}"
        )));
    }
    let coarse = integrate(surface, quad_order);
    let fine = integrate(surface, 2 * quad_order);
    let cb = coarse.barycenter;
    let fb = fine.barycenter;
    let checks: [(&'static str, f64); 7] = [
        ("area", rel_change(coarse.area, fine.area)),
        ("barycenter", (0..3).map(|k| rel_change(cb[k], fb[k])).fold(0.0, f64::max)),
        ("quad_moment", rel_change(coarse.quad_moment, fine.quad_moment)),
        ("volume", rel_change(coarse.volume, fine.volume)),
        ("total_mean_curvature", rel_change(coarse.total_mean_curvature, fine.total_mean_curvature)),
        ("willmore", rel_change(coarse.willmore, fine.willmore)),
        ("tracefree_energy", rel_change(coarse.tracefree_energy, fine.tracefree_energy)),
    ];
    for (quantity, change) in checks {
        if !(change <= CONVERGENCE_TOL) {
            return Err(ShapeError::QuadratureNotConverged { quantity, change });
        }
    }
    Ok(coarse)
}

/// `∫ (ΔH + |A°|²H)² dμ` on the smooth surface.
pub fn willmore_operator_l2(surface: &AnalyticSurface, quad_order: usize) -> f64 {
    let mut acc = 0.0;
    for_each_node(quad_order, |t, p, w| {
        let (op, sp) = willmore_operator_at(surface, t, p);
        acc += w * sp.sqrt_g * op * op;
    });
    acc
}

/// `max |A°|²` over a uniform `(θ, φ)` grid of `2m+1` rows, which includes the equator.
pub fn analytic_sup_tracefree(surface: &AnalyticSurface, m: usize) -> f64 {
    let rows = 2 * m + 1;
    let cols = 2 * rows;
    let mut best = 0.0f64;
    for i in 0..rows {
        let theta = PI * (i as f64 + 0.5) / rows as f64;
        for j in 0..cols {
            let phi = 2.0 * PI * j as f64 / cols as f64;
            best = best.max(surface_point(surface, theta, phi).tracefree_sq());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_values() {
        let r = analytic_functionals(&AnalyticSurface::unit_sphere(), 32).unwrap();
        assert!((r.area - 4.0 * PI).abs() < 1e-10);
        assert!((r.volume - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!((r.total_mean_curvature - 8.0 * PI).abs() < 1e-10);
        assert!((r.willmore - 4.0 * PI).abs() < 1e-10);
        assert!(r.tracefree_energy.abs() < 1e-10);
        assert!((r.quad_moment - 1.0).abs() < 1e-10);
        assert!(r.iso_deficit.abs() < 1e-10);
        assert!(r.barycenter.iter().all(|c| c.abs() < 1e-10));
        assert!(r.dlm_ratio.is_none());
    }

    #[test]
    fn gauss_bonnet_holds_for_oracle_surfaces() {
        let field = RadialField { terms: vec![(2, 0, 0.1), (3, -2, 0.05), (4, 1, -0.03)] };
        for s in [
            AnalyticSurface::Ellipsoid { a: 1.0, b: 1.0, c: 1.25 },
            AnalyticSurface::Ellipsoid { a: 0.7, b: 1.1, c: 1.4 },
            AnalyticSurface::RadialGraph { field, scale: 1.0 },
        ] {
            let r = analytic_functionals(&s, 64).unwrap();
            assert!((r.tracefree_energy - (2.0 * r.willmore - 8.0 * PI)).abs() < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn sphere_willmore_operator_vanishes() {
        for (t, p) in [(0.3, 0.1), (1.2, 4.0), (2.9, 2.2)] {
            let (op, sp) = willmore_operator_at(&AnalyticSurface::unit_sphere(), t, p);
            assert!(op.abs() < 1e-10, "{op}");
            assert!((sp.h - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_h_matches_axisymmetric_formula() {
        // Spheroid of revolution: check ΔH against a finite-difference evaluation
        // of (1/√g) ∂_θ(√g/E ∂_θ H), H depending on θ only.
        let s = AnalyticSurface::Ellipsoid { a: 1.0, b: 1.0, c: 1.4 };
        let theta = 0.9;
        let h = 1e-4;
        let flux = |t: f64| {
            let sp = surface_point(&s, t, 0.3);
            let dh = (surface_point(&s, t + 1e-5, 0.3).h - surface_point(&s, t - 1e-5, 0.3).h) / 2e-5;
            sp.sqrt_g / sp.metric[0] * dh
        };
        let sp = surface_point(&s, theta, 0.3);
        let lap = (flux(theta + h) - flux(theta - h)) / (2.0 * h) / sp.sqrt_g;
        let (op, _) = willmore_operator_at(&s, theta, 0.3);
        let expect = lap + sp.tracefree_sq() * sp.h;
        assert!((op - expect).abs() < 1e-5 * expect.abs().max(1.0), "{op} vs {expect}");
    }

    #[test]
    fn low_order_is_rejected() {
        assert!(matches!(
            analytic_functionals(&AnalyticSurface::unit_sphere(), 8),
            Err(ShapeError::InvalidSpec(_))
        ));
    }
}
