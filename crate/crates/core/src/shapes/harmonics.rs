use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

/// Orthonormal real spherical harmonic `Y_lm(θ, φ)`.
///
/// `m > 0` uses `cos(mφ)`, `m < 0` uses `sin(|m|φ)`. No Condon-Shortley phase.
/// The associated Legendre functions are built with the standard fully
/// normalized upward recurrence in `l`.
pub fn real_sph_harm<T: Real>(l: u32, m: i32, theta: T, phi: T) -> T {
    let ma = m.unsigned_abs();
    assert!(ma <= l, "|m| must not exceed l");
    let x = theta.cos();
    let s = theta.sin();

    // p̄_mm = sqrt((2m+1)/(4π) ∏ (2k-1)/(2k)) sin^m θ
    let mut c = (2 * ma + 1) as f64 / (4.0 * PI);
    for k in 1..=ma {
        c *= (2 * k - 1) as f64 / (2 * k) as f64;
    }
    let mut p_mm = T::cst(c.sqrt());
    for _ in 0..ma {
        p_mm = p_mm * s;
    }
    let p = if l == ma {
        p_mm
    } else {
        let mut prev = p_mm;
        let mut cur = x * p_mm * ((2 * ma + 3) as f64).sqrt();
        for ll in (ma + 2)..=l {
            let (lf, mf) = (ll as f64, ma as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let next = (x * cur - prev * b) * a;
            prev = cur;
            cur = next;
        }
        cur
    };
    match m {
        0 => p,
        m if m > 0 => p * (phi * m as f64).cos() * std::f64::consts::SQRT_2,
        m => p * (phi * (-m) as f64).sin() * std::f64::consts::SQRT_2,
    }
}

/// Finite real spherical-harmonic expansion `u(θ, φ) = Σ c_lm Y_lm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub terms: Vec<(u32, i32, f64)>,
}

impl RadialField {
    pub fn eval<T: Real>(&self, theta: T, phi: T) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(l, m, c)| acc + real_sph_harm(l, m, theta, phi) * c)
    }

    /// Evaluates at a point of the unit sphere given in Cartesian coordinates.
    pub fn eval_unit(&self, x: f64, y: f64, z: f64) -> f64 {
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        self.eval(theta, phi)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(l, m, c)| (l, m, c * factor)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::quadrature::gauss_legendre;

    #[test]
    fn low_degree_closed_forms() {
        let (t, p) = (0.7f64, 1.3f64);
        let y00 = real_sph_harm(0, 0, t, p);
        assert!((y00 - 0.5 / PI.sqrt()).abs() < 1e-15);
        let y20 = real_sph_harm(2, 0, t, p);
        let expect = 0.25 * (5.0 / PI).sqrt() * (3.0 * t.cos().powi(2) - 1.0);
        assert!((y20 - expect).abs() < 1e-14);
        let y11 = real_sph_harm(1, 1, t, p);
        let expect = (3.0 / (4.0 * PI)).sqrt() * t.sin() * p.cos();
        assert!((y11 - expect).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_on_the_sphere() {
        let (xt, wt) = gauss_legendre(24);
        let (xp, wp) = gauss_legendre(48);
        let modes = [(2, 0), (2, 1), (2, -2), (3, 1), (4, -3), (4, 4)];
        for (i, &(l1, m1)) in modes.iter().enumerate() {
            for &(l2, m2) in &modes[i..] {
                let mut acc = 0.0;
                for (a, wa) in xt.iter().zip(&wt) {
                    let th = 0.5 * PI * (a + 1.0);
                    for (b, wb) in xp.iter().zip(&wp) {
                        let ph = PI * (b + 1.0);
                        let w = wa * wb * 0.5 * PI * PI * th.sin();
                        acc += w * real_sph_harm(l1, m1, th, ph) * real_sph_harm(l2, m2, th, ph);
                    }
                }
                let expect = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12, "({l1},{m1})x({l2},{m2}) = {acc}");
            }
        }
    }
}
