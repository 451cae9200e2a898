//! Closed-form model metrics: Poincaré disc, punctured disc, the
//! Beltrami–Cayley–Klein metric of the ball, and harmonic measure of arcs.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, Direction, Point, TwoPlane};
use crate::quad::adaptive_simpson;

fn in_disc(z: Complex64) -> Result<()> {
    if z.norm() < 1.0 {
        Ok(())
    } else {
        Err(Error::OutsideDisc)
    }
}

/// `|ξ| / (1 − |z|²)`.
pub fn poincare_metric(z: Complex64, xi: Complex64) -> Result<f64> {
    in_disc(z)?;
    Ok(xi.norm() / (1.0 - z.norm_sqr()))
}

pub fn poincare_distance(z: Complex64, w: Complex64) -> Result<f64> {
    in_disc(z)?;
    in_disc(w)?;
    let d = (z - w).norm() / (Complex64::new(1.0, 0.0) - z * w.conj()).norm();
    Ok(d.atanh())
}

/// Poincaré distance from 0 to a real point `a ∈ [0, 1)`.
pub fn poincare_length(a: f64) -> f64 {
    a.abs().atanh()
}

/// `|ξ| / (2|z| log(1/|z|))` on the punctured disc.
pub fn punctured_metric(z: Complex64, xi: Complex64) -> Result<f64> {
    let r = z.norm();
    if r == 0.0 {
        return Err(Error::AtPuncture);
    }
    in_disc(z)?;
    Ok(xi.norm() / (2.0 * r * (1.0 / r).ln()))
}

/// Punctured-disc length of the circle `|z| = r`: `π / log(1/r)`.
pub fn circle_length(r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::AtPuncture);
    }
    if r >= 1.0 {
        return Err(Error::OutsideDisc);
    }
    Ok(PI / (1.0 / r).ln())
}

fn unit_ball_check(x: &Point) -> Result<f64> {
    let s = x.norm_squared();
    if s < 1.0 {
        Ok(1.0 - s)
    } else {
        Err(Error::OutsideBall)
    }
}

/// Beltrami–Cayley–Klein metric of the unit ball.
pub fn bck_metric(x: &Point, u: &Direction) -> Result<f64> {
    check_dim(u, x.len())?;
    let q = unit_ball_check(x)?;
    let xu = x.dot(u);
    Ok((u.norm_squared() / q + xu * xu / (q * q)).sqrt())
}

/// BCK metric of the ball `B(center, radius)`.
pub fn bck_ball_metric(center: &Point, radius: f64, x: &Point, u: &Direction) -> Result<f64> {
    check_dim(x, center.len())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    Ok(bck_metric(&((x - center) / radius), u)? / radius)
}

/// Maximum of [`bck_metric`] over unit vectors of the plane.
pub fn bck_plane_metric(x: &Point, plane: &TwoPlane) -> Result<f64> {
    check_dim(x, plane.dim())?;
    let q = unit_ball_check(x)?;
    let (b1, b2) = (plane.b1(), plane.b2());
    let (p1, p2) = (x.dot(b1), x.dot(b2));
    // Gram matrix of |u|²/q + (x·u)²/q² restricted to the plane
    let m =
        Matrix2::new(1.0 / q + p1 * p1 / (q * q), p1 * p2 / (q * q), p1 * p2 / (q * q), 1.0 / q + p2 * p2 / (q * q));
    let top = SymmetricEigen::new(m).eigenvalues.max();
    Ok(top.sqrt())
}

pub fn bck_ball_plane_metric(center: &Point, radius: f64, x: &Point, plane: &TwoPlane) -> Result<f64> {
    check_dim(x, center.len())?;
    Ok(bck_plane_metric(&((x - center) / radius), plane)? / radius)
}

/// BCK length of the chord `[x, y]` by adaptive Simpson quadrature.
pub fn ball_distance(x: &Point, y: &Point) -> Result<f64> {
    check_dim(y, x.len())?;
    unit_ball_check(x)?;
    unit_ball_check(y)?;
    let d = y - x;
    if d.norm() == 0.0 {
        return Ok(0.0);
    }
    let tol = Config::default().tol_quadrature;
    let f = |t: f64| bck_metric(&(x + &d * t), &d).unwrap_or(f64::INFINITY);
    Ok(adaptive_simpson(&f, 0.0, 1.0, tol))
}

/// Finite union of closed arcs of the unit circle, kept sorted and disjoint
/// in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet {
    arcs: Vec<(f64, f64)>,
}

impl ArcSet {
    /// Arcs run counterclockwise from `start` to `end`; a length of `2π` or
    /// more covers the circle.
    pub fn new(arcs: &[(f64, f64)]) -> Result<Self> {
        let mut pieces = Vec::new();
        for &(a, b) in arcs {
            if !a.is_finite() || !b.is_finite() || b < a {
                return Err(Error::InvalidInput(format!("bad arc ({a}, {b})")));
            }
            if b - a >= TAU {
                return Ok(Self { arcs: vec![(0.0, TAU)] });
            }
            let s = a.rem_euclid(TAU);
            let e = s + (b - a);
            if e > TAU {
                pieces.push((s, TAU));
                pieces.push((0.0, e - TAU));
            } else {
                pieces.push((s, e));
            }
        }
        pieces.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (s, e) in pieces {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        Ok(Self { arcs: merged })
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    /// Normalized measure `|K| ∈ [0, 1]`.
    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(s, e)| e - s).sum::<f64>() / TAU
    }
}

/// Poisson integral of the indicator of `k` at `z`.
pub fn harmonic_measure(k: &ArcSet, z: Complex64) -> Result<f64> {
    in_disc(z)?;
    let mut total = 0.0;
    for &(s, e) in k.arcs() {
        if e - s >= TAU {
            return Ok(1.0);
        }
        // counterclockwise angle subtended at z, which lies in (0, 2π)
        let ratio = (Complex64::from_polar(1.0, e) - z) / (Complex64::from_polar(1.0, s) - z);
        total += ratio.arg().rem_euclid(TAU) / PI - (e - s) / TAU;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Radius `1 − (2/μ)|K|` below which the harmonic measure of `k` stays `≤ μ`.
/// Nonpositive values mean no disc is guaranteed.
pub fn harnack_radius(mu: f64, k: &ArcSet) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidInput(format!("mu must lie in (0, 1), got {mu}")));
    }
    Ok(1.0 - 2.0 / mu * k.measure())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{basis, point};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn poincare_values() {
        assert_eq!(poincare_metric(c(0.0, 0.0), c(1.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(poincare_metric(c(0.5, 0.0), c(1.0, 0.0)).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(poincare_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap(), 0.5 * 3f64.ln(), epsilon = 1e-15);
        assert_eq!(poincare_distance(c(0.3, 0.2), c(0.3, 0.2)).unwrap(), 0.0);
        assert!(matches!(poincare_metric(c(1.0, 0.0), c(1.0, 0.0)), Err(Error::OutsideDisc)));
    }

    #[test]
    fn poincare_metric_blows_up_radially() {
        let mut prev = 0.0;
        for k in 0..50 {
            let r = 1.0 - 0.5f64.powi(k);
            let v = poincare_metric(c(r, 0.0), c(1.0, 0.0)).unwrap();
            assert!(v > prev || k == 0);
            prev = v;
        }
        assert!(prev > 1e14);
    }

    #[test]
    fn punctured_values() {
        let e = 1f64.exp();
        assert_abs_diff_eq!(circle_length(1.0 / e).unwrap(), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(punctured_metric(c(1.0 / e, 0.0), c(1.0, 0.0)).unwrap(), e / 2.0, epsilon = 1e-14);
        assert!(matches!(punctured_metric(c(0.0, 0.0), c(1.0, 0.0)), Err(Error::AtPuncture)));
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let l = circle_length(0.9f64.powi(k)).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn bck_values() {
        let z = DVector::zeros(3);
        let u = point(&[0.3, -2.0, 1.0]);
        assert_abs_diff_eq!(bck_metric(&z, &u).unwrap(), u.norm(), epsilon = 1e-15);
        let x = point(&[0.5, 0.0, 0.0]);
        assert_abs_diff_eq!(bck_metric(&x, &basis(3, 0)).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bck_metric(&x, &basis(3, 1)).unwrap(), 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(bck_ball_metric(&z, 2.0, &z, &basis(3, 0)).unwrap(), 0.5, epsilon = 1e-15);
        let p12 = TwoPlane::coordinate(3, 0, 1).unwrap();
        assert_abs_diff_eq!(bck_plane_metric(&z, &p12).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bck_plane_metric(&x, &p12).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
        assert!(matches!(bck_metric(&point(&[1.0, 0.0, 0.0]), &u), Err(Error::OutsideBall)));
    }

    #[test]
    fn ball_distance_radial() {
        let d = ball_distance(&DVector::zeros(3), &point(&[0.5, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(d, 0.5 * 3f64.ln(), epsilon = 1e-9);
        let x = point(&[0.1, 0.2, 0.3]);
        assert_eq!(ball_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn harmonic_measure_at_center_is_measure() {
        let k = ArcSet::new(&[(0.3, 1.1), (5.0, 7.0)]).unwrap();
        assert_abs_diff_eq!(harmonic_measure(&k, c(0.0, 0.0)).unwrap(), k.measure(), epsilon = 1e-14);
    }

    #[test]
    fn harnack_radius_value() {
        let k = ArcSet::new(&[(0.0, 0.2 * PI)]).unwrap();
        assert_abs_diff_eq!(k.measure(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(harnack_radius(0.5, &k).unwrap(), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn arcs_merge_and_wrap() {
        let k = ArcSet::new(&[(6.0, 6.5), (0.5, 0.9), (0.8, 1.0)]).unwrap();
        assert_eq!(k.arcs().len(), 3);
        assert_abs_diff_eq!(k.measure(), (0.5 + 0.5) / TAU, epsilon = 1e-14);
    }

    fn rotation(a: f64, b: f64) -> nalgebra::DMatrix<f64> {
        let rz = nalgebra::Rotation3::from_euler_angles(a, b, a - b);
        nalgebra::DMatrix::from_iterator(3, 3, rz.matrix().iter().copied())
    }

    proptest! {
        #[test]
        fn bck_dominates_euclidean(x in prop::array::uniform3(-0.57f64..0.57), u in prop::array::uniform3(-3f64..3.0)) {
            let (x, u) = (point(&x), point(&u));
            prop_assert!(bck_metric(&x, &u).unwrap() >= u.norm() * (1.0 - 1e-15));
        }

        #[test]
        fn bck_rotation_invariant(
            x in prop::array::uniform3(-0.57f64..0.57),
            u in prop::array::uniform3(-3f64..3.0),
            a in 0f64..6.0, b in 0f64..6.0,
        ) {
            let (x, u) = (point(&x), point(&u));
            let o = rotation(a, b);
            let lhs = bck_metric(&(&o * &x), &(&o * &u)).unwrap();
            prop_assert!((lhs - bck_metric(&x, &u).unwrap()).abs() <= 1e-12 * (1.0 + lhs));
        }

        #[test]
        fn bck_dilation_rule(x in prop::array::uniform3(-0.57f64..0.57), u in prop::array::uniform3(-3f64..3.0), r in 0.1f64..10.0) {
            let (x, u) = (point(&x), point(&u));
            let lhs = bck_ball_metric(&DVector::zeros(3), r, &(&x * r), &u).unwrap();
            let rhs = bck_metric(&x, &u).unwrap() / r;
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1.0));
        }

        #[test]
        fn plane_metric_is_sampled_max(
            x in prop::array::uniform3(-0.57f64..0.57),
            a in prop::array::uniform3(-1f64..1.0),
            b in prop::array::uniform3(-1f64..1.0),
        ) {
            let x = point(&x);
            if let Ok(plane) = TwoPlane::spanned_by(&point(&a), &point(&b)) {
                let closed = bck_plane_metric(&x, &plane).unwrap();
                let f = |t: f64| bck_metric(&x, &plane.unit(t)).unwrap();
                let step = PI / 180.0;
                let (best, _) = (0..360)
                    .map(|k| (k as f64 * step, f(k as f64 * step)))
                    .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
                // golden-section refinement around the best sample
                let g = (5f64.sqrt() - 1.0) / 2.0;
                let (mut lo, mut hi) = (best - step, best + step);
                for _ in 0..60 {
                    let (m1, m2) = (hi - g * (hi - lo), lo + g * (hi - lo));
                    if f(m1) < f(m2) { lo = m1 } else { hi = m2 }
                }
                let sampled = f(0.5 * (lo + hi));
                prop_assert!((closed - sampled).abs() <= 1e-6, "{closed} vs {sampled}");
            }
        }

        #[test]
        fn poincare_distance_symmetric(z in prop::array::uniform2(-0.7f64..0.7), w in prop::array::uniform2(-0.7f64..0.7)) {
            let (z, w) = (c(z[0], z[1]), c(w[0], w[1]));
            let d1 = poincare_distance(z, w).unwrap();
            let d2 = poincare_distance(w, z).unwrap();
            prop_assert!((d1 - d2).abs() <= 1e-13);
        }

        #[test]
        fn harnack_two_sided(s in 0f64..6.3, len in 0.01f64..3.0, r in 0f64..0.95, t in 0f64..6.3) {
            // (1-r)/(1+r) ω(0) ≤ ω(z) ≤ (1+r)/(1-r) ω(0)
            let k = ArcSet::new(&[(s, s + len)]).unwrap();
            let w0 = k.measure();
            let w = harmonic_measure(&k, Complex64::from_polar(r, t)).unwrap();
            prop_assert!(w >= (1.0 - r) / (1.0 + r) * w0 - 1e-12);
            prop_assert!(w <= (1.0 + r) / (1.0 - r) * w0 + 1e-12);
        }

        #[test]
        fn ball_distance_metric_axioms(
            x in prop::array::uniform3(-0.55f64..0.55),
            y in prop::array::uniform3(-0.55f64..0.55),
            z in prop::array::uniform3(-0.55f64..0.55),
        ) {
            let (x, y, z) = (point(&x), point(&y), point(&z));
            let xy = ball_distance(&x, &y).unwrap();
            prop_assert!((xy - ball_distance(&y, &x).unwrap()).abs() <= 1e-6);
            prop_assert!(xy <= ball_distance(&x, &z).unwrap() + ball_distance(&z, &y).unwrap() + 1e-6);
        }
    }
}
