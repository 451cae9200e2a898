use minmetric::bounds::{best_lower, halfspace_bound, Toolbox};
use minmetric::distance::{chain_distance_upper, distance_lower, ChainConfig};
use minmetric::domain::{DomainSpec, HalfSpace};
use minmetric::geometry::{basis, point, TwoPlane};
use minmetric::models::{bck_ball_metric, bck_metric, bck_plane_metric, poincare_distance};
use nalgebra::{DMatrix, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

fn rotation(axis: [f64; 3], angle: f64) -> DMatrix<f64> {
    let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2])), angle);
    DMatrix::from_fn(3, 3, |i, j| r.matrix()[(i, j)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ball_metric_rotation_invariant(x in prop::array::uniform3(-0.55f64..0.55), u in prop::array::uniform3(-2.0f64..2.0),
                                      axis in prop::array::uniform3(0.1f64..1.0), angle in 0.0f64..std::f64::consts::TAU) {
        let r = rotation(axis, angle);
        let (x, u) = (point(&x), point(&u));
        let a = bck_metric(&x, &u).unwrap();
        let b = bck_metric(&(&r * &x), &(&r * &u)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= u.norm() - 1e-12);
    }

    #[test]
    fn plane_metric_dominates_directions(x in prop::array::uniform3(-0.55f64..0.55), a in prop::array::uniform3(-1.0f64..1.0),
                                         b in prop::array::uniform3(-1.0f64..1.0), t in 0.0f64..std::f64::consts::PI) {
        let Ok(pl) = TwoPlane::spanned_by(&point(&a), &point(&b)) else { return Ok(()) };
        let x = point(&x);
        let m = bck_plane_metric(&x, &pl).unwrap();
        prop_assert!(bck_metric(&x, &pl.unit(t)).unwrap() <= m + 1e-12);
    }

    #[test]
    fn halfspace_lower_below_inscribed_balls(x1 in 0.05f64..5.0, y in prop::array::uniform2(-3.0f64..3.0),
                                             v in prop::array::uniform3(-1.0f64..1.0), r in 1.0f64..50.0) {
        let h = HalfSpace::new(basis(3, 0), 0.0).unwrap();
        let x = point(&[x1, y[0], y[1]]);
        let v = point(&v);
        let lower = halfspace_bound(&h, &x, &v).unwrap().value;
        // ball tangent to the boundary plane and containing x
        let radius = r.max(x1 / 2.0 + (y[0] * y[0] + y[1] * y[1]) / (2.0 * x1) + 1e-3);
        let c = point(&[radius, 0.0, 0.0]);
        if (&x - &c).norm() < radius {
            prop_assert!(lower <= bck_ball_metric(&c, radius, &x, &v).unwrap() + 1e-12);
        }
    }

    #[test]
    fn best_lower_is_monotone_in_domain(x in prop::array::uniform3(-0.5f64..0.5), v in prop::array::uniform3(-1.0f64..1.0),
                                        big in 1.0f64..4.0) {
        let (x, v) = (point(&x), point(&v));
        let small = DomainSpec::unit_ball(3).unwrap();
        let large = DomainSpec::ball(point(&[0.0; 3]), big).unwrap();
        let a = best_lower(&small, &x, &v, &Toolbox::default()).unwrap().value;
        let b = best_lower(&large, &x, &v, &Toolbox::default()).unwrap().value;
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn poincare_triangle(a in (0.0f64..0.9, 0.0f64..std::f64::consts::TAU), b in (0.0f64..0.9, 0.0f64..std::f64::consts::TAU), c in (0.0f64..0.9, 0.0f64..std::f64::consts::TAU)) {
        let z = |(r, t): (f64, f64)| Complex64::from_polar(r, t);
        let (p, q, s) = (z(a), z(b), z(c));
        let d = |u, w| poincare_distance(u, w).unwrap();
        prop_assert!(d(p, s) <= d(p, q) + d(q, s) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn distance_bounds_are_ordered(x in (0.2f64..3.0, -2.0f64..2.0), y in (0.2f64..3.0, -2.0f64..2.0)) {
        let dom = DomainSpec::halfspace(basis(3, 0), 0.0).unwrap();
        let (p, q) = (point(&[x.0, x.1, 0.0]), point(&[y.0, y.1, 0.5]));
        let lo = distance_lower(&dom, &p, &q).unwrap().value;
        let chain = chain_distance_upper(&dom, &p, &q, &ChainConfig::default()).unwrap();
        chain.validate(&dom, &p, &q).unwrap();
        prop_assert!(lo <= chain.total + 1e-12, "{} > {}", lo, chain.total);
    }
}
