//! Structural hyperbolicity verdicts with certificates.
//!
//! `Unknown` is returned whenever no certificate applies; nothing is
//! upgraded heuristically.

use serde::Serialize;

use crate::bounds::{independent_faces, mpsh_check, MpshCertificate, Region};
use crate::domain::{DomainSpec, HalfSpace, Sublevel};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{orthogonal_complement, singular_values, Direction, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    CompleteHyperbolic,
    Hyperbolic,
    NonHyperbolic,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    BoundingBall {
        center: Vec<f64>,
        radius: f64,
        note: String,
    },
    /// Sublevel set kept away from every wall of its sampling box.
    BoundedSublevel {
        bbox: Vec<(f64, f64)>,
        wall_samples: usize,
    },
    Hyperplanes {
        rank: usize,
        faces: Vec<usize>,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    WitnessPlane {
        point: Vec<f64>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        samples_checked: usize,
    },
    Mpsh {
        witness: String,
        certificate: MpshCertificate,
    },
    Collar {
        certificate: MpshCertificate,
        min_gradient: f64,
        samples: usize,
    },
    None {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub certificate: Certificate,
}

fn numeric_rank(rows: &[Direction]) -> usize {
    let s = singular_values(rows);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > 1e-8 * smax).count(),
        _ => 0,
    }
}

/// Point maximizing the smallest face clearance, by a subgradient ascent
/// stopped once the clearance reaches 1.
pub fn interior_point(faces: &[HalfSpace]) -> Result<Point> {
    let n = faces[0].normal().len();
    let clear = |x: &Point| faces.iter().map(|f| f.clearance(x)).fold(f64::INFINITY, f64::min);
    let mut x = Point::zeros(n);
    let mut best = (clear(&x), x.clone());
    for k in 0..20_000 {
        let (i, c) = faces.iter().enumerate().map(|(i, f)| (i, f.clearance(&x))).fold((0, f64::INFINITY), |a, b| {
            if b.1 < a.1 {
                b
            } else {
                a
            }
        });
        if c > best.0 {
            best = (c, x.clone());
        }
        if best.0 >= 1.0 {
            break;
        }
        let step = (1.0 + c.abs()) / (1.0 + k as f64).sqrt();
        x += faces[i].normal() * step;
    }
    if best.0 > 1e-9 {
        Ok(best.1)
    } else {
        Err(Error::EmptyDomain)
    }
}

/// Verdict for a convex polyhedral domain from the rank of its face normals.
pub fn classify_convex(dom: &DomainSpec) -> Result<Verdict> {
    let faces = dom
        .faces()
        .ok_or_else(|| Error::InvalidInput("classify_convex needs a half-space or polyhedral domain".into()))?;
    let n = dom.dim();
    let x0 = interior_point(faces)?;
    let normals: Vec<Direction> = faces.iter().map(|f| f.normal().clone()).collect();
    let rank = numeric_rank(&normals);
    if rank + 1 >= n {
        let chosen = independent_faces(faces, n - 1);
        return Ok(Verdict {
            status: Status::CompleteHyperbolic,
            certificate: Certificate::Hyperplanes {
                rank,
                normals: chosen.iter().map(|&i| faces[i].normal().iter().copied().collect()).collect(),
                offsets: chosen.iter().map(|&i| faces[i].offset()).collect(),
                faces: chosen,
            },
        });
    }
    let lineal = orthogonal_complement(&normals, n, 1e-8);
    let (b1, b2) = (lineal[0].clone(), lineal[1].clone());
    let samples = 1000;
    for k in 0..samples {
        let q = crate::geometry::kronecker_point(k, 2);
        let p = &x0 + &b1 * (2e3 * q[0] - 1e3) + &b2 * (2e3 * q[1] - 1e3);
        if !dom.contains(&p, 0.0)? {
            return Err(Error::ConstructionFailed("witness plane leaves the domain".into()));
        }
    }
    Ok(Verdict {
        status: Status::NonHyperbolic,
        certificate: Certificate::WitnessPlane {
            point: x0.iter().copied().collect(),
            b1: b1.iter().copied().collect(),
            b2: b2.iter().copied().collect(),
            samples_checked: samples,
        },
    })
}

/// Samples the walls of the box; true if `u ≥ 0` at every sample.
fn sublevel_bounded(s: &Sublevel, per_axis: usize) -> (bool, usize) {
    let n = s.bbox().len();
    let mut count = 0;
    for axis in 0..n {
        for side in [0, 1] {
            let total = per_axis.pow((n - 1) as u32);
            for mut k in 0..total {
                let p = Point::from_fn(n, |i, _| {
                    let (lo, hi) = s.bbox()[i];
                    if i == axis {
                        return if side == 0 { lo } else { hi };
                    }
                    let j = k % per_axis;
                    k /= per_axis;
                    lo + (hi - lo) * j as f64 / (per_axis - 1) as f64
                });
                count += 1;
                match s.expr().eval(&p) {
                    Ok(v) if v < 0.0 => return (false, count),
                    _ => {}
                }
            }
        }
    }
    (true, count)
}

fn box_region(s: &Sublevel, grid: usize) -> Region {
    Region::Box { bbox: s.bbox().to_vec(), grid }
}

/// Verdict for any domain. For sublevel domains an optional negative
/// strongly MPSH witness may be supplied.
pub fn classify_general(dom: &DomainSpec, witness: Option<&Expr>) -> Verdict {
    match dom {
        DomainSpec::Ball { center, radius } => Verdict {
            status: Status::Hyperbolic,
            certificate: Certificate::BoundingBall {
                center: center.iter().copied().collect(),
                radius: *radius,
                note: "bounded; the ball is also strongly minimally convex (see smc_upgrade)".into(),
            },
        },
        DomainSpec::HalfSpace(_) | DomainSpec::Polyhedral(_) => classify_convex(dom).unwrap_or_else(|e| Verdict {
            status: Status::Unknown,
            certificate: Certificate::None { reason: e.to_string() },
        }),
        DomainSpec::Sublevel(s) => {
            if let Some(u) = witness {
                match mpsh_witness(dom, s, u) {
                    Ok(v) => return v,
                    Err(e) => {
                        return Verdict {
                            status: Status::Unknown,
                            certificate: Certificate::None { reason: e.to_string() },
                        }
                    }
                }
            }
            let (bounded, wall_samples) = sublevel_bounded(s, 21);
            if bounded {
                Verdict {
                    status: Status::Hyperbolic,
                    certificate: Certificate::BoundedSublevel { bbox: s.bbox().to_vec(), wall_samples },
                }
            } else {
                Verdict {
                    status: Status::Unknown,
                    certificate: Certificate::None { reason: "sublevel set reaches its sampling box".into() },
                }
            }
        }
    }
}

/// Negative on domain samples and strongly MPSH on the box grid.
fn mpsh_witness(dom: &DomainSpec, s: &Sublevel, u: &Expr) -> Result<Verdict> {
    let region = box_region(s, 21);
    for p in region.samples() {
        if dom.contains(&p, 0.0).unwrap_or(false) && !(u.eval(&p)? < 0.0) {
            return Err(Error::HypothesisFailed(format!("witness is not negative at {:?}", p.as_slice())));
        }
    }
    let cert = mpsh_check(u, &region, true, 0.0)?;
    Ok(Verdict {
        status: Status::Hyperbolic,
        certificate: Certificate::Mpsh { witness: u.to_string(), certificate: cert },
    })
}

/// Complete hyperbolicity of a bounded sublevel domain whose defining
/// function is strongly MPSH with nonvanishing gradient on the collar
/// `|u| ≤ collar`.
pub fn smc_upgrade(dom: &DomainSpec, collar: f64, grid: usize) -> Result<Verdict> {
    let DomainSpec::Sublevel(s) = dom else {
        return Err(Error::InvalidInput("smc_upgrade needs a sublevel domain".into()));
    };
    if !sublevel_bounded(s, 21).0 {
        return Err(Error::HypothesisFailed("sublevel set is not bounded inside its box".into()));
    }
    let mut pts = Vec::new();
    for p in box_region(s, grid).samples() {
        if let Ok(v) = s.expr().eval(&p) {
            if v.abs() <= collar {
                pts.push(p);
            }
        }
    }
    if pts.len() < 50 {
        return Err(Error::HypothesisFailed(format!("only {} collar samples; refine the grid", pts.len())));
    }
    let mut min_gradient = f64::INFINITY;
    for p in &pts {
        min_gradient = min_gradient.min(s.expr().eval_jet2(p)?.gradient.norm());
    }
    if !(min_gradient > 1e-6) {
        return Err(Error::HypothesisFailed("gradient vanishes on the collar".into()));
    }
    let region = Region::Points { points: pts.iter().map(|p| p.iter().copied().collect()).collect() };
    let cert = mpsh_check(s.expr(), &region, false, 0.0)?;
    if !cert.strong {
        return Err(Error::HypothesisFailed(format!(
            "defining function is not strongly MPSH on the collar (minimum {:.3e} at {:?})",
            cert.c, cert.argmin
        )));
    }
    Ok(Verdict {
        status: Status::CompleteHyperbolic,
        certificate: Certificate::Collar { certificate: cert, min_gradient, samples: pts.len() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{basis, point};
    use proptest::prelude::*;

    fn slab() -> DomainSpec {
        DomainSpec::polyhedral(vec![
            HalfSpace::new(basis(3, 0), 0.0).unwrap(),
            HalfSpace::new(-basis(3, 0), -1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn slab_is_not_hyperbolic() {
        let v = classify_convex(&slab()).unwrap();
        assert_eq!(v.status, Status::NonHyperbolic);
        let Certificate::WitnessPlane { point, b1, b2, .. } = v.certificate else { panic!() };
        assert!((point[0] - 0.5).abs() < 1e-6, "{point:?}");
        assert!(b1[0].abs() < 1e-12 && b2[0].abs() < 1e-12);
    }

    #[test]
    fn octant_and_prism_are_complete() {
        let oct = DomainSpec::polyhedral((0..3).map(|i| HalfSpace::new(basis(3, i), 0.0).unwrap()).collect()).unwrap();
        assert_eq!(classify_convex(&oct).unwrap().status, Status::CompleteHyperbolic);
        let prism = DomainSpec::polyhedral(
            (0..6)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 6.0;
                    HalfSpace::new(-point(&[a.cos(), a.sin(), 0.0]), -1.0).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let v = classify_convex(&prism).unwrap();
        assert_eq!(v.status, Status::CompleteHyperbolic);
        let Certificate::Hyperplanes { faces, rank, .. } = v.certificate else { panic!() };
        assert_eq!((faces.len(), rank), (2, 2));
    }

    #[test]
    fn empty_polyhedron() {
        let e = DomainSpec::polyhedral(vec![
            HalfSpace::new(basis(3, 0), 1.0).unwrap(),
            HalfSpace::new(-basis(3, 0), 1.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(classify_convex(&e), Err(Error::EmptyDomain)));
    }

    #[test]
    fn general_examples() {
        assert_eq!(classify_general(&DomainSpec::unit_ball(3).unwrap(), None).status, Status::Hyperbolic);
        let hyp = DomainSpec::sublevel("x1^2+x2^2-0.5*x3^2-1", vec![(-3.0, 3.0); 3], false).unwrap();
        assert_eq!(classify_general(&hyp, None).status, Status::Unknown);
        let w = Expr::parse("x1^2+x2^2-0.5*x3^2-1", 3).unwrap();
        assert_eq!(classify_general(&hyp, Some(&w)).status, Status::Hyperbolic);
        let hc = DomainSpec::sublevel("-1/(1+x1^2)+x2^2+x3^2", vec![(-10.0, 10.0), (-1.5, 1.5), (-1.5, 1.5)], false)
            .unwrap();
        let w = Expr::parse("-1/(1+x1^2)+x2^2+x3^2", 3).unwrap();
        assert_eq!(classify_general(&hc, Some(&w)).status, Status::Hyperbolic);
        let bounded = DomainSpec::sublevel("abs2()-1", vec![(-2.0, 2.0); 3], true).unwrap();
        assert_eq!(classify_general(&bounded, None).status, Status::Hyperbolic);
    }

    #[test]
    fn smc_examples() {
        let ball = DomainSpec::sublevel("abs2()-1", vec![(-1.5, 1.5); 3], true).unwrap();
        assert_eq!(smc_upgrade(&ball, 0.2, 31).unwrap().status, Status::CompleteHyperbolic);
        let ell = DomainSpec::sublevel("x1^2+x2^2+2*x3^2-1", vec![(-1.5, 1.5); 3], true).unwrap();
        let v = smc_upgrade(&ell, 0.2, 31).unwrap();
        let Certificate::Collar { certificate, .. } = v.certificate else { panic!() };
        assert_eq!(certificate.c, 4.0);
        let neck = DomainSpec::sublevel("(x1^2-1)^2+x2^2+x3^2-1.2", vec![(-2.0, 2.0), (-1.5, 1.5), (-1.5, 1.5)], false)
            .unwrap();
        assert!(matches!(smc_upgrade(&neck, 0.2, 31), Err(Error::HypothesisFailed(_))));
        let cyl = DomainSpec::sublevel("x1^2+x2^2-1", vec![(-2.0, 2.0); 3], true).unwrap();
        assert!(matches!(smc_upgrade(&cyl, 0.2, 31), Err(Error::HypothesisFailed(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rigid_motion_invariance(ax in prop::array::uniform3(-1.0f64..1.0), angle in 0.0f64..std::f64::consts::TAU,
                                   t in prop::array::uniform3(-5.0f64..5.0), which in 0usize..3) {
            let axis = point(&ax);
            prop_assume!(axis.norm() > 0.1);
            let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(nalgebra::Vector3::new(ax[0], ax[1], ax[2])), angle);
            let r = nalgebra::DMatrix::from_fn(3, 3, |i, j| rot.matrix()[(i, j)]);
            let t = point(&t);
            let base: Vec<HalfSpace> = match which {
                0 => vec![HalfSpace::new(basis(3, 0), 0.0).unwrap(), HalfSpace::new(-basis(3, 0), -1.0).unwrap()],
                1 => (0..3).map(|i| HalfSpace::new(basis(3, i), 0.0).unwrap()).collect(),
                _ => (0..5).map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 5.0;
                    HalfSpace::new(-point(&[a.cos(), a.sin(), 0.0]), -1.0).unwrap()
                }).collect(),
            };
            let moved: Vec<HalfSpace> = base.iter().map(|h| {
                let nn = &r * h.normal();
                HalfSpace::new(nn.clone(), h.offset() + nn.dot(&t)).unwrap()
            }).collect();
            let a = classify_convex(&DomainSpec::polyhedral(base).unwrap()).unwrap().status;
            let b = classify_convex(&DomainSpec::polyhedral(moved).unwrap()).unwrap().status;
            prop_assert_eq!(a, b);
        }
    }
}
