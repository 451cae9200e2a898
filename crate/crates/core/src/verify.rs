//! Self-verification suites: exact values, solver tightness and soundness
//! properties checked end to end. Used by `minmetric verify` and by the
//! acceptance test target.

use std::f64::consts::{FRAC_PI_4, PI};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    best_lower, circumscribed_ball_bound, closure_samples, halfspace_bound, localization_constant, mpsh_check, psi_jet,
    sibony_value, theta, trace_plane_hessian, Epsilon0, Region, Toolbox,
};
use crate::classify::{classify_convex, interior_point, Certificate, Status};
use crate::disc::NullDisc;
use crate::distance::{chain_distance_upper, path_length_lower, ray_length_lower, ChainConfig};
use crate::domain::{DomainSpec, HalfSpace};
use crate::error::Result;
use crate::expr::Expr;
use crate::extremal::{maximize_g, maximize_m, SolverConfig, NULL_TOL};
use crate::geometry::{basis, frame_complete, point, Direction, Point, Polyline, TwoPlane};
use crate::models::{bck_ball_metric, bck_metric, harmonic_measure, ArcSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
}

pub const SUITES: &[(&str, &[u32])] = &[
    ("ball", &[1, 2, 5, 12]),
    ("halfspace", &[3]),
    ("cylinder", &[4]),
    ("harnack", &[6]),
    ("mpsh", &[7]),
    ("sibony", &[8]),
    ("psi", &[9]),
    ("convex", &[10]),
    ("localization", &[11]),
    ("soundness", &[13]),
    ("all", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]),
];

pub fn suite_ids(name: &str) -> Option<&'static [u32]> {
    SUITES.iter().find(|(n, _)| *n == name).map(|(_, ids)| *ids)
}

/// Runs one criterion; an internal error counts as a failure.
pub fn run(id: u32, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let (name, out): (&str, Result<(bool, String)>) = match id {
        1 => ("ball exact metric", ball_exact()),
        2 => ("solver tightness on the ball", ball_solver(seed)),
        3 => ("half-space sandwich", halfspace_sandwich(seed)),
        4 => ("cylinder values", cylinder_values(seed)),
        5 => ("chains on the ball", ball_chains()),
        6 => ("harmonic measure bound", harnack()),
        7 => ("MPSH certificates", mpsh_certificates()),
        8 => ("Sibony soundness", sibony_soundness(seed)),
        9 => ("Psi identity", psi_identity(seed)),
        10 => ("convex classification", convex_classification()),
        11 => ("localization", localization(seed)),
        12 => ("monotonicity", monotonicity(seed)),
        13 => ("distance-decreasing soundness", distance_decreasing(seed)),
        _ => ("unknown", Ok((false, format!("no criterion {id}")))),
    };
    let (pass, detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name: name.into(), pass, detail, seconds: start.elapsed().as_secs_f64() }
}

fn origin() -> Point {
    Point::zeros(3)
}

fn unit_ball() -> DomainSpec {
    DomainSpec::unit_ball(3).expect("unit ball")
}

fn random_unit(rng: &mut ChaCha8Rng) -> Direction {
    loop {
        let v = point(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Point {
    random_unit(rng) * (radius * rng.random::<f64>().cbrt())
}

fn random_plane(rng: &mut ChaCha8Rng) -> TwoPlane {
    loop {
        if let Ok(p) = TwoPlane::spanned_by(&random_unit(rng), &random_unit(rng)) {
            return p;
        }
    }
}

fn ball_exact() -> Result<(bool, String)> {
    let u = point(&[0.3, -0.4, 1.2]);
    let half = point(&[0.5, 0.0, 0.0]);
    let vals = [
        (bck_metric(&origin(), &u)?, u.norm()),
        (bck_metric(&half, &basis(3, 0))?, 4.0 / 3.0),
        (bck_metric(&half, &basis(3, 1))?, 2.0 / 3f64.sqrt()),
    ];
    let err = vals.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((err <= 1e-12, format!("max error {err:.2e}")))
}

/// Sup over the unit circle of `|f(z) − (x + Re c_1 z)|`.
fn affine_distance(d: &NullDisc) -> f64 {
    let affine = NullDisc::new(d.center().clone(), vec![d.coeffs()[0].clone()]).expect("affine part");
    (0..256)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 256.0);
            (d.evaluate(z) - affine.evaluate(z)).norm()
        })
        .fold(0.0, f64::max)
}

fn ball_solver(seed: u64) -> Result<(bool, String)> {
    let cfg = SolverConfig { degree: 8, multistarts: 16, seed, ..SolverConfig::default() };
    let r = maximize_g(&unit_ball(), &origin(), &basis(3, 0), &cfg)?;
    let dist = affine_distance(&r.witness);
    let pass = (1.0..=1.02).contains(&r.bound) && dist <= 0.05;
    Ok((pass, format!("upper {:.6}, witness distance to affine {:.2e}", r.bound, dist)))
}

fn halfspace_sandwich(seed: u64) -> Result<(bool, String)> {
    let h = HalfSpace::new(basis(3, 0), 0.0)?;
    let dom = DomainSpec::HalfSpace(h.clone());
    let x = point(&[1.0, 0.0, 0.0]);
    let lower = halfspace_bound(&h, &x, &basis(3, 0))?.value;
    let upper = maximize_g(&dom, &x, &basis(3, 0), &SolverConfig { seed, ..SolverConfig::default() })?.bound;
    // inscribed ball B((R,0,0), R) lies in the half-space, so its exact metric bounds g from above
    let r = 100.0;
    let oracle = bck_ball_metric(&point(&[r, 0.0, 0.0]), r, &x, &basis(3, 0))?;
    let pass = lower == 0.5 && upper <= 0.55 && oracle <= 0.5026 && lower <= upper && lower <= oracle;
    Ok((pass, format!("lower {lower}, solver upper {upper:.6}, inscribed-ball oracle {oracle:.6}")))
}

fn cylinder() -> DomainSpec {
    DomainSpec::sublevel("x1^2+x2^2-1", vec![(-2.0, 2.0), (-2.0, 2.0), (-10.0, 10.0)], true).expect("cylinder")
}

fn cylinder_values(seed: u64) -> Result<(bool, String)> {
    let dom = cylinder();
    let plane = TwoPlane::coordinate(3, 0, 1)?;
    let mut ms = Vec::new();
    for s in 0..3 {
        let cfg = SolverConfig { seed: seed + s, ..SolverConfig::default() };
        ms.push(maximize_m(&dom, &origin(), &plane, &cfg)?.bound);
    }
    let m_ok = ms.iter().all(|&m| (1.0..=1.05).contains(&m));
    let cfg = SolverConfig { degree: 16, seed, ..SolverConfig::default() };
    let g = maximize_g(&dom, &origin(), &basis(3, 0), &cfg)?.bound;
    let frame = frame_complete(&basis(3, 0), Some(&basis(3, 2)))?;
    let strip = NullDisc::strip_fejer(&origin(), &frame, 100)?;
    let deriv = strip.derivative(Complex64::new(0.0, 0.0)).0.norm();
    let strip_ok = strip.contained(&dom, 32, 1024, 0.0)? && strip.null_residual() <= NULL_TOL;
    let pass = m_ok && g <= FRAC_PI_4 + 0.02 && strip_ok && deriv >= 4.0 / PI - 0.02;
    Ok((
        pass,
        format!(
            "M(e1,e2) runs {ms:.4?}, g(e1) upper {g:.4} (N=16), strip seed derivative {deriv:.4} contained {strip_ok}"
        ),
    ))
}

fn ball_chains() -> Result<(bool, String)> {
    let dom = unit_ball();
    let y = point(&[0.5, 0.0, 0.0]);
    let truth = 0.5 * 3f64.ln();
    let chain = chain_distance_upper(&dom, &origin(), &y, &ChainConfig::default())?;
    chain.validate(&dom, &origin(), &y)?;
    let lower = path_length_lower(&dom, &Polyline::segment(&origin(), &y, 1)?, &Toolbox::default(), 65)?;
    let pass = (chain.total - truth).abs() <= 0.02 * truth && lower <= truth + 1e-9 && lower >= 0.98 * truth;
    Ok((pass, format!("chain upper {:.6}, path lower {lower:.6}, exact {truth:.6}", chain.total)))
}

fn harnack() -> Result<(bool, String)> {
    let k = ArcSet::new(&[(0.0, 0.1 * 2.0 * PI)])?;
    let mut worst = 0.0f64;
    for i in 0..=60 {
        let r = 0.6 * i as f64 / 60.0;
        for j in 0..720 {
            let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / 720.0);
            worst = worst.max(harmonic_measure(&k, z)?);
        }
    }
    Ok((worst <= 0.5 + 1e-9, format!("|K| = {}, grid max {worst:.6}", k.measure())))
}

fn mpsh_certificates() -> Result<(bool, String)> {
    let shell = Region::Shell { center: vec![0.0; 3], inner: 0.1, outer: 10.0, samples: 1000 };
    let log = mpsh_check(&Expr::parse("log(sqrt(abs2()))", 3)?, &shell, false, 0.0)?;
    let bx = Region::Box { bbox: vec![(-3.0, 3.0); 3], grid: 11 };
    let mut cs = Vec::new();
    for a in [0.25, 0.5] {
        cs.push(mpsh_check(&Expr::parse(&format!("x1^2+x2^2-{a}*x3^2"), 3)?, &bx, true, 0.0)?.c);
    }
    let hyper = Region::Box { bbox: vec![(-10.0, 10.0), (-2.0, 2.0), (-2.0, 2.0)], grid: 41 };
    let h = mpsh_check(&Expr::parse("-1/(1+x1^2) + 1*(x2^2+x3^2)", 3)?, &hyper, false, 0.0)?;
    let pass = log.c.abs() <= 1e-9 && log.samples >= 1000 && cs == [1.5, 1.0] && h.mpsh;
    Ok((pass, format!("log|x| min {:.2e}; c = {cs:?}; hyperconvex c = {:.4}", log.c, h.c)))
}

fn sibony_soundness(seed: u64) -> Result<(bool, String)> {
    let dom = unit_ball();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b);
    let region = Region::Shell { center: vec![0.0; 3], inner: 0.0, outer: 1.0, samples: 2000 };
    let mut cases = vec![(origin(), TwoPlane::coordinate(3, 0, 1)?)];
    for _ in 0..20 {
        cases.push((random_in_ball(&mut rng, 0.8), random_plane(&mut rng)));
    }
    let cfg = SolverConfig { seed, ..SolverConfig::default() };
    let rows = cases
        .par_iter()
        .map(|(x, pl)| {
            let s = (1.0 + x.norm()).powi(2);
            let u = Expr::parse(&format!("((x1-({}))^2+(x2-({}))^2+(x3-({}))^2)/{s}", x[0], x[1], x[2]), 3)?;
            let f = sibony_value(&u, &region, x, pl)?;
            let m = maximize_m(&dom, x, pl, &cfg)?.bound;
            Ok((f, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows[1..].iter().map(|(f, m)| f - m).fold(f64::NEG_INFINITY, f64::max);
    let (f0, m0) = rows[0];
    let pass = worst <= 0.02 && (f0 - m0).abs() <= 0.02;
    Ok((pass, format!("max(F - M) over 20 points {worst:.4}; center F {f0:.4} vs M {m0:.4}")))
}

fn psi_identity(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let q: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = Expr::parse(
            &format!(
                "({})*x1^2+({})*x2^2+({})*x3^2+({})*x1*x2+({})*x3+({})",
                q[0] + 1.5,
                q[1] + 1.5,
                q[2] + 1.5,
                q[3],
                q[4],
                q[5] - 1.0
            ),
            3,
        )?;
        let x = random_in_ball(&mut rng, 1.0);
        let r = rng.random_range(0.1..1.0);
        let lam = rng.random_range(0.1..3.0);
        let pl = random_plane(&mut rng);
        let want = 4.0 / (r * r) * (lam * u.eval(&x)?).exp();
        // central second differences of Ψ along the plane basis
        let h = 1e-4 * r;
        let psi = |y: &Point| psi_jet(&u, &x, r, lam, y).map(|d| d.v);
        let mut tr = 0.0;
        for b in [pl.b1(), pl.b2()] {
            tr += (psi(&(&x + b * h))? + psi(&(&x - b * h))? - 2.0 * psi(&x)?) / (h * h);
        }
        let jet = trace_plane_hessian(&psi_jet(&u, &x, r, lam, &x)?.to_jet().hessian, &pl);
        worst = worst.max(((tr - want) / want).abs()).max(((jet - want) / want).abs());
    }
    let th = theta();
    let mut min_gap = f64::INFINITY;
    for _ in 0..10_000 {
        let x = random_unit(&mut rng) * rng.random_range(0.01..3.0);
        let beta = rng.random_range(0.05..5.0);
        let pl = random_plane(&mut rng);
        min_gap = min_gap.min(th.log_hessian_trace(beta, &x, &pl) + 4.0 * th.a * beta);
    }
    let pass = worst <= 1e-6 && min_gap >= -1e-9;
    Ok((
        pass,
        format!("max relative error {worst:.2e}; min(tr + 4A beta) {min_gap:.3e} over 1e4 samples, A = {:.4}", th.a),
    ))
}

fn convex_classification() -> Result<(bool, String)> {
    let slab = DomainSpec::polyhedral(vec![HalfSpace::new(basis(3, 0), 0.0)?, HalfSpace::new(-basis(3, 0), -1.0)?])?;
    let octant = DomainSpec::polyhedral((0..3).map(|i| HalfSpace::new(basis(3, i), 0.0)).collect::<Result<_>>()?)?;
    let prism = DomainSpec::polyhedral(
        (0..6)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 6.0;
                HalfSpace::new(-point(&[a.cos(), a.sin(), 0.0]), -1.0)
            })
            .collect::<Result<_>>()?,
    )?;
    let mut notes = Vec::new();
    let s = classify_convex(&slab)?;
    let mut pass = s.status == Status::NonHyperbolic && matches!(s.certificate, Certificate::WitnessPlane { .. });
    notes.push(format!("slab {:?}", s.status));
    let rays = [
        (&octant, [point(&[1.0, 1.0, 1.0]), basis(3, 0), -basis(3, 1)]),
        (&prism, [basis(3, 2), basis(3, 0), point(&[1.0, 1.0, 1.0])]),
    ];
    for (name, (dom, dirs)) in ["octant", "prism"].iter().zip(rays) {
        let v = classify_convex(dom)?;
        let faces_ok = matches!(&v.certificate, Certificate::Hyperplanes { faces, .. } if faces.len() == 2);
        pass &= v.status == Status::CompleteHyperbolic && faces_ok;
        let x0 = interior_point(dom.faces().expect("faces"))?;
        let mut lens = Vec::new();
        for d in &dirs {
            lens.push(ray_length_lower(dom, &x0, d, &Toolbox::default(), 40)?);
        }
        pass &= lens.iter().all(|&l| l >= 10.0);
        notes.push(format!("{name} {:?}, ray lower lengths {lens:.2?}", v.status));
    }
    Ok((pass, notes.join("; ")))
}

fn localization(seed: u64) -> Result<(bool, String)> {
    let dom = unit_ball();
    let p = basis(3, 0);
    let r0 = 0.5;
    let peak = Expr::parse("x1 - 1", 3)?;
    let pts = closure_samples(&dom, &origin(), 20_000)?;
    let (c, _) = localization_constant(&peak, &p, r0, 1.0, &Epsilon0::Sampled(&pts))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10c);
    let mut cases = Vec::new();
    while cases.len() < 50 {
        let d = (2e-3f64).ln() + rng.random::<f64>() * (25f64).ln();
        let mut q = random_unit(&mut rng);
        if q[0] > -0.3 {
            q[0] = -q[0].abs() - 0.3;
            q /= q.norm();
        }
        let x = &p + q * d.exp();
        if dom.contains(&x, 1e-3)? {
            cases.push((x, random_unit(&mut rng)));
        }
    }
    let cfg = SolverConfig { multistarts: 4, margin: 1e-4, seed, ..SolverConfig::default() };
    let rows = cases
        .par_iter()
        .map(|(x, v)| {
            let disc = maximize_g(&dom, x, v, &cfg)?.witness;
            let f0 = disc.evaluate(Complex64::new(0.0, 0.0));
            let dist = (&f0 - &p).norm();
            let rho = 1.0 - c * dist;
            let mut worst = 0.0f64;
            if rho > 0.0 {
                for i in 1..=32 {
                    for j in 0..128 {
                        let z = Complex64::from_polar(rho * i as f64 / 32.0, 2.0 * PI * j as f64 / 128.0);
                        worst = worst.max((disc.evaluate(z) - &p).norm());
                    }
                }
            }
            Ok((dist <= 0.05, rho > 0.0, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let near = rows.iter().all(|r| r.0);
    let active = rows.iter().filter(|r| r.1).count();
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok((
        near && worst <= r0,
        format!("c = {c:.2}; {active} of 50 discs with a nontrivial radius; max |f(z) - p| {worst:.4}"),
    ))
}

fn monotonicity(seed: u64) -> Result<(bool, String)> {
    let b1 = unit_ball();
    let b2 = DomainSpec::ball(origin(), 2.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x12);
    let mut pass = true;
    let mut min_gap = f64::INFINITY;
    for _ in 0..20 {
        let x = random_in_ball(&mut rng, 0.95);
        let u = random_unit(&mut rng) * rng.random_range(0.1..2.0);
        let e1 = bck_metric(&x, &u)?;
        let e2 = bck_ball_metric(&origin(), 2.0, &x, &u)?;
        let l1 = best_lower(&b1, &x, &u, &Toolbox::default())?.value;
        let l2 = best_lower(&b2, &x, &u, &Toolbox::default())?.value;
        // the bigger ball as a circumscribed ball of the smaller one
        let c21 = circumscribed_ball_bound(&b1, &origin(), 2.0, &x, &u)?.value;
        pass &= e2 < e1 && l2 <= e1 && l2 <= l1 + 1e-12 && c21 <= e1 + 1e-12;
        min_gap = min_gap.min(e1 - e2);
    }
    Ok((pass, format!("min exact gap g_B1 - g_B2 {min_gap:.4e}")))
}

fn distance_decreasing(seed: u64) -> Result<(bool, String)> {
    let ball = unit_ball();
    let half = DomainSpec::halfspace(basis(3, 0), 0.0)?;
    let octant = DomainSpec::polyhedral((0..3).map(|i| HalfSpace::new(basis(3, i), 0.0)).collect::<Result<_>>()?)?;
    let prism = DomainSpec::polyhedral(
        (0..6)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 6.0;
                HalfSpace::new(-point(&[a.cos(), a.sin(), 0.0]), -1.0)
            })
            .collect::<Result<_>>()?,
    )?;
    let runs = vec![
        (&ball, origin(), basis(3, 0)),
        (&ball, point(&[0.5, 0.0, 0.0]), basis(3, 1)),
        (&ball, point(&[0.2, -0.3, 0.4]), point(&[1.0, 1.0, 0.0])),
        (&half, point(&[1.0, 0.0, 0.0]), basis(3, 0)),
        (&half, point(&[0.5, 2.0, 0.0]), point(&[1.0, 0.0, 1.0])),
        (&octant, point(&[1.0, 1.0, 1.0]), point(&[1.0, -1.0, 0.0])),
        (&prism, origin(), basis(3, 0)),
        (&prism, point(&[0.3, 0.1, 0.0]), point(&[0.2, 0.1, 1.0])),
    ];
    let cfg = SolverConfig { multistarts: 8, seed, ..SolverConfig::default() };
    let discs = runs
        .par_iter()
        .map(|(dom, x, v)| maximize_g(dom, x, v, &cfg).map(|r| r.witness))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x13);
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for ((dom, _, _), disc) in runs.iter().zip(&discs) {
        for _ in 0..10 {
            let z = Complex64::from_polar(0.95 * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
            let xi = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (fx, fy) = disc.derivative(z);
            let push = fx * xi.re + fy * xi.im;
            let at = disc.evaluate(z);
            let lower = best_lower(dom, &at, &push, &Toolbox::default())?.value;
            let poincare = xi.norm() / (1.0 - z.norm_sqr());
            worst = worst.max(lower - poincare);
            count += 1;
        }
    }
    Ok((worst <= 1e-6, format!("{count} samples over {} witnesses, max(lower - Poincare) {worst:.3e}", discs.len())))
}
