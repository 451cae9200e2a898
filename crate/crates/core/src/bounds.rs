//! Certified lower bounds for `g_Ω` and `M_Ω`.
//!
//! Every bound is sound conditional on the hypotheses listed in its
//! certificate. MPSH hypotheses are checked on samples, not proved.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use serde_json::json;

use crate::domain::{DomainSpec, HalfSpace};
use crate::error::{Error, Result};
use crate::expr::{Dual2, Expr};
use crate::geometry::{check_dim, kronecker_point, orthogonal_complement, singular_values, Direction, Point, TwoPlane};
use crate::models::bck_ball_metric;

/// Tolerance for "λ1 + λ2 ≥ 0", relative to the Hessian scale.
pub const MPSH_TOL: f64 = 1e-9;

/// `b1ᵀHb1 + b2ᵀHb2`, the Laplacian of the restriction to the plane.
pub fn trace_plane_hessian(h: &DMatrix<f64>, plane: &TwoPlane) -> f64 {
    let (a, b) = (plane.b1(), plane.b2());
    (h * a).dot(a) + (h * b).dot(b)
}

/// Sum of the two smallest eigenvalues, i.e. the minimum of
/// [`trace_plane_hessian`] over all 2-planes.
pub fn smallest_pair_sum(h: &DMatrix<f64>) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(h.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev[0] + ev[1]
}

/// Where hypotheses are sampled.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Tensor grid with `grid` nodes per axis.
    Box {
        bbox: Vec<(f64, f64)>,
        grid: usize,
    },
    /// `inner ≤ |y − center| ≤ outer`, quasi-random.
    Shell {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
        samples: usize,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
}

impl Region {
    pub fn samples(&self) -> Vec<Point> {
        match self {
            Region::Box { bbox, grid } => {
                let n = bbox.len();
                let g = (*grid).max(2);
                let total = g.pow(n as u32);
                (0..total)
                    .map(|mut k| {
                        Point::from_fn(n, |i, _| {
                            let j = k % g;
                            k /= g;
                            let (lo, hi) = bbox[i];
                            lo + (hi - lo) * j as f64 / (g - 1) as f64
                        })
                    })
                    .collect()
            }
            Region::Shell { center, inner, outer, samples } => {
                let n = center.len();
                let c = Point::from_column_slice(center);
                let mut out = Vec::with_capacity(*samples);
                let mut k = 0;
                while out.len() < *samples && k < 1000 * samples.max(&1) {
                    let q = kronecker_point(k, n);
                    k += 1;
                    let y = Point::from_fn(n, |i, _| (2.0 * q[i] - 1.0) * outer);
                    let d = y.norm();
                    if d >= *inner && d <= *outer {
                        out.push(&c + y);
                    }
                }
                out
            }
            Region::Points { points } => points.iter().map(|p| Point::from_column_slice(p)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpshCertificate {
    pub field: String,
    pub region: Region,
    /// Sample minimum of `λ1 + λ2` minus `slack`.
    pub c: f64,
    pub slack: f64,
    pub samples: usize,
    pub argmin: Vec<f64>,
    pub mpsh: bool,
    pub strong: bool,
}

/// Samples `λ1 + λ2` of `Hess u` over the region. With `strong`, a
/// nonpositive minimum is an error.
pub fn mpsh_check(u: &Expr, region: &Region, strong: bool, slack: f64) -> Result<MpshCertificate> {
    let pts = region.samples();
    if pts.is_empty() {
        return Err(Error::InvalidInput("region has no samples".into()));
    }
    let mut c = f64::INFINITY;
    let mut argmin = pts[0].clone();
    for p in &pts {
        let j = u.eval_jet2(p)?;
        let s = smallest_pair_sum(&j.hessian);
        if s < c {
            c = s;
            argmin = p.clone();
        }
    }
    let c = c - slack;
    let cert = MpshCertificate {
        field: u.to_string(),
        region: region.clone(),
        c,
        slack,
        samples: pts.len(),
        argmin: argmin.iter().copied().collect(),
        mpsh: c >= -MPSH_TOL,
        strong: c > 0.0,
    };
    if strong && !cert.strong {
        return Err(Error::HypothesisFailed(format!("not strongly MPSH: sampled minimum {c:.3e}")));
    }
    Ok(cert)
}

/// Sibony-type lower bound `½·sqrt(tr_Λ Hess u(x))` for `M_Ω(x, Λ)`.
///
/// `region` must sample Ω. Checks `u(x) = 0`, `0 ≤ u ≤ 1`, `u` MPSH and
/// `log u` MPSH away from `{u ≤ 1e-6}`.
pub fn sibony_value(u: &Expr, region: &Region, x: &Point, plane: &TwoPlane) -> Result<f64> {
    check_dim(x, u.dim())?;
    check_dim(plane.b1(), u.dim())?;
    let jx = u.eval_jet2(x)?;
    if jx.value.abs() > 1e-12 {
        return Err(Error::CandidateInvalid(format!("u(x) = {:e}, expected 0", jx.value)));
    }
    for p in region.samples() {
        let j = u.eval_jet2(&p)?;
        if !(j.value >= -1e-12 && j.value <= 1.0 + 1e-12) {
            return Err(Error::CandidateInvalid(format!("u = {} outside [0, 1] at {:?}", j.value, p.as_slice())));
        }
        let s = smallest_pair_sum(&j.hessian);
        if s < -MPSH_TOL * j.hessian.amax().max(1.0) {
            return Err(Error::CandidateInvalid(format!("u is not MPSH at {:?}", p.as_slice())));
        }
        if j.value > 1e-6 {
            // Hess log u = H/u − ∇u∇uᵀ/u²
            let g = &j.gradient;
            let hl = &j.hessian / j.value - g * g.transpose() / (j.value * j.value);
            if smallest_pair_sum(&hl) < -MPSH_TOL * hl.amax().max(1.0) {
                return Err(Error::CandidateInvalid(format!("log u is not MPSH at {:?}", p.as_slice())));
            }
        }
    }
    let tr = trace_plane_hessian(&jx.hessian, plane);
    Ok(0.5 * tr.max(0.0).sqrt())
}

/// Cutoff `θ`: `t` on `[0, ½]`, a quintic Hermite blend on `[½, 1]`, `1`
/// beyond. `A` bounds `−(log θ)″` on `[½, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaBump {
    pub a: f64,
}

impl ThetaBump {
    /// `(θ, θ′, θ″)` at `t ≥ 0`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t <= 0.5 {
            (t, 1.0, 0.0)
        } else if t >= 1.0 {
            (1.0, 0.0, 0.0)
        } else {
            // s = 2t − 1, θ = ½ + q(s)/2, q = s + 4s³ − 7s⁴ + 3s⁵
            let s = 2.0 * t - 1.0;
            let q = s + 4.0 * s.powi(3) - 7.0 * s.powi(4) + 3.0 * s.powi(5);
            let q1 = 1.0 + 12.0 * s * s - 28.0 * s.powi(3) + 15.0 * s.powi(4);
            let q2 = 24.0 * s - 84.0 * s * s + 60.0 * s.powi(3);
            (0.5 + 0.5 * q, q1, 2.0 * q2)
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// `(log θ)″(t)` for `t > 0`.
    pub fn log_second(&self, t: f64) -> f64 {
        let (v, d1, d2) = self.eval(t);
        d2 / v - (d1 / v).powi(2)
    }

    /// `tr_Λ Hess h(x)` for `h = log θ(β|x|²)`.
    pub fn log_hessian_trace(&self, beta: f64, x: &Point, plane: &TwoPlane) -> f64 {
        let n = x.len();
        let mut s = Dual2::constant(n, 0.0);
        for i in 0..n {
            let xi = Dual2::variable(n, i, x[i]);
            s = s.add(&xi.mul(&xi));
        }
        let t = s.scale(beta);
        let (v, d1, d2) = self.eval(t.v);
        let h = t.compose(v.ln(), d1 / v, d2 / v - (d1 / v).powi(2));
        trace_plane_hessian(&h.to_jet().hessian, plane)
    }
}

/// Builds `θ` and computes `A` on a grid of `grid` points in `[½, 1]`
/// (5% slack), checking monotonicity.
pub fn make_theta_with(grid: usize) -> Result<ThetaBump> {
    let probe = ThetaBump { a: 0.0 };
    let mut worst = 0.0f64;
    let mut prev = probe.theta(0.5);
    for k in 0..=grid {
        let t = 0.5 + 0.5 * k as f64 / grid as f64;
        let v = probe.theta(t);
        if v < prev - 1e-15 || probe.eval(t).1 < -1e-12 {
            return Err(Error::ConstructionFailed(format!("θ is not monotone near t = {t}")));
        }
        prev = v;
        worst = worst.max(-probe.log_second(t));
    }
    if !(worst.is_finite() && worst > 0.0) {
        return Err(Error::ConstructionFailed("A is not positive".into()));
    }
    Ok(ThetaBump { a: 1.05 * worst })
}

pub fn make_theta() -> Result<ThetaBump> {
    make_theta_with(10_000)
}

/// Process-wide `θ` and `A`.
pub fn theta() -> ThetaBump {
    static CELL: OnceLock<ThetaBump> = OnceLock::new();
    *CELL.get_or_init(|| make_theta().expect("theta construction"))
}

/// `Ψ(y) = θ(|y − x|²/r²)·exp(λ u(y))` as a second-order jet at `y`.
pub fn psi_jet(u: &Expr, x: &Point, r: f64, lambda: f64, y: &Point) -> Result<Dual2> {
    let n = y.len();
    check_dim(x, n)?;
    let mut s = Dual2::constant(n, 0.0);
    for i in 0..n {
        let d = Dual2::variable(n, i, y[i]).add_const(-x[i]);
        s = s.add(&d.mul(&d));
    }
    let s = s.scale(1.0 / (r * r));
    let (v, d1, d2) = theta().eval(s.v);
    let th = s.compose(v, d1, d2);
    let uy = u.eval_dual(y)?;
    Ok(th.mul(&uy.scale(lambda).exp()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Halfspace,
    Convex,
    Psi,
    GlobalMpsh,
    Smc,
    CircumscribedBall,
    Localization,
    Axial,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundCert {
    pub value: f64,
    pub kind: BoundKind,
    pub hypotheses: Vec<String>,
    pub inputs: serde_json::Value,
}

impl LowerBoundCert {
    fn new(value: f64, kind: BoundKind, hypotheses: Vec<String>, inputs: serde_json::Value) -> Self {
        Self { value, kind, hypotheses, inputs }
    }
}

fn slice(p: &Point) -> Vec<f64> {
    p.iter().copied().collect()
}

/// `g_Ω(x, v) ≥ (1/r)·exp(2A u(x)/(c r²))·|v|` for `x ∈ B(p, r)`, given
/// `tr_Λ Hess u ≥ c` on `B(p, 2r) ∩ Ω` and `u < 0` on Ω.
pub fn psi_lower_bound(
    u: &Expr,
    cert: &MpshCertificate,
    p: &Point,
    r: f64,
    x: &Point,
    v: &Direction,
) -> Result<LowerBoundCert> {
    check_dim(x, u.dim())?;
    check_dim(v, u.dim())?;
    if !(cert.c > 0.0) {
        return Err(Error::HypothesisFailed(format!("certificate constant c = {} is not positive", cert.c)));
    }
    if !(r > 0.0) || (x - p).norm() >= r {
        return Err(Error::HypothesisFailed("x must lie in B(p, r) with r > 0".into()));
    }
    let ux = u.eval(x)?;
    if !(ux < 0.0) {
        return Err(Error::HypothesisFailed(format!("u(x) = {ux} is not negative")));
    }
    let a = theta().a;
    let value = (2.0 * a * ux / (cert.c * r * r)).exp() / r * v.norm();
    Ok(LowerBoundCert::new(
        value,
        BoundKind::Psi,
        vec![format!("tr Hess u >= {} on B(p, 2r) (sampled)", cert.c), "u < 0 and MPSH on the domain".into()],
        json!({ "u": u.to_string(), "p": slice(p), "r": r, "x": slice(x), "A": a, "c": cert.c }),
    ))
}

/// `g_Ω(x, v) ≥ sqrt(c/(4Ae))·|v|/sqrt(|u(x)|)` for negative `u` with
/// `tr_Λ Hess u ≥ c` on all of Ω.
pub fn global_mpsh_bound(u: &Expr, cert: &MpshCertificate, x: &Point, v: &Direction) -> Result<LowerBoundCert> {
    check_dim(x, u.dim())?;
    check_dim(v, u.dim())?;
    if !(cert.c > 0.0) {
        return Err(Error::HypothesisFailed(format!("certificate constant c = {} is not positive", cert.c)));
    }
    let ux = u.eval(x)?;
    if !(ux < 0.0) {
        return Err(Error::HypothesisFailed(format!("u(x) = {ux} is not negative")));
    }
    let a = theta().a;
    let value = (cert.c / (4.0 * a * std::f64::consts::E)).sqrt() * v.norm() / (-ux).sqrt();
    Ok(LowerBoundCert::new(
        value,
        BoundKind::GlobalMpsh,
        vec![format!("tr Hess u >= {} on the domain (sampled)", cert.c), "u < 0 on the domain".into()],
        json!({ "u": u.to_string(), "x": slice(x), "A": a, "c": cert.c }),
    ))
}

/// Sampled sup of `|u|/dist(·, bΩ)` over points of a sublevel domain,
/// with 5% slack.
pub fn comparability_k2(dom: &DomainSpec, samples: usize) -> Result<f64> {
    let DomainSpec::Sublevel(s) = dom else {
        return Err(Error::InvalidInput("comparability constant needs a sublevel domain".into()));
    };
    let n = dom.dim();
    let mut k2 = 0.0f64;
    let mut hits = 0;
    for k in 0..samples * 20 {
        if hits >= samples {
            break;
        }
        let q = kronecker_point(k, n);
        let p = Point::from_fn(n, |i, _| {
            let (lo, hi) = s.bbox()[i];
            lo + (hi - lo) * q[i]
        });
        if !dom.contains(&p, 0.0).unwrap_or(false) {
            continue;
        }
        hits += 1;
        let d = dom.boundary_distance(&p)?;
        let u = s.expr().eval(&p)?;
        if d > 0.0 {
            k2 = k2.max(u.abs() / d);
        }
    }
    if hits == 0 {
        return Err(Error::EmptyDomain);
    }
    Ok(1.05 * k2)
}

/// `g_Ω(x, v) ≥ sqrt(c/(4Ae·k2))·|v|/sqrt(dist(x, bΩ))` for a sublevel
/// domain whose defining function satisfies `tr_Λ Hess u ≥ c`. Never
/// exceeds the global MPSH bound, so an underestimated `k2` stays sound.
pub fn smc_bound(
    dom: &DomainSpec,
    cert: &MpshCertificate,
    k2: f64,
    x: &Point,
    v: &Direction,
) -> Result<LowerBoundCert> {
    let DomainSpec::Sublevel(s) = dom else {
        return Err(Error::InvalidInput("smc_bound needs a sublevel domain".into()));
    };
    let global = global_mpsh_bound(s.expr(), cert, x, v)?;
    if !(k2 > 0.0) {
        return Err(Error::HypothesisFailed("comparability constant must be positive".into()));
    }
    let a = theta().a;
    let cc = (cert.c / (4.0 * a * std::f64::consts::E * k2)).sqrt();
    let d = dom.boundary_distance(x)?;
    let value = (cc * v.norm() / d.sqrt()).min(global.value);
    Ok(LowerBoundCert::new(
        value,
        BoundKind::Smc,
        vec![format!("tr Hess u >= {} on the domain (sampled)", cert.c), format!("|u| <= {k2} dist (sampled)")],
        json!({ "u": s.source(), "x": slice(x), "A": a, "c": cert.c, "k2": k2, "C": cc, "dist": d }),
    ))
}

/// `|v·n| / (2·clearance)`.
pub fn halfspace_bound(h: &HalfSpace, x: &Point, v: &Direction) -> Result<LowerBoundCert> {
    check_dim(x, h.normal().len())?;
    check_dim(v, h.normal().len())?;
    let d = h.clearance(x);
    if !(d > 0.0) {
        return Err(Error::PointOutside);
    }
    let value = v.dot(h.normal()).abs() / (2.0 * d);
    Ok(LowerBoundCert::new(
        value,
        BoundKind::Halfspace,
        vec![],
        json!({ "normal": slice(h.normal()), "offset": h.offset(), "x": slice(x) }),
    ))
}

/// Maximum of the half-space bounds over the faces.
pub fn convex_bound(dom: &DomainSpec, x: &Point, v: &Direction) -> Result<LowerBoundCert> {
    let faces = dom
        .faces()
        .ok_or_else(|| Error::InvalidInput("convex_bound needs a half-space or polyhedral domain".into()))?;
    let mut best: Option<(usize, LowerBoundCert)> = None;
    for (i, f) in faces.iter().enumerate() {
        let c = halfspace_bound(f, x, v)?;
        if best.as_ref().is_none_or(|b| c.value > b.1.value) {
            best = Some((i, c));
        }
    }
    let (i, c) = best.expect("at least one face");
    Ok(LowerBoundCert::new(c.value, BoundKind::Convex, vec![], json!({ "face": i, "x": slice(x) })))
}

/// Greedily picks up to `k` linearly independent normals.
pub(crate) fn independent_faces(faces: &[HalfSpace], k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for (i, f) in faces.iter().enumerate() {
        if chosen.len() == k {
            break;
        }
        let mut rows: Vec<Direction> = chosen.iter().map(|&j| faces[j].normal().clone()).collect();
        rows.push(f.normal().clone());
        let s = singular_values(&rows);
        if s.last().copied().unwrap_or(0.0) > 1e-8 * s[0] {
            chosen.push(i);
        }
    }
    chosen
}

/// `g_Ω(x, v) ≥ |v·a|/(4 c1 c3)` where `a` is the axis orthogonal to
/// `n − 1` independent face normals `y_i`, `clearance_i(x) ≤ c1`, and
/// `c3 = sqrt(n−1)/σ_min(Y)` so that `|w'| ≤ c3·max_i |w·y_i|`.
pub fn axial_bound(dom: &DomainSpec, c1: f64, x: &Point, v: &Direction) -> Result<LowerBoundCert> {
    let faces = dom.faces().ok_or_else(|| Error::InvalidInput("axial_bound needs a polyhedral domain".into()))?;
    let n = dom.dim();
    check_dim(x, n)?;
    check_dim(v, n)?;
    let chosen = independent_faces(faces, n - 1);
    if chosen.len() < n - 1 {
        return Err(Error::RankDeficient { rank: chosen.len(), needed: n - 1 });
    }
    let rows: Vec<Direction> = chosen.iter().map(|&i| faces[i].normal().clone()).collect();
    for &i in &chosen {
        let d = faces[i].clearance(x);
        if !(d > 0.0) {
            return Err(Error::PointOutside);
        }
        if d > c1 {
            return Err(Error::HypothesisFailed(format!("clearance {d} to face {i} exceeds c1 = {c1}")));
        }
    }
    let axis = orthogonal_complement(&rows, n, 1e-10);
    let axis = axis.first().ok_or(Error::RankDeficient { rank: n, needed: n - 1 })?;
    let smin = *singular_values(&rows).last().expect("nonempty");
    let c3 = ((n - 1) as f64).sqrt() / smin;
    let c2 = 1.0 / (4.0 * c1 * c3);
    Ok(LowerBoundCert::new(
        c2 * v.dot(axis).abs(),
        BoundKind::Axial,
        vec![format!("clearance to faces {chosen:?} at most {c1}")],
        json!({ "faces": chosen, "axis": slice(axis), "c1": c1, "c3": c3, "c2": c2 }),
    ))
}

/// Checks `dom ⊂ B(center, radius)` (exactly for balls, by sampling
/// otherwise) and returns the BCK metric of the ball.
pub fn circumscribed_ball_bound(
    dom: &DomainSpec,
    center: &Point,
    radius: f64,
    x: &Point,
    v: &Direction,
) -> Result<LowerBoundCert> {
    let n = dom.dim();
    check_dim(center, n)?;
    check_dim(x, n)?;
    check_dim(v, n)?;
    if !dom.contains(x, 0.0)? {
        return Err(Error::PointOutside);
    }
    let outside = |p: &Point| (p - center).norm() > radius * (1.0 + 1e-12);
    let mut checked = "exact";
    match dom {
        DomainSpec::Ball { center: c, radius: r } => {
            if (c - center).norm() + r > radius * (1.0 + 1e-12) {
                return Err(Error::NotContained(format!("ball of radius {r} is not inside")));
            }
        }
        DomainSpec::Sublevel(s) => {
            checked = "sampled";
            let mut hits = 0;
            for k in 0..200_000 {
                if hits >= 10_000 {
                    break;
                }
                let q = kronecker_point(k, n);
                let p = Point::from_fn(n, |i, _| {
                    let (lo, hi) = s.bbox()[i];
                    lo + (hi - lo) * q[i]
                });
                if dom.contains(&p, 0.0).unwrap_or(false) {
                    hits += 1;
                    if outside(&p) {
                        return Err(Error::NotContained(format!("sample {:?}", p.as_slice())));
                    }
                }
            }
        }
        DomainSpec::HalfSpace(_) | DomainSpec::Polyhedral(_) => {
            // convex: boundary points seen from x
            checked = "sampled";
            for k in 0..10_000 {
                let q = kronecker_point(k, n);
                let d = Direction::from_fn(n, |i, _| 2.0 * q[i] - 1.0);
                if d.norm() < 1e-3 {
                    continue;
                }
                let d = d.normalize();
                let t = dom.exit_time(x, &d, 0.0);
                if !t.is_finite() || outside(&(x + d * t)) {
                    return Err(Error::NotContained("unbounded or escaping ray".into()));
                }
            }
        }
    }
    let value = bck_ball_metric(center, radius, x, v)?;
    Ok(LowerBoundCert::new(
        value,
        BoundKind::CircumscribedBall,
        vec![format!("domain inside B(center, {radius}) ({checked})")],
        json!({ "center": slice(center), "radius": radius, "x": slice(x) }),
    ))
}

/// Quasi-random points of the closure of a domain star-shaped about `x0`:
/// half on the boundary (ray exits), half inside. Unbounded rays are skipped.
pub fn closure_samples(dom: &DomainSpec, x0: &Point, count: usize) -> Result<Vec<Point>> {
    let n = dom.dim();
    check_dim(x0, n)?;
    if !dom.contains(x0, 0.0)? {
        return Err(Error::PointOutside);
    }
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count && k < 20 * count {
        let q = kronecker_point(k, n + 1);
        k += 1;
        let d = Direction::from_fn(n, |i, _| 2.0 * q[i] - 1.0);
        if d.norm() < 1e-3 {
            continue;
        }
        let d = d.normalize();
        let t = dom.exit_time(x0, &d, 0.0);
        if !t.is_finite() {
            continue;
        }
        let s = if out.len() % 2 == 0 { 1.0 } else { q[n].powf(1.0 / n as f64) };
        out.push(x0 + d * (t * s));
    }
    Ok(out)
}

/// How `ε0` is obtained for the localization constant.
pub enum Epsilon0<'a> {
    /// `−sup{peak(y) : y ∈ Ω̄, |y − p| ≥ r0²}` over the given samples of Ω̄,
    /// with 5% slack.
    Sampled(&'a [Point]),
    /// Smallest `ε` with `φ(ε) = r0²` for a continuous increasing `φ`
    /// bounding `|x − p| ≤ φ(|peak(x)|)`.
    Phi(&'a dyn Fn(f64) -> f64),
}

/// Localization constant `c = 4c0/ε0`.
pub fn localization_constant(peak: &Expr, p: &Point, r0: f64, c0: f64, eps: &Epsilon0) -> Result<(f64, f64)> {
    check_dim(p, peak.dim())?;
    if !(r0 > 0.0 && c0 > 0.0) {
        return Err(Error::InvalidInput("r0 and c0 must be positive".into()));
    }
    let pv = peak.eval(p)?;
    if pv.abs() > 1e-12 {
        return Err(Error::HypothesisFailed(format!("peak(p) = {pv}, expected 0")));
    }
    let target = r0 * r0;
    let eps0 = match eps {
        Epsilon0::Sampled(pts) => {
            let mut sup = f64::NEG_INFINITY;
            for y in pts.iter() {
                let v = peak.eval(y)?;
                if v > 1e-12 {
                    return Err(Error::HypothesisFailed(format!("peak > 0 at {:?}", y.as_slice())));
                }
                if (y - p).norm() >= target {
                    sup = sup.max(v);
                }
            }
            if !sup.is_finite() {
                return Err(Error::HypothesisFailed("no samples outside B(p, r0²)".into()));
            }
            -0.95 * sup
        }
        Epsilon0::Phi(phi) => {
            let mut hi = 1.0;
            while phi(hi) < target {
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::HypothesisFailed("φ never reaches r0²".into()));
                }
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if phi(mid) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        }
    };
    if !(eps0 > 0.0) {
        return Err(Error::HypothesisFailed(format!("ε0 = {eps0} is not positive")));
    }
    Ok((4.0 * c0 / eps0, eps0))
}

/// `g_Ω(x, v) ≥ (1 − c|x − p|)₊·g_{Ω∩B(p,r0)}(x, v)` with `inner` a lower
/// bound for the localized domain. A nonpositive factor gives 0.
#[allow(clippy::too_many_arguments)]
pub fn localization_bound(
    peak: &Expr,
    p: &Point,
    r0: f64,
    c0: f64,
    eps: &Epsilon0,
    inner: &dyn Fn(&Point, &Direction) -> Result<f64>,
    x: &Point,
    v: &Direction,
) -> Result<LowerBoundCert> {
    let (c, eps0) = localization_constant(peak, p, r0, c0, eps)?;
    let dist = (x - p).norm();
    if dist >= r0 {
        return Err(Error::HypothesisFailed("x must lie in B(p, r0)".into()));
    }
    let factor = 1.0 - c * dist;
    let inner_value = inner(x, v)?;
    let value = if factor > 0.0 { factor * inner_value } else { 0.0 };
    let mut hyp = vec![
        format!("peak <= 0 and MPSH near p, constant c0 = {c0}"),
        "inner bound valid on the localized domain".into(),
    ];
    if factor <= 0.0 {
        hyp.push("nonpositive factor: bound degenerates to 0".into());
    }
    Ok(LowerBoundCert::new(
        value,
        BoundKind::Localization,
        hyp,
        json!({ "p": slice(p), "r0": r0, "c0": c0, "eps0": eps0, "c": c, "factor": factor, "inner": inner_value }),
    ))
}

/// Optional tools for [`best_lower`] beyond those implied by the domain type.
#[derive(Debug, Clone, Default)]
pub struct Toolbox {
    /// Negative `u` with a certificate valid on all of Ω.
    pub global_mpsh: Option<(Expr, MpshCertificate)>,
    /// Certificate for the sublevel defining function and `k2`.
    pub smc: Option<(MpshCertificate, f64)>,
    pub circumscribed: Option<(Point, f64)>,
    /// `(u, cert, p, r)` for the Ψ bound.
    pub psi: Option<(Expr, MpshCertificate, Point, f64)>,
    pub axial_c1: Option<f64>,
}

/// Maximum over every applicable bound; 0 with kind `none` if nothing applies.
pub fn best_lower(dom: &DomainSpec, x: &Point, v: &Direction, tools: &Toolbox) -> Result<LowerBoundCert> {
    check_dim(x, dom.dim())?;
    check_dim(v, dom.dim())?;
    if !dom.contains(x, 0.0)? {
        return Err(Error::PointOutside);
    }
    let mut cands: Vec<Result<LowerBoundCert>> = Vec::new();
    match dom {
        DomainSpec::Ball { center, radius } => cands.push(circumscribed_ball_bound(dom, center, *radius, x, v)),
        DomainSpec::HalfSpace(_) | DomainSpec::Polyhedral(_) => {
            cands.push(convex_bound(dom, x, v));
            let c1 = tools.axial_c1.unwrap_or_else(|| {
                dom.faces().map(|f| f.iter().map(|h| h.clearance(x)).fold(0.0, f64::max)).unwrap_or(0.0)
            });
            cands.push(axial_bound(dom, c1, x, v));
        }
        DomainSpec::Sublevel(_) => {}
    }
    if let Some((u, cert)) = &tools.global_mpsh {
        cands.push(global_mpsh_bound(u, cert, x, v));
    }
    if let Some((cert, k2)) = &tools.smc {
        cands.push(smc_bound(dom, cert, *k2, x, v));
    }
    if let Some((c, r)) = &tools.circumscribed {
        cands.push(circumscribed_ball_bound(dom, c, *r, x, v));
    }
    if let Some((u, cert, p, r)) = &tools.psi {
        cands.push(psi_lower_bound(u, cert, p, *r, x, v));
    }
    let best =
        cands.into_iter().flatten().filter(|c| c.value.is_finite()).fold(None::<LowerBoundCert>, |acc, c| match acc {
            Some(a) if a.value >= c.value => Some(a),
            _ => Some(c),
        });
    Ok(best.unwrap_or_else(|| LowerBoundCert::new(0.0, BoundKind::None, vec![], json!({ "x": slice(x) }))))
}
