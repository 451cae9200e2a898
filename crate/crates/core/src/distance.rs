//! Estimates of the minimal pseudodistance: path integrals of metric
//! bounds, chains of discs, and a local geodesic search.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{best_lower, Toolbox};
use crate::disc::{DiscJson, NullDisc};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::extremal::{maximize_g, SolverConfig};
use crate::geometry::{check_dim, orthogonal_complement, ConformalFrame, Direction, Point, Polyline};
use crate::models::ball_distance;
use crate::quad::composite_simpson;

/// Quadrature nodes `(point, unit tangent)` and segment lengths, with node
/// counts per segment proportional to length (odd, at least 3).
fn quadrature(path: &Polyline, nodes: usize) -> Vec<(Vec<(Point, Direction)>, f64)> {
    let total = path.euclidean_length();
    let mut out = Vec::new();
    if total == 0.0 {
        return out;
    }
    for w in path.vertices().windows(2) {
        let d = &w[1] - &w[0];
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let mut m = ((nodes as f64 * len / total).round() as usize).max(3);
        if m.is_multiple_of(2) {
            m += 1;
        }
        let dir = &d / len;
        let pts = (0..m).map(|k| (&w[0] + &d * (k as f64 / (m - 1) as f64), dir.clone())).collect();
        out.push((pts, len));
    }
    out
}

fn integrate(path: &Polyline, nodes: usize, f: &(dyn Fn(&Point, &Direction) -> Result<f64> + Sync)) -> Result<f64> {
    let mut sum = 0.0;
    for (pts, len) in quadrature(path, nodes) {
        let vals: Vec<f64> = pts.par_iter().map(|(p, d)| f(p, d)).collect::<Result<_>>()?;
        sum += composite_simpson(&vals, len);
    }
    Ok(sum)
}

fn check_path(dom: &DomainSpec, path: &Polyline) -> Result<()> {
    for p in path.vertices() {
        check_dim(p, dom.dim())?;
    }
    for (pts, _) in quadrature(path, 65) {
        for (p, _) in pts {
            if !dom.contains(&p, 0.0)? {
                return Err(Error::PointOutside);
            }
        }
    }
    Ok(())
}

/// Simpson integral of solver upper bounds for `g_Ω` along the path.
pub fn path_length_upper(dom: &DomainSpec, path: &Polyline, cfg: &SolverConfig, nodes: usize) -> Result<f64> {
    check_path(dom, path)?;
    integrate(path, nodes, &|p, d| Ok(maximize_g(dom, p, d, cfg)?.bound))
}

/// Simpson integral of [`best_lower`] along the path.
pub fn path_length_lower(dom: &DomainSpec, path: &Polyline, tools: &Toolbox, nodes: usize) -> Result<f64> {
    check_path(dom, path)?;
    integrate(path, nodes, &|p, d| Ok(best_lower(dom, p, d, tools)?.value))
}

/// Lower length of the ray `x0 + t·d`: to the boundary if the ray exits
/// (vertices `T(1 − 2^{-k})`), otherwise to infinity (vertices `2^k − 1`),
/// summing [`path_length_lower`] over `pieces` geometric pieces.
pub fn ray_length_lower(dom: &DomainSpec, x0: &Point, d: &Direction, tools: &Toolbox, pieces: usize) -> Result<f64> {
    check_dim(d, dom.dim())?;
    let len = d.norm();
    if len == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let d = d / len;
    let exit = dom.exit_time(x0, &d, 0.0);
    let t = |k: usize| {
        if exit.is_finite() {
            exit * (1.0 - 0.5f64.powi(k as i32))
        } else {
            2f64.powi(k as i32) - 1.0
        }
    };
    let segs: Vec<(Point, Point)> = (0..pieces).map(|k| (x0 + &d * t(k), x0 + &d * t(k + 1))).collect();
    let parts = segs
        .par_iter()
        .map(|(a, b)| path_length_lower(dom, &Polyline::segment(a, b, 1)?, tools, 65))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.iter().sum())
}

/// One link: the disc `g` passes from `g(from)` to `g(to)`. Recentring by
/// the disc automorphism sending 0 to `from` gives a disc `f` with
/// `f(0) = g(from)` and `f(a) = g(to)` for real `a ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLink {
    pub disc: NullDisc,
    pub from: Complex64,
    pub to: Complex64,
}

fn link_a(from: Complex64, to: Complex64) -> f64 {
    ((to - from) / (Complex64::new(1.0, 0.0) - from.conj() * to)).norm()
}

fn link_length(from: Complex64, to: Complex64) -> f64 {
    link_a(from, to).atanh()
}

impl ChainLink {
    pub fn a(&self) -> f64 {
        link_a(self.from, self.to)
    }

    /// `½·log((1 + a)/(1 − a))`.
    pub fn length(&self) -> f64 {
        self.a().atanh()
    }

    pub fn start(&self) -> Point {
        self.disc.evaluate(self.from)
    }

    pub fn end(&self) -> Point {
        self.disc.evaluate(self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainEstimate {
    pub links: Vec<ChainLink>,
    pub total: f64,
}

#[derive(Serialize)]
struct LinkJson {
    disc: DiscJson,
    from: [f64; 2],
    to: [f64; 2],
    a: f64,
}

#[derive(Serialize)]
pub struct ChainJson {
    links: Vec<LinkJson>,
    total: f64,
}

impl ChainEstimate {
    fn from_links(links: Vec<ChainLink>) -> Self {
        let total = links.iter().map(ChainLink::length).sum();
        Self { links, total }
    }

    pub fn concat(&self, other: &ChainEstimate) -> Self {
        let mut links = self.links.clone();
        links.extend(other.links.iter().cloned());
        Self::from_links(links)
    }

    pub fn to_json(&self) -> ChainJson {
        ChainJson {
            links: self
                .links
                .iter()
                .map(|l| LinkJson {
                    disc: DiscJson::from(&l.disc),
                    from: [l.from.re, l.from.im],
                    to: [l.to.re, l.to.im],
                    a: l.a(),
                })
                .collect(),
            total: self.total,
        }
    }

    /// Checks endpoints, continuity (1e-8) and containment of every link.
    pub fn validate(&self, dom: &DomainSpec, x: &Point, y: &Point) -> Result<()> {
        let bad = |m: &str| Err(Error::ChainFailed(m.into()));
        if self.links.is_empty() {
            return if (x - y).norm() <= 1e-8 { Ok(()) } else { bad("empty chain between distinct points") };
        }
        if (self.links[0].start() - x).norm() > 1e-8 {
            return bad("chain does not start at x");
        }
        if (self.links.last().unwrap().end() - y).norm() > 1e-8 {
            return bad("chain does not end at y");
        }
        for w in self.links.windows(2) {
            if (w[0].end() - w[1].start()).norm() > 1e-8 {
                return bad("consecutive links do not meet");
            }
        }
        for l in &self.links {
            if !(l.from.norm() < 1.0 && l.to.norm() < 1.0) {
                return bad("link parameter outside the disc");
            }
            if !l.disc.contained(dom, 16, 256, 0.0)? {
                return bad("link disc leaves the domain");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainConfig {
    pub margin: f64,
    /// Rays used to size affine discs.
    pub angles: usize,
    pub max_pieces: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { margin: 1e-3, angles: 64, max_pieces: 4096 }
    }
}

/// Candidate second frame vectors orthogonal to `u`.
fn perp_candidates(u: &Direction) -> Vec<Direction> {
    let basis = orthogonal_complement(std::slice::from_ref(u), u.len(), 1e-12);
    if basis.len() == 2 {
        return (0..8)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 8.0;
                &basis[0] * t.cos() + &basis[1] * t.sin()
            })
            .collect();
    }
    let mut out = basis.clone();
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            out.push((&basis[i] + &basis[j]).normalize());
            out.push((&basis[i] - &basis[j]).normalize());
        }
    }
    out
}

/// Largest affine disc radius at `c` in the plane `(u, v)`, by ray exits.
fn affine_radius(dom: &DomainSpec, c: &Point, u: &Direction, v: &Direction, cfg: &ChainConfig) -> f64 {
    let mut r = f64::INFINITY;
    for k in 0..cfg.angles {
        let t = std::f64::consts::TAU * k as f64 / cfg.angles as f64;
        r = r.min(dom.exit_time(c, &(u * t.cos() + v * t.sin()), cfg.margin));
    }
    r * (1.0 - 1e-9)
}

fn preimage(c: &Point, u: &Direction, v: &Direction, r: f64, p: &Point) -> Complex64 {
    let d = p - c;
    Complex64::new(d.dot(u), d.dot(v)) / r
}

/// Best single affine disc joining `p` to `q`.
fn best_link(dom: &DomainSpec, p: &Point, q: &Point, cfg: &ChainConfig) -> Result<Option<ChainLink>> {
    let pq = q - p;
    let len = pq.norm();
    let u = &pq / len;
    let mut best: Option<(f64, Point, Direction, f64)> = None;
    for v in perp_candidates(&u) {
        let eval = |s: f64, t: f64| -> (f64, Point, f64) {
            let c = p + &pq * s + &v * (t * len);
            if !dom.contains(&c, cfg.margin).unwrap_or(false) {
                return (f64::INFINITY, c, 0.0);
            }
            let r = affine_radius(dom, &c, &u, &v, cfg);
            if !r.is_finite() {
                return (f64::INFINITY, c, 0.0);
            }
            let (b1, b2) = (preimage(&c, &u, &v, r, p), preimage(&c, &u, &v, r, q));
            if b1.norm() >= 1.0 || b2.norm() >= 1.0 {
                return (f64::INFINITY, c, r);
            }
            (link_length(b1, b2), c, r)
        };
        let mut st = (0.5, 0.0);
        let mut fbest = f64::INFINITY;
        for s in [-0.5, 0.0, 0.5, 1.0, 1.5] {
            for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let f = eval(s, t).0;
                if f < fbest {
                    fbest = f;
                    st = (s, t);
                }
            }
        }
        if !fbest.is_finite() {
            continue;
        }
        let mut step = 0.25;
        while step > 1e-4 {
            let mut moved = false;
            for (ds, dt) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                let cand = (st.0 + ds, st.1 + dt);
                if cand.0.abs() > 50.0 || cand.1.abs() > 50.0 {
                    continue;
                }
                let f = eval(cand.0, cand.1).0;
                if f < fbest {
                    fbest = f;
                    st = cand;
                    moved = true;
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        let (f, c, r) = eval(st.0, st.1);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, c, v.clone(), r));
        }
    }
    let Some((_, c, v, mut r)) = best else { return Ok(None) };
    let frame = ConformalFrame::new(u.clone(), v.clone())?;
    for _ in 0..60 {
        let disc = NullDisc::affine(&c, &frame, r)?;
        if disc.contained(dom, 16, 256, 0.0)? {
            let (b1, b2) = (preimage(&c, &u, &v, r, p), preimage(&c, &u, &v, r, q));
            if b1.norm() >= 1.0 || b2.norm() >= 1.0 {
                return Ok(None);
            }
            return Ok(Some(ChainLink { disc, from: b1, to: b2 }));
        }
        r *= 0.99;
    }
    Ok(None)
}

fn chain_on_segment(
    dom: &DomainSpec,
    x: &Point,
    y: &Point,
    pieces: usize,
    cfg: &ChainConfig,
) -> Result<Option<ChainEstimate>> {
    let way: Vec<Point> = (0..=pieces).map(|k| x + (y - x) * (k as f64 / pieces as f64)).collect();
    let links: Vec<Option<ChainLink>> =
        way.par_windows(2).map(|w| best_link(dom, &w[0], &w[1], cfg)).collect::<Result<_>>()?;
    Ok(links.into_iter().collect::<Option<Vec<_>>>().map(ChainEstimate::from_links))
}

/// Upper bound for `ρ_Ω(x, y)` by a chain of affine discs along the segment.
/// Tries one piece first, doubling until every piece is bridged, then one
/// further doubling, and keeps the shorter chain.
pub fn chain_distance_upper(dom: &DomainSpec, x: &Point, y: &Point, cfg: &ChainConfig) -> Result<ChainEstimate> {
    check_dim(x, dom.dim())?;
    check_dim(y, dom.dim())?;
    if !dom.contains(x, cfg.margin)? || !dom.contains(y, cfg.margin)? {
        return Err(Error::PointOutside);
    }
    if x == y {
        return Ok(ChainEstimate::default());
    }
    let mut pieces = 1;
    while pieces <= cfg.max_pieces {
        if let Some(first) = chain_on_segment(dom, x, y, pieces, cfg)? {
            let finer = if 2 * pieces <= cfg.max_pieces { chain_on_segment(dom, x, y, 2 * pieces, cfg)? } else { None };
            return Ok(match finer {
                Some(f) if f.total < first.total => f,
                _ => first,
            });
        }
        pieces *= 2;
    }
    Err(Error::ChainFailed(format!("no chain with up to {} pieces", cfg.max_pieces)))
}

type Key = (Vec<u64>, Vec<u64>);

fn key(x: &Point, y: &Point) -> Key {
    (x.iter().map(|v| v.to_bits()).collect(), y.iter().map(|v| v.to_bits()).collect())
}

/// Chain distances with a cache; a new query also tries concatenating
/// cached chains through every cached midpoint.
pub struct ChainPlanner<'a> {
    dom: &'a DomainSpec,
    cfg: ChainConfig,
    cache: Mutex<HashMap<Key, ChainEstimate>>,
}

impl<'a> ChainPlanner<'a> {
    pub fn new(dom: &'a DomainSpec, cfg: ChainConfig) -> Self {
        Self { dom, cfg, cache: Mutex::new(HashMap::new()) }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<ChainEstimate> {
        if let Some(c) = self.cache.lock().unwrap().get(&key(x, y)) {
            return Ok(c.clone());
        }
        let mut best = chain_distance_upper(self.dom, x, y, &self.cfg)?;
        {
            let cache = self.cache.lock().unwrap();
            let kx = key(x, y).0;
            let ky = key(x, y).1;
            for ((a, m), first) in cache.iter() {
                if *a != kx {
                    continue;
                }
                if let Some(second) = cache.get(&(m.clone(), ky.clone())) {
                    if first.total + second.total < best.total {
                        best = first.concat(second);
                    }
                }
            }
        }
        self.cache.lock().unwrap().insert(key(x, y), best.clone());
        Ok(best)
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicConfig {
    /// Interior vertices of the initial straight path.
    pub interior: usize,
    pub nodes_per_segment: usize,
    pub max_sweeps: usize,
    pub start: Option<Polyline>,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        Self { interior: 8, nodes_per_segment: 9, max_sweeps: 500, start: None }
    }
}

/// Locally optimal polyline from `x` to `y` for the given metric, by
/// coordinate-descent vertex moves with step halving.
pub fn geodesic_search(
    dom: &DomainSpec,
    x: &Point,
    y: &Point,
    metric: &(dyn Fn(&Point, &Direction) -> Result<f64> + Sync),
    cfg: &GeodesicConfig,
) -> Result<(Polyline, f64)> {
    check_dim(x, dom.dim())?;
    check_dim(y, dom.dim())?;
    if !dom.contains(x, 0.0)? || !dom.contains(y, 0.0)? {
        return Err(Error::PointOutside);
    }
    let mut verts: Vec<Point> = match &cfg.start {
        Some(p) => p.vertices().to_vec(),
        None => Polyline::segment(x, y, cfg.interior + 1)?.vertices().to_vec(),
    };
    let seg_len = |a: &Point, b: &Point| -> Result<f64> {
        let d = b - a;
        let l = d.norm();
        if l == 0.0 {
            return Ok(0.0);
        }
        let m = cfg.nodes_per_segment.max(3) | 1;
        let dir = &d / l;
        let vals = (0..m).map(|k| metric(&(a + &d * (k as f64 / (m - 1) as f64)), &dir)).collect::<Result<Vec<_>>>()?;
        Ok(composite_simpson(&vals, l))
    };
    let mut segs: Vec<f64> = verts.windows(2).map(|w| seg_len(&w[0], &w[1])).collect::<Result<_>>()?;
    let n = x.len();
    let mut step = (y - x).norm() / (4.0 * verts.len() as f64);
    let floor = 1e-9 * (y - x).norm().max(1e-12);
    for _ in 0..cfg.max_sweeps {
        if step < floor {
            break;
        }
        let mut improved = false;
        for i in 1..verts.len().saturating_sub(1) {
            for j in 0..n {
                for sign in [1.0, -1.0] {
                    let mut cand = verts[i].clone();
                    cand[j] += sign * step;
                    if !dom.contains(&cand, 0.0).unwrap_or(false) {
                        continue;
                    }
                    let (Ok(l0), Ok(l1)) = (seg_len(&verts[i - 1], &cand), seg_len(&cand, &verts[i + 1])) else {
                        continue;
                    };
                    if l0 + l1 < segs[i - 1] + segs[i] - 1e-15 {
                        verts[i] = cand;
                        segs[i - 1] = l0;
                        segs[i] = l1;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let total = segs.iter().sum();
    Ok((Polyline::new(verts)?, total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceLower {
    pub value: f64,
    pub method: &'static str,
}

/// Certified lower bound on `ρ_Ω(x, y)`: exact on balls, and on convex
/// polyhedra `max_i ½|log(d_i(x)/d_i(y))|` over face clearances `d_i`.
/// Sublevel domains get 0.
pub fn distance_lower(dom: &DomainSpec, x: &Point, y: &Point) -> Result<DistanceLower> {
    check_dim(x, dom.dim())?;
    check_dim(y, dom.dim())?;
    if !dom.contains(x, 0.0)? || !dom.contains(y, 0.0)? {
        return Err(Error::PointOutside);
    }
    Ok(match dom {
        DomainSpec::Ball { center, radius } => DistanceLower {
            value: ball_distance(&((x - center) / *radius), &((y - center) / *radius))?,
            method: "exact_ball",
        },
        DomainSpec::HalfSpace(_) | DomainSpec::Polyhedral(_) => {
            let faces = dom.faces().unwrap_or_default();
            let value = faces.iter().map(|h| 0.5 * (h.clearance(x) / h.clearance(y)).ln().abs()).fold(0.0, f64::max);
            DistanceLower { value, method: "face_log_ratio" }
        }
        DomainSpec::Sublevel(_) => DistanceLower { value: 0.0, method: "none" },
    })
}
