//! Domain descriptions and geometric queries.
//!
//! Sublevel domains are handled as `{u < 0}` intersected with their sampling
//! box: clearances never exceed the distance to the box walls, and queries
//! outside the box fail with [`Error::OutsideBox`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{check_dim, Direction, Point};

/// Open half-space `{x : x·normal > offset}` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    normal: Direction,
    offset: f64,
}

impl HalfSpace {
    /// Normalizes `normal` (and rescales `offset`) so the set is unchanged.
    pub fn new(normal: Direction, offset: f64) -> Result<Self> {
        let len = normal.norm();
        if len == 0.0 || !len.is_finite() || !offset.is_finite() {
            return Err(Error::ZeroDirection);
        }
        Ok(Self { normal: normal / len, offset: offset / len })
    }

    pub fn normal(&self) -> &Direction {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance to the bounding hyperplane, positive inside.
    pub fn clearance(&self, p: &Point) -> f64 {
        p.dot(&self.normal) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sublevel {
    expr: Expr,
    source: String,
    bbox: Vec<(f64, f64)>,
    convex_hint: bool,
}

impl Sublevel {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn bbox(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    pub fn convex_hint(&self) -> bool {
        self.convex_hint
    }

    pub fn in_box(&self, p: &Point) -> bool {
        p.iter().zip(&self.bbox).all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    pub fn box_diameter(&self) -> f64 {
        self.bbox.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt()
    }

    fn box_clearance(&self, p: &Point) -> f64 {
        p.iter().zip(&self.bbox).map(|(x, (lo, hi))| (x - lo).min(hi - x)).fold(f64::INFINITY, f64::min)
    }

    /// `u(p) < 0`, counting evaluation failures as outside.
    fn negative(&self, p: &Point) -> bool {
        matches!(self.expr.eval(p), Ok(v) if v < 0.0)
    }

    /// Parameter where the ray `p + t d` leaves the box.
    fn box_exit(&self, p: &Point, d: &Direction) -> f64 {
        let mut t = f64::INFINITY;
        for (i, (lo, hi)) in self.bbox.iter().enumerate() {
            if d[i] > 0.0 {
                t = t.min((hi - p[i]) / d[i]);
            } else if d[i] < 0.0 {
                t = t.min((lo - p[i]) / d[i]);
            }
        }
        t.max(0.0)
    }

    /// First `t` in `(0, tmax]` where `inside(p + t d)` fails, by marching
    /// then bisection; `None` if no failure is seen.
    fn first_exit(&self, p: &Point, d: &Direction, tmax: f64, inside: impl Fn(&Point) -> bool) -> Option<f64> {
        const STEPS: usize = 128;
        let h = tmax / STEPS as f64;
        let mut lo = 0.0;
        for k in 1..=STEPS {
            let t = h * k as f64;
            if !inside(&(p + d * t)) {
                let mut hi = t;
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if inside(&(p + d * mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Some(lo);
            }
            lo = t;
        }
        None
    }

    fn ray_hit(&self, p: &Point, d: &Direction, cap: f64) -> Option<f64> {
        let tmax = self.box_exit(p, d).min(cap);
        self.first_exit(p, d, tmax, |q| self.negative(q))
    }

    fn ray_clearance(&self, p: &Point) -> f64 {
        let n = p.len();
        let mut best = self.box_clearance(p);
        let mut dirs = ray_directions(n);
        let jet = self.expr.eval_jet2(p).ok();
        if let Some(j) = &jet {
            let g = j.gradient.norm();
            if g > 0.0 {
                dirs.push(&j.gradient / g);
            }
        }
        let mut best_ray: Option<(f64, Direction)> = None;
        for d in dirs {
            if let Some(t) = self.ray_hit(p, &d, best) {
                if best_ray.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best_ray = Some((t, d));
                }
                best = best.min(t);
            }
        }
        // pattern search on the sphere around the shortest ray
        if let Some((mut bt, mut bd)) = best_ray {
            let mut step = 0.25;
            while step > 1e-4 {
                let mut improved = false;
                for i in 0..n {
                    for s in [-step, step] {
                        let mut d = bd.clone();
                        d[i] += s;
                        let d = d.normalize();
                        if let Some(t) = self.ray_hit(p, &d, bt * 1.5) {
                            if t < bt {
                                bt = t;
                                bd = d;
                                improved = true;
                            }
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.min(bt);
        }
        if let Some(j) = &jet {
            let g = j.gradient.norm();
            if g > 0.0 {
                best = best.min(j.value.abs() / g);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Ball { center: Point, radius: f64 },
    HalfSpace(HalfSpace),
    Polyhedral(Vec<HalfSpace>),
    Sublevel(Sublevel),
}

impl DomainSpec {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        check_min_dim(center.len())?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn unit_ball(n: usize) -> Result<Self> {
        Self::ball(DVector::zeros(n), 1.0)
    }

    pub fn halfspace(normal: Direction, offset: f64) -> Result<Self> {
        check_min_dim(normal.len())?;
        Ok(Self::HalfSpace(HalfSpace::new(normal, offset)?))
    }

    pub fn polyhedral(faces: Vec<HalfSpace>) -> Result<Self> {
        let n = faces
            .first()
            .ok_or_else(|| Error::InvalidInput("polyhedral domain needs at least one half-space".into()))?
            .normal
            .len();
        check_min_dim(n)?;
        for f in &faces {
            check_dim(&f.normal, n)?;
        }
        Ok(Self::Polyhedral(faces))
    }

    pub fn sublevel(source: &str, bbox: Vec<(f64, f64)>, convex_hint: bool) -> Result<Self> {
        let n = bbox.len();
        check_min_dim(n)?;
        if bbox.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidInput("sampling box must have lo < hi in every coordinate".into()));
        }
        let expr = Expr::parse(source, n)?;
        Ok(Self::Sublevel(Sublevel { expr, source: source.to_string(), bbox, convex_hint }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } => center.len(),
            Self::HalfSpace(h) => h.normal.len(),
            Self::Polyhedral(f) => f[0].normal.len(),
            Self::Sublevel(s) => s.bbox.len(),
        }
    }

    /// Faces of a half-space or polyhedral domain.
    pub fn faces(&self) -> Option<&[HalfSpace]> {
        match self {
            Self::HalfSpace(h) => Some(std::slice::from_ref(h)),
            Self::Polyhedral(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Self::Sublevel(s) => s.convex_hint,
            _ => true,
        }
    }

    /// Whether `p` lies in the domain with clearance at least `margin`.
    pub fn contains(&self, p: &Point, margin: f64) -> Result<bool> {
        check_dim(p, self.dim())?;
        if !(margin >= 0.0) {
            return Err(Error::InvalidInput(format!("margin must be nonnegative, got {margin}")));
        }
        Ok(match self {
            Self::Sublevel(s) => {
                if !s.in_box(p) {
                    return Err(Error::OutsideBox);
                }
                s.negative(p) && (margin == 0.0 || self.sublevel_ball_inside(s, p, margin))
            }
            _ => {
                let c = self.exact_clearance(p);
                c > 0.0 && c >= margin
            }
        })
    }

    /// Sampled test that the closed ball of radius `m` about `p` is inside.
    fn sublevel_ball_inside(&self, s: &Sublevel, p: &Point, m: f64) -> bool {
        if s.box_clearance(p) < m {
            return false;
        }
        ray_directions(p.len()).iter().all(|d| (1..=4).all(|k| s.negative(&(p + d * (m * k as f64 / 4.0)))))
    }

    /// Exact signed clearance for ball, half-space and polyhedral domains.
    fn exact_clearance(&self, p: &Point) -> f64 {
        match self {
            Self::Ball { center, radius } => radius - (p - center).norm(),
            Self::HalfSpace(h) => h.clearance(p),
            Self::Polyhedral(f) => f.iter().map(|h| h.clearance(p)).fold(f64::INFINITY, f64::min),
            Self::Sublevel(_) => unreachable!(),
        }
    }

    /// Euclidean distance from `p` to the boundary.
    ///
    /// Exact except for sublevel domains, where it is the minimum over 26
    /// (in R^3) ray bisections and the first-order estimate `|u|/|∇u|`,
    /// with relative tolerance about 1e-3.
    pub fn boundary_distance(&self, p: &Point) -> Result<f64> {
        if !self.contains(p, 0.0)? {
            return Err(Error::PointOutside);
        }
        Ok(match self {
            Self::Sublevel(s) => s.ray_clearance(p),
            _ => self.exact_clearance(p),
        })
    }

    /// Clearance of `p`: positive inside, nonpositive outside.
    ///
    /// Outside sublevel domains the value is `-|u|/|∇u|` (or minus the box
    /// violation), which only carries the correct sign.
    pub fn signed_clearance(&self, p: &Point) -> Result<f64> {
        check_dim(p, self.dim())?;
        Ok(match self {
            Self::Sublevel(s) => {
                if !s.in_box(p) {
                    return Ok(s.box_clearance(p).min(0.0));
                }
                if s.negative(p) {
                    s.ray_clearance(p)
                } else {
                    match s.expr.eval_jet2(p) {
                        Ok(j) if j.gradient.norm() > 0.0 => -j.value / j.gradient.norm(),
                        _ => 0.0,
                    }
                }
            }
            _ => self.exact_clearance(p),
        })
    }

    /// Largest `t ≥ 0` such that `x + s d` keeps clearance `≥ delta` for all
    /// `s ∈ [0, t]` (`INFINITY` if unbounded). Assumes `x` has clearance `≥ delta`.
    pub fn exit_time(&self, x: &Point, d: &Direction, delta: f64) -> f64 {
        match self {
            Self::Ball { center, radius } => {
                // |w + t d| = R - delta with w = x - center
                let rr = radius - delta;
                let w = x - center;
                let a = d.norm_squared();
                if a == 0.0 {
                    return f64::INFINITY;
                }
                let b = w.dot(d);
                let c = w.norm_squared() - rr * rr;
                let disc = (b * b - a * c).max(0.0);
                ((-b + disc.sqrt()) / a).max(0.0)
            }
            Self::HalfSpace(_) | Self::Polyhedral(_) => {
                let mut t = f64::INFINITY;
                for h in self.faces().unwrap() {
                    let rate = d.dot(&h.normal);
                    if rate < 0.0 {
                        t = t.min(((h.clearance(x) - delta) / -rate).max(0.0));
                    }
                }
                t
            }
            Self::Sublevel(s) => {
                let len = d.norm();
                if len == 0.0 {
                    return f64::INFINITY;
                }
                let dir = d / len;
                let tmax = s.box_exit(x, &dir);
                let inside = |q: &Point| {
                    s.in_box(q)
                        && s.box_clearance(q) >= delta
                        && match s.expr.eval_jet2(q) {
                            Ok(j) => j.value + delta * j.gradient.norm() < 0.0,
                            Err(_) => false,
                        }
                };
                let t = s.first_exit(x, &dir, tmax, inside).unwrap_or(tmax);
                t / len
            }
        }
    }

    /// Smooth inequality constraints `h(p) ≤ 0` encoding "clearance ≥ delta",
    /// pushed as `(h, ∇h)` pairs.
    pub fn constraints(&self, p: &Point, delta: f64, out: &mut Vec<(f64, Direction)>) {
        match self {
            Self::Ball { center, radius } => {
                let w = p - center;
                let r = w.norm();
                let g = if r > 0.0 { w / r } else { DVector::zeros(p.len()) };
                out.push((r - (radius - delta), g));
            }
            Self::HalfSpace(_) | Self::Polyhedral(_) => {
                for h in self.faces().unwrap() {
                    out.push((delta - h.clearance(p), -h.normal.clone()));
                }
            }
            Self::Sublevel(s) => {
                let n = p.len();
                match s.expr.eval_jet2(p) {
                    Ok(j) => {
                        let gn = j.gradient.norm();
                        let mut g = j.gradient.clone();
                        if gn > 0.0 {
                            g += &j.hessian * &j.gradient * (delta / gn);
                        }
                        out.push((j.value + delta * gn, g));
                    }
                    Err(_) => out.push((1.0, DVector::zeros(n))),
                }
                for (i, (lo, hi)) in s.bbox.iter().enumerate() {
                    let mut e = DVector::zeros(n);
                    e[i] = 1.0;
                    let upper = p[i] - (hi - delta);
                    let lower = (lo + delta) - p[i];
                    if upper > lower {
                        out.push((upper, e));
                    } else {
                        out.push((lower, -e));
                    }
                }
            }
        }
    }

    /// Serializes to the JSON domain-file format.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&DomainFile::from(self)).expect("domain serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("domain JSON: {e}")))?;
        file.try_into()
    }
}

fn check_min_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("domains need dimension n >= 3, got {n}")));
    }
    Ok(())
}

/// Unit vectors with entries proportional to {-1, 0, 1}: 26 in R^3.
/// Above n = 6 only the `±e_i ± e_j` and `±e_i` families are used.
pub fn ray_directions(n: usize) -> Vec<Direction> {
    let mut out = Vec::new();
    if n <= 6 {
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let v = DVector::from_fn(n, |_, _| {
                let digit = (c % 3) as f64 - 1.0;
                c /= 3;
                digit
            });
            let len = v.norm();
            if len > 0.0 {
                out.push(v / len);
            }
        }
    } else {
        for i in 0..n {
            for s in [-1.0, 1.0] {
                let mut v = DVector::zeros(n);
                v[i] = s;
                out.push(v);
            }
            for j in i + 1..n {
                for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut v = DVector::zeros(n);
                    v[i] = a;
                    v[j] = b;
                    out.push(v / 2f64.sqrt());
                }
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DomainFile {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Polyhedral {
        halfspaces: Vec<HalfSpaceFile>,
    },
    Sublevel {
        expr: String,
        #[serde(rename = "box")]
        bbox: Vec<[f64; 2]>,
        #[serde(default)]
        convex_hint: bool,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfSpaceFile {
    normal: Vec<f64>,
    offset: f64,
}

impl From<&DomainSpec> for DomainFile {
    fn from(d: &DomainSpec) -> Self {
        match d {
            DomainSpec::Ball { center, radius } => {
                DomainFile::Ball { center: center.iter().copied().collect(), radius: *radius }
            }
            DomainSpec::HalfSpace(h) => {
                DomainFile::Halfspace { normal: h.normal.iter().copied().collect(), offset: h.offset }
            }
            DomainSpec::Polyhedral(f) => DomainFile::Polyhedral {
                halfspaces: f
                    .iter()
                    .map(|h| HalfSpaceFile { normal: h.normal.iter().copied().collect(), offset: h.offset })
                    .collect(),
            },
            DomainSpec::Sublevel(s) => DomainFile::Sublevel {
                expr: s.source.clone(),
                bbox: s.bbox.iter().map(|(a, b)| [*a, *b]).collect(),
                convex_hint: s.convex_hint,
            },
        }
    }
}

impl TryFrom<DomainFile> for DomainSpec {
    type Error = Error;

    fn try_from(f: DomainFile) -> Result<Self> {
        match f {
            DomainFile::Ball { center, radius } => DomainSpec::ball(DVector::from_vec(center), radius),
            DomainFile::Halfspace { normal, offset } => DomainSpec::halfspace(DVector::from_vec(normal), offset),
            DomainFile::Polyhedral { halfspaces } => DomainSpec::polyhedral(
                halfspaces
                    .into_iter()
                    .map(|h| HalfSpace::new(DVector::from_vec(h.normal), h.offset))
                    .collect::<Result<_>>()?,
            ),
            DomainFile::Sublevel { expr, bbox, convex_hint } => {
                DomainSpec::sublevel(&expr, bbox.into_iter().map(|[a, b]| (a, b)).collect(), convex_hint)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{basis, point};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cylinder() -> DomainSpec {
        DomainSpec::sublevel("x1^2+x2^2-1", vec![(-2.0, 2.0), (-2.0, 2.0), (-10.0, 10.0)], true).unwrap()
    }

    fn slab() -> DomainSpec {
        DomainSpec::polyhedral(vec![
            HalfSpace::new(basis(3, 0), 0.0).unwrap(),
            HalfSpace::new(-basis(3, 0), -1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn contains_examples() {
        let ball = DomainSpec::unit_ball(3).unwrap();
        assert!(ball.contains(&point(&[0.0, 0.0, 0.0]), 0.5).unwrap());
        let h = DomainSpec::halfspace(basis(3, 0), 0.0).unwrap();
        assert!(!h.contains(&point(&[0.1, 0.0, 0.0]), 0.2).unwrap());
        assert!(cylinder().contains(&point(&[0.0, 0.0, 7.0]), 0.0).unwrap());
        assert!(matches!(cylinder().contains(&point(&[0.0, 0.0, 11.0]), 0.0), Err(Error::OutsideBox)));
    }

    #[test]
    fn boundary_distance_examples() {
        let ball = DomainSpec::unit_ball(3).unwrap();
        assert_eq!(ball.boundary_distance(&point(&[0.5, 0.0, 0.0])).unwrap(), 0.5);
        let h = DomainSpec::halfspace(basis(3, 0), 0.0).unwrap();
        assert_eq!(h.boundary_distance(&point(&[2.0, 5.0, 7.0])).unwrap(), 2.0);
        assert_eq!(slab().boundary_distance(&point(&[0.25, 0.0, 0.0])).unwrap(), 0.25);
        assert!(matches!(ball.boundary_distance(&point(&[2.0, 0.0, 0.0])), Err(Error::PointOutside)));
    }

    #[test]
    fn sublevel_distance_within_tolerance() {
        let d = cylinder().boundary_distance(&point(&[0.3, 0.4, 1.0])).unwrap();
        assert!((d - 0.5).abs() <= 1e-3 * 0.5, "{d}");
        let d = cylinder().boundary_distance(&point(&[0.0, 0.0, 0.0])).unwrap();
        assert!((d - 1.0).abs() <= 1e-3, "{d}");
    }

    #[test]
    fn halfspace_normalized_on_construction() {
        let h = HalfSpace::new(point(&[2.0, 0.0, 0.0]), 2.0).unwrap();
        assert_eq!(h.normal()[0], 1.0);
        assert_eq!(h.offset(), 1.0);
    }

    #[test]
    fn exit_times_match_clearance() {
        let ball = DomainSpec::unit_ball(3).unwrap();
        let t = ball.exit_time(&point(&[0.0, 0.0, 0.0]), &point(&[2.0, 0.0, 0.0]), 0.1);
        assert_abs_diff_eq!(t, 0.45, epsilon = 1e-15);
        let t = slab().exit_time(&point(&[0.25, 0.0, 0.0]), &point(&[-1.0, 3.0, 0.0]), 0.0);
        assert_abs_diff_eq!(t, 0.25, epsilon = 1e-15);
        let t = cylinder().exit_time(&point(&[0.0, 0.0, 0.0]), &point(&[0.0, 2.0, 0.0]), 0.0);
        assert_abs_diff_eq!(t, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn json_roundtrip() {
        for d in [DomainSpec::unit_ball(3).unwrap(), slab(), cylinder()] {
            let again = DomainSpec::from_json(&d.to_json()).unwrap();
            assert_eq!(d, again);
        }
        let d = DomainSpec::from_json(r#"{"kind":"halfspace","normal":[1,0,0],"offset":0}"#).unwrap();
        assert!(matches!(d, DomainSpec::HalfSpace(_)));
        assert!(DomainSpec::from_json(r#"{"kind":"ball","center":[0,0,0]"#).is_err());
        assert!(DomainSpec::from_json(r#"{"kind":"ball","center":[0,0],"radius":1}"#).is_err());
    }

    #[test]
    fn ray_directions_count() {
        assert_eq!(ray_directions(3).len(), 26);
    }

    proptest! {
        #[test]
        fn distance_below_outside_samples(
            p in prop::array::uniform3(-0.9f64..0.9),
            q in prop::array::uniform3(-1.9f64..1.9),
        ) {
            let doms = [DomainSpec::unit_ball(3).unwrap(), slab(), cylinder()];
            for d in &doms {
                let (p, q) = (point(&p), point(&q));
                if d.contains(&p, 0.0).unwrap() && !d.contains(&q, 0.0).unwrap() {
                    let bd = d.boundary_distance(&p).unwrap();
                    prop_assert!(bd <= (p - q).norm() + 1e-12);
                }
            }
        }

        #[test]
        fn nested_balls(p in prop::array::uniform3(-2.5f64..2.5)) {
            let small = DomainSpec::unit_ball(3).unwrap();
            let big = DomainSpec::ball(DVector::zeros(3), 2.0).unwrap();
            let p = point(&p);
            if small.contains(&p, 0.0).unwrap() {
                prop_assert!(big.contains(&p, 0.0).unwrap());
            }
        }
    }
}
