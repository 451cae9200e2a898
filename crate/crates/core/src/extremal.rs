//! Upper bounds for `g_Ω` and `M_Ω` from explicit feasible discs.
//!
//! Any conformal harmonic disc `f ⊂ Ω` with `f(0) = x`, `f_x(0) = r·u`
//! certifies `g_Ω(x, u) ≤ 1/r`. The solver searches over polynomial null
//! discs
//!
//! ```text
//! F(z) = x + r·Σ_k ĉ_k z^k,   ĉ_1 = u − i v,
//! ```
//!
//! maximizing `log r` subject to the null equations (coefficients of
//! `Σ_j (F'_j)²`, an augmented Lagrangian term) and containment at grid
//! points (Rockafellar inequality multipliers). In `g` mode `v ⊥ u` is
//! optimized as well; in `M` mode the frame is fixed by the plane, which
//! loses nothing since `z ↦ e^{iθ}z` rotates `df_0` inside the plane.
//!
//! Candidates are certified independently of the optimizer: the shape is
//! projected onto the null variety by damped Gauss–Newton, the scale is set
//! to the exact largest feasible value over a grid four times finer, and the
//! disc is shrunk (`f(z) ↦ f(sz)`) until grid containment holds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::disc::{chebyshev_radii, complexify, strip_coefficient, CVector, DiscReport, NullDisc};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, frame_complete, orthogonal_complement, Direction, Point, TwoPlane};
use crate::optim::Lbfgs;

/// Largest null residual accepted for a witness.
pub const NULL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Polynomial degree `N`.
    pub degree: usize,
    pub multistarts: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Augmented-Lagrangian outer rounds.
    pub rounds: usize,
    /// L-BFGS iterations per round.
    pub max_iter: usize,
    pub seed: u64,
    /// Containment margin `δ`.
    pub margin: f64,
    pub grid_radii: usize,
    pub grid_angles: usize,
    /// Shrink factor per failed validation.
    pub shrink: f64,
    /// Small ridge on the shape coefficients.
    pub ridge: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            degree: 8,
            multistarts: 16,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            rounds: 12,
            max_iter: 300,
            seed: 0,
            margin: 1e-3,
            grid_radii: 8,
            grid_angles: 32,
            shrink: 0.98,
            ridge: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 || self.multistarts < 1 {
            return Err(Error::InvalidInput("degree and multistarts must be at least 1".into()));
        }
        if !(self.margin >= 0.0) || !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidInput("margin must be >= 0 and shrink in (0, 1)".into()));
        }
        if self.grid_radii < 8 || self.grid_angles < 32 {
            return Err(Error::InvalidInput("grid must be at least 8 x 32".into()));
        }
        Ok(())
    }

    /// Angles used during optimization: enough to resolve degree-`N` terms.
    pub fn effective_angles(&self) -> usize {
        self.grid_angles.max(8 * self.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBoundResult {
    /// `1/r`, scaled by `|u|` in `g` mode.
    pub bound: f64,
    #[serde(skip)]
    pub witness: NullDisc,
    pub report: DiscReport,
    /// `‖df_0‖` of the witness.
    pub radius: f64,
    /// Starts whose optimized disc certified (the affine baseline always does).
    pub converged_starts: usize,
    pub starts: usize,
}

#[derive(Debug, Clone)]
pub enum Target {
    Direction(Direction),
    Plane(TwoPlane),
}

/// Upper bound on `g_Ω(x, u)`. Any nonzero `u` is accepted; the bound is
/// homogeneous of degree one in `u`.
pub fn maximize_g(dom: &DomainSpec, x: &Point, u: &Direction, cfg: &SolverConfig) -> Result<UpperBoundResult> {
    check_dim(u, dom.dim())?;
    let len = u.norm();
    if len == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let mut res = solve(dom, x, &Target::Direction(u / len), cfg)?;
    res.bound *= len;
    Ok(res)
}

/// Upper bound on `M_Ω(x, Λ)`.
pub fn maximize_m(dom: &DomainSpec, x: &Point, plane: &TwoPlane, cfg: &SolverConfig) -> Result<UpperBoundResult> {
    solve(dom, x, &Target::Plane(plane.clone()), cfg)
}

/// Starting discs: inscribed affine discs, strip discs along flat
/// directions, and random perturbations, `cfg.multistarts` in total.
pub fn seed_candidates(dom: &DomainSpec, x: &Point, target: &Target, cfg: &SolverConfig) -> Result<Vec<NullDisc>> {
    let p = Problem::new(dom, x, target, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(p.seeds(&mut rng)?.iter().map(|z| p.decode_disc(z)).collect())
}

fn solve(dom: &DomainSpec, x: &Point, target: &Target, cfg: &SolverConfig) -> Result<UpperBoundResult> {
    let p = Problem::new(dom, x, target, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts = p.seeds(&mut rng)?;
    let results: Vec<(Option<Certified>, Option<Certified>)> = starts
        .par_iter()
        .map(|z0| {
            let raw = p.certify(z0);
            let mut z = z0.clone();
            p.optimize(&mut z);
            (raw, p.certify(&z))
        })
        .collect();
    let converged_starts = results.iter().filter(|r| r.1.is_some()).count();
    let best = results
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .flatten()
        .fold(None::<Certified>, |acc, c| match acc {
            Some(a) if a.radius >= c.radius => Some(a),
            _ => Some(c),
        })
        .ok_or_else(|| Error::NoConvergence("no start produced a certified disc".into()))?;
    let report = best.disc.report(dom, cfg.grid_radii, cfg.effective_angles())?;
    Ok(UpperBoundResult {
        bound: 1.0 / best.radius,
        witness: best.disc,
        report,
        radius: best.radius,
        converged_starts,
        starts: starts.len(),
    })
}

#[derive(Debug, Clone)]
struct Certified {
    disc: NullDisc,
    radius: f64,
}

struct Problem<'a> {
    dom: &'a DomainSpec,
    cfg: &'a SolverConfig,
    x: Point,
    u: Direction,
    /// Orthonormal basis of `u⊥` parameterizing `v` (empty in `M` mode).
    perp: Vec<Direction>,
    v_fixed: Option<Direction>,
    n: usize,
    deg: usize,
    /// Powers `z_j^k`, `k = 1..N`, at the optimization grid.
    zpow: Vec<Vec<Complex64>>,
    per: usize,
    cap: Option<f64>,
}

impl<'a> Problem<'a> {
    fn new(dom: &'a DomainSpec, x: &Point, target: &Target, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = dom.dim();
        check_dim(x, n)?;
        let bd = dom.boundary_distance(x)?;
        if bd <= cfg.margin {
            return Err(Error::Infeasible(format!(
                "boundary distance {bd:.3e} does not exceed the margin {:.3e}",
                cfg.margin
            )));
        }
        let (u, perp, v_fixed) = match target {
            Target::Direction(u) => {
                check_dim(u, n)?;
                let u = u.normalize();
                let perp = orthogonal_complement(std::slice::from_ref(&u), n, 1e-12);
                (u, perp, None)
            }
            Target::Plane(pl) => {
                check_dim(pl.b1(), n)?;
                (pl.b1().clone(), Vec::new(), Some(pl.b2().clone()))
            }
        };
        let deg = cfg.degree;
        let angles = cfg.effective_angles();
        let radii = if dom.is_convex() { vec![1.0] } else { chebyshev_radii(cfg.grid_radii) };
        let zpow = polar_grid(&radii, angles)
            .into_iter()
            .map(|z| {
                let mut w = Complex64::new(1.0, 0.0);
                (0..deg)
                    .map(|_| {
                        w *= z;
                        w
                    })
                    .collect()
            })
            .collect();
        let mut buf = Vec::new();
        dom.constraints(x, cfg.margin, &mut buf);
        let cap = match dom {
            DomainSpec::HalfSpace(_) | DomainSpec::Polyhedral(_) => Some(10.0 * bd),
            _ => None,
        };
        let per = buf.len() + usize::from(cap.is_some());
        Ok(Self { dom, cfg, x: x.clone(), u, perp, v_fixed, n, deg, zpow, per, cap })
    }

    fn nv(&self) -> usize {
        self.perp.len()
    }

    fn nvars(&self) -> usize {
        1 + self.nv() + 2 * self.n * (self.deg - 1)
    }

    fn shape_offset(&self, k: usize) -> usize {
        1 + self.nv() + 2 * self.n * (k - 2)
    }

    /// Unit `v` and `|w|` for the raw perpendicular coordinates.
    fn v_of(&self, z: &[f64]) -> (Direction, f64) {
        if let Some(v) = &self.v_fixed {
            return (v.clone(), 1.0);
        }
        let mut w = DVector::zeros(self.n);
        for (i, e) in self.perp.iter().enumerate() {
            w += e * z[1 + i];
        }
        let len = w.norm();
        if len == 0.0 {
            (self.perp[0].clone(), 0.0)
        } else {
            (w / len, len)
        }
    }

    fn shape(&self, z: &[f64]) -> (f64, Direction, Vec<CVector>) {
        let r = z[0].exp();
        let (v, _) = self.v_of(z);
        let mut chat = vec![complexify(&self.u, &v)];
        for k in 2..=self.deg {
            let o = self.shape_offset(k);
            chat.push(CVector::from_fn(self.n, |i, _| Complex64::new(z[o + i], z[o + self.n + i])));
        }
        (r, v, chat)
    }

    fn encode(&self, d: &NullDisc) -> Option<Vec<f64>> {
        let c1 = &d.coeffs()[0];
        let re = c1.map(|w| w.re);
        let r = re.dot(&self.u);
        if !(r > 0.0) {
            return None;
        }
        let v = c1.map(|w| -w.im) / r;
        let mut z = vec![0.0; self.nvars()];
        z[0] = r.ln();
        for (i, e) in self.perp.iter().enumerate() {
            z[1 + i] = v.dot(e);
        }
        for k in 2..=self.deg.min(d.degree()) {
            let o = self.shape_offset(k);
            for i in 0..self.n {
                let c = d.coeffs()[k - 1][i] / r;
                z[o + i] = c.re;
                z[o + self.n + i] = c.im;
            }
        }
        Some(z)
    }

    fn decode_disc(&self, z: &[f64]) -> NullDisc {
        let (r, _, chat) = self.shape(z);
        let coeffs = chat.into_iter().map(|c| c * Complex64::new(r, 0.0)).collect();
        NullDisc::new(self.x.clone(), coeffs).expect("finite coefficients")
    }

    fn seeds(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
        let dom = self.dom;
        let delta = self.cfg.margin;
        let bd = dom.boundary_distance(&self.x)?;
        let r0 = (bd - delta) * 0.999;
        let n = self.n;
        let mut out = Vec::new();
        let v_default = match &self.v_fixed {
            Some(v) => v.clone(),
            None => frame_complete(&self.u, None)?.v().clone(),
        };
        let affine = |v: &Direction| {
            let d = NullDisc::new(self.x.clone(), vec![complexify(&self.u, v) * Complex64::new(r0, 0.0)]).unwrap();
            self.encode(&d)
        };
        out.extend(affine(&v_default));

        // strip discs: v flat (strip bounded along u) or u flat (bounded along v)
        let width = |a: &Direction| dom.exit_time(&self.x, a, delta).min(dom.exit_time(&self.x, &-a, delta));
        let flat = |a: &Direction| self.unbounded(a) && self.unbounded(&-a);
        let vs: Vec<Direction> = match &self.v_fixed {
            Some(v) => vec![v.clone()],
            None => self.perp.clone(),
        };
        let deg = self.deg;
        let strip = |v: &Direction, s: f64, omega: Complex64| {
            let w = complexify(&self.u, v);
            let mut rot = Complex64::new(1.0, 0.0);
            let coeffs = (1..=deg)
                .map(|k| {
                    let damp = 1.0 - k as f64 / (deg + 1) as f64;
                    let c = &w * (rot * s * strip_coefficient(k) * damp);
                    rot *= omega;
                    c
                })
                .collect();
            self.encode(&NullDisc::new(self.x.clone(), coeffs).unwrap())
        };
        for v in &vs {
            if flat(v) {
                let s = width(&self.u);
                if s.is_finite() && s > 0.0 {
                    out.extend(strip(v, s, Complex64::new(1.0, 0.0)));
                }
            }
        }
        if flat(&self.u) {
            for v in &vs {
                let s = width(v);
                if s.is_finite() && s > 0.0 {
                    out.extend(strip(v, s, Complex64::new(0.0, 1.0)));
                }
            }
        }
        // affine discs with random v
        if self.v_fixed.is_none() && n > 2 {
            for _ in 0..2 {
                let w = self.random_perp(rng);
                out.extend(affine(&w));
            }
        }
        let base = out.clone();
        out.truncate(self.cfg.multistarts);
        while out.len() < self.cfg.multistarts {
            let mut z = base[out.len() % base.len()].clone();
            z[0] += (0.9f64).ln();
            if self.v_fixed.is_none() {
                let w = self.random_perp(rng);
                for (i, e) in self.perp.iter().enumerate() {
                    z[1 + i] = w.dot(e);
                }
            }
            for zi in z.iter_mut().skip(1 + self.nv()) {
                *zi += 0.15 * (rng.random::<f64>() * 2.0 - 1.0);
            }
            out.push(z);
        }
        Ok(out)
    }

    fn random_perp(&self, rng: &mut ChaCha8Rng) -> Direction {
        loop {
            let mut w = DVector::zeros(self.n);
            for e in &self.perp {
                w += e * (rng.random::<f64>() * 2.0 - 1.0);
            }
            if w.norm() > 0.1 {
                return w.normalize();
            }
        }
    }

    /// Whether the ray from `x` along `a` never meets the boundary (up to
    /// the sampling box for sublevel domains).
    fn unbounded(&self, a: &Direction) -> bool {
        let t = self.dom.exit_time(&self.x, a, self.cfg.margin);
        match self.dom {
            DomainSpec::Sublevel(s) => {
                let mut tb = f64::INFINITY;
                for (i, (lo, hi)) in s.bbox().iter().enumerate() {
                    if a[i] > 0.0 {
                        tb = tb.min((hi - self.x[i]) / a[i]);
                    } else if a[i] < 0.0 {
                        tb = tb.min((lo - self.x[i]) / a[i]);
                    }
                }
                t >= 0.95 * tb
            }
            _ => t.is_infinite(),
        }
    }

    /// Augmented Lagrangian value and gradient.
    fn lagrangian(&self, z: &[f64], lam: &[Complex64], nu: &[f64], mu: f64) -> (f64, Vec<f64>) {
        let n = self.n;
        let deg = self.deg;
        let (r, v, chat) = self.shape(z);
        let mut grad = vec![0.0; z.len()];
        let mut cg: Vec<CVector> = vec![CVector::zeros(n); deg];
        let mut val = -z[0];
        grad[0] = -1.0;

        let e = null_coefficients(&chat);
        for m in 1..e.len() {
            let g = lam[m - 1] + e[m] * mu;
            val += (lam[m - 1].conj() * e[m]).re + 0.5 * mu * e[m].norm_sqr();
            for k in 1..=deg {
                let l = (m + 2).saturating_sub(k);
                if (1..=deg).contains(&l) {
                    let w = (2 * k * l) as f64;
                    cg[k - 1] += chat[l - 1].map(|c| g * c.conj() * w);
                }
            }
        }
        for k in 2..=deg {
            val += self.cfg.ridge * chat[k - 1].norm_squared();
            cg[k - 1] += &chat[k - 1] * Complex64::new(2.0 * self.cfg.ridge, 0.0);
        }

        let mut buf = Vec::with_capacity(self.per);
        for (j, zp) in self.zpow.iter().enumerate() {
            let mut phi = DVector::zeros(n);
            for k in 0..deg {
                phi += chat[k].map(|c| (c * zp[k]).re);
            }
            let disp = &phi * r;
            let p = &self.x + &disp;
            buf.clear();
            self.dom.constraints(&p, self.cfg.margin, &mut buf);
            if let Some(cap) = self.cap {
                let d = disp.norm();
                let g = if d > 0.0 { &disp / d } else { DVector::zeros(n) };
                buf.push((d - cap, g));
            }
            for (i, (h, gp)) in buf.iter().enumerate() {
                let nu_i = nu[j * self.per + i];
                let s = (nu_i + mu * h).max(0.0);
                val += (s * s - nu_i * nu_i) / (2.0 * mu);
                if s > 0.0 {
                    grad[0] += s * gp.dot(&disp);
                    for k in 0..deg {
                        let zc = zp[k].conj() * (s * r);
                        cg[k] += gp.map(|t| zc * t);
                    }
                }
            }
        }

        for k in 2..=deg {
            let o = self.shape_offset(k);
            for i in 0..n {
                grad[o + i] = cg[k - 1][i].re;
                grad[o + n + i] = cg[k - 1][i].im;
            }
        }
        if self.v_fixed.is_none() {
            let gv = cg[0].map(|c| -c.im);
            let (_, len) = self.v_of(z);
            if len > 0.0 {
                let proj = &gv - &v * v.dot(&gv);
                for (i, e) in self.perp.iter().enumerate() {
                    grad[1 + i] = e.dot(&proj) / len;
                }
            }
        }
        (val, grad)
    }

    fn violations(&self, z: &[f64]) -> (Vec<Complex64>, Vec<f64>) {
        let (r, _, chat) = self.shape(z);
        let e = null_coefficients(&chat)[1..].to_vec();
        let mut hs = Vec::with_capacity(self.zpow.len() * self.per);
        let mut buf = Vec::new();
        for zp in &self.zpow {
            let mut disp = DVector::zeros(self.n);
            for k in 0..self.deg {
                disp += chat[k].map(|c| (c * zp[k]).re);
            }
            disp *= r;
            buf.clear();
            self.dom.constraints(&(&self.x + &disp), self.cfg.margin, &mut buf);
            hs.extend(buf.iter().map(|b| b.0));
            if let Some(cap) = self.cap {
                hs.push(disp.norm() - cap);
            }
        }
        (e, hs)
    }

    fn optimize(&self, z: &mut Vec<f64>) {
        let ne = 2 * self.deg - 2;
        let mut lam = vec![Complex64::new(0.0, 0.0); ne];
        let mut nu = vec![0.0; self.zpow.len() * self.per];
        let mut mu = self.cfg.penalty_init;
        let mut prev = f64::INFINITY;
        let opt = Lbfgs { memory: 10, max_iter: self.cfg.max_iter, gtol: 1e-10 };
        for _ in 0..self.cfg.rounds {
            opt.minimize(z, |w| self.lagrangian(w, &lam, &nu, mu));
            if self.v_fixed.is_none() {
                let (v, len) = self.v_of(z);
                if len > 0.0 {
                    for (i, e) in self.perp.iter().enumerate() {
                        z[1 + i] = v.dot(e);
                    }
                }
            }
            let (e, hs) = self.violations(z);
            let mut viol = 0.0f64;
            for (l, em) in lam.iter_mut().zip(&e) {
                *l += em * mu;
                viol = viol.max(em.norm());
            }
            for (nu_i, h) in nu.iter_mut().zip(&hs) {
                *nu_i = (*nu_i + mu * h).max(0.0);
                viol = viol.max(h.max(0.0));
            }
            if viol < 1e-10 {
                break;
            }
            if viol > 0.25 * prev {
                mu = (mu * self.cfg.penalty_growth).min(1e8);
            }
            prev = viol;
        }
    }

    fn certify(&self, z: &[f64]) -> Option<Certified> {
        let (_, _, chat) = self.shape(z);
        let chat = project_null(chat)?;
        let unit = NullDisc::new(self.x.clone(), chat).ok()?;
        let fine_angles = 4 * self.cfg.effective_angles();
        let fine_radii = 4 * self.cfg.grid_radii;
        let scale_grid = if self.dom.is_convex() {
            polar_grid(&[1.0], fine_angles)
        } else {
            polar_grid(&chebyshev_radii(fine_radii), fine_angles)
        };
        let mut t = f64::INFINITY;
        let mut far: f64 = 0.0;
        for w in &scale_grid {
            let phi = unit.evaluate(*w) - &self.x;
            far = far.max(phi.norm());
            t = t.min(self.dom.exit_time(&self.x, &phi, self.cfg.margin));
        }
        if let Some(cap) = self.cap {
            if far > 0.0 {
                t = t.min(cap / far);
            }
        }
        if !(t.is_finite() && t > 0.0) {
            return None;
        }
        let coeffs: Vec<CVector> = unit.coeffs().iter().map(|c| c * Complex64::new(t * (1.0 - 1e-12), 0.0)).collect();
        let disc = NullDisc::new(self.x.clone(), coeffs).ok()?;
        let mut s = 1.0;
        for _ in 0..400 {
            let d = disc.scaled(s);
            if d.null_residual() <= NULL_TOL && d.contained(self.dom, fine_radii, fine_angles, 0.0).ok()? {
                let radius = d.derivative(Complex64::new(0.0, 0.0)).0.dot(&self.u);
                return Some(Certified { disc: d, radius });
            }
            s *= self.cfg.shrink;
        }
        None
    }
}

fn polar_grid(radii: &[f64], angles: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(radii.len() * angles);
    for &r in radii {
        for j in 0..angles {
            out.push(Complex64::from_polar(r, 2.0 * PI * j as f64 / angles as f64));
        }
    }
    out
}

/// Coefficients of `Σ_j (F'_j)²` for `F' = Σ k ĉ_k z^{k-1}`.
fn null_coefficients(chat: &[CVector]) -> Vec<Complex64> {
    let deg = chat.len();
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * deg - 1];
    for a in 1..=deg {
        for b in a..=deg {
            let w: Complex64 = chat[a - 1].iter().zip(chat[b - 1].iter()).map(|(p, q)| p * q).sum();
            let f = (a * b) as f64 * if a == b { 1.0 } else { 2.0 };
            out[a + b - 2] += w * f;
        }
    }
    out
}

/// Damped Gauss–Newton (minimum-norm steps) on the null equations
/// `m = 1..2N−2`, moving `ĉ_2..ĉ_N` with `ĉ_1` fixed.
fn project_null(mut chat: Vec<CVector>) -> Option<Vec<CVector>> {
    let deg = chat.len();
    if deg == 1 {
        return Some(chat);
    }
    let n = chat[0].len();
    let residual = |c: &[CVector]| -> DVector<f64> {
        let e = null_coefficients(c);
        DVector::from_iterator(2 * (e.len() - 1), e[1..].iter().flat_map(|w| [w.re, w.im]))
    };
    let scale = 1.0 + chat.iter().map(|c| c.norm_squared()).sum::<f64>();
    let target = 1e-14 * scale;
    let mut res = residual(&chat);
    let mut lambda: f64 = 1e-10;
    for _ in 0..200 {
        if res.amax() <= target {
            return Some(chat);
        }
        let rows = res.len();
        let cols = 2 * n * (deg - 1);
        let mut jac = DMatrix::<f64>::zeros(rows, cols);
        for m in 1..2 * deg - 1 {
            for k in 2..=deg {
                let l = (m + 2).saturating_sub(k);
                if !(1..=deg).contains(&l) {
                    continue;
                }
                let w = (2 * k * l) as f64;
                let base = 2 * n * (k - 2);
                for i in 0..n {
                    let jc = chat[l - 1][i] * w;
                    let row = 2 * (m - 1);
                    jac[(row, base + i)] += jc.re;
                    jac[(row, base + n + i)] -= jc.im;
                    jac[(row + 1, base + i)] += jc.im;
                    jac[(row + 1, base + n + i)] += jc.re;
                }
            }
        }
        let jjt = &jac * jac.transpose();
        let mut stepped = false;
        for _ in 0..30 {
            let mut a = jjt.clone();
            let damp = lambda * (1.0 + jjt.diagonal().amax());
            for i in 0..rows {
                a[(i, i)] += damp;
            }
            let Some(y) = a.cholesky().map(|c| c.solve(&res)) else {
                lambda *= 10.0;
                continue;
            };
            let delta = -(jac.transpose() * y);
            let mut trial = chat.clone();
            for k in 2..=deg {
                let base = 2 * n * (k - 2);
                for i in 0..n {
                    trial[k - 1][i] += Complex64::new(delta[base + i], delta[base + n + i]);
                }
            }
            let tr = residual(&trial);
            if tr.norm() < res.norm() {
                chat = trial;
                res = tr;
                lambda = (lambda / 10.0).max(1e-16);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    (res.amax() <= 1e-10 * scale).then_some(chat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{basis, point};

    fn quick() -> SolverConfig {
        SolverConfig { multistarts: 4, ..SolverConfig::default() }
    }

    #[test]
    fn lagrangian_gradient_matches_finite_differences() {
        let dom = DomainSpec::unit_ball(3).unwrap();
        let x = point(&[0.1, -0.2, 0.05]);
        let cfg = SolverConfig { degree: 3, ..SolverConfig::default() };
        let p = Problem::new(&dom, &x, &Target::Direction(basis(3, 0)), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z: Vec<f64> = (0..p.nvars()).map(|i| if i == 0 { 0.1 } else { rng.random::<f64>() - 0.5 }).collect();
        let lam: Vec<Complex64> = (0..4).map(|i| Complex64::new(0.1 * i as f64, -0.2)).collect();
        let nu: Vec<f64> = (0..p.zpow.len() * p.per).map(|i| (i % 3) as f64 * 0.01).collect();
        let (_, g) = p.lagrangian(&z, &lam, &nu, 3.0);
        for i in 0..z.len() {
            let h = 1e-6;
            let mut zp = z.clone();
            zp[i] += h;
            let mut zm = z.clone();
            zm[i] -= h;
            let fd = (p.lagrangian(&zp, &lam, &nu, 3.0).0 - p.lagrangian(&zm, &lam, &nu, 3.0).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + fd.abs()), "var {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn projection_reaches_null_variety() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = basis(3, 0);
        let v = basis(3, 1);
        let mut chat = vec![complexify(&u, &v)];
        for _ in 0..4 {
            chat.push(CVector::from_fn(3, |_, _| {
                Complex64::new(0.2 * (rng.random::<f64>() - 0.5), 0.2 * (rng.random::<f64>() - 0.5))
            }));
        }
        let out = project_null(chat.clone()).unwrap();
        let worst = null_coefficients(&out).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
        assert_eq!(out[0], chat[0]);
    }

    #[test]
    fn ball_center_is_tight() {
        let dom = DomainSpec::unit_ball(3).unwrap();
        let res = maximize_g(&dom, &DVector::zeros(3), &basis(3, 0), &quick()).unwrap();
        assert!(res.bound >= 1.0 && res.bound <= 1.02, "{}", res.bound);
        assert!(res.report.null_residual <= NULL_TOL);
        assert!(res.report.containment_margin >= 0.0);
    }

    #[test]
    fn infeasible_near_boundary() {
        let dom = DomainSpec::unit_ball(3).unwrap();
        let x = point(&[0.9995, 0.0, 0.0]);
        assert!(matches!(maximize_g(&dom, &x, &basis(3, 0), &quick()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn seeds_include_inscribed_affine_disc() {
        let dom = DomainSpec::halfspace(basis(3, 0), 0.0).unwrap();
        let x = point(&[1.0, 0.0, 0.0]);
        let seeds = seed_candidates(&dom, &x, &Target::Direction(basis(3, 0)), &quick()).unwrap();
        assert_eq!(seeds.len(), 4);
        let r = seeds[0].derivative(Complex64::new(0.0, 0.0)).0.norm();
        assert!((r - 0.999 * (1.0 - 1e-3)).abs() < 1e-12);
    }
}
