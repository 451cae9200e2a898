//! Candidate conformal harmonic discs as real parts of polynomial curves
//! `F(z) = x + Σ_{k=1}^N c_k z^k` in C^n.
//!
//! `f = Re F` is harmonic for any coefficients; it is conformal exactly when
//! `F'` takes values in the null quadric `Σ_j z_j² = 0`, which for a
//! polynomial means every coefficient of `Σ_j (F'_j)²` vanishes.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, ConformalFrame, Direction, Point};

pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct NullDisc {
    center: Point,
    /// `coeffs[k-1] = c_k`.
    coeffs: Vec<CVector>,
}

/// Residuals of a disc against a domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscReport {
    pub null_residual: f64,
    pub containment_margin: f64,
    /// `(f_x(0), f_y(0))`.
    pub deriv_at_0: (Vec<f64>, Vec<f64>),
}

impl NullDisc {
    pub fn new(center: Point, coeffs: Vec<CVector>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("disc needs at least one coefficient".into()));
        }
        let n = center.len();
        for c in &coeffs {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { center, coeffs })
    }

    /// Affine disc `x + r(Re z·u + Im z·v)` for a unit frame direction.
    /// Uses the frame as given, so `‖df_0‖ = r·|u|`.
    pub fn affine(x: &Point, frame: &ConformalFrame, r: f64) -> Result<Self> {
        check_dim(x, frame.dim())?;
        Self::new(x.clone(), vec![complexify(frame.u(), frame.v()) * Complex64::new(r, 0.0)])
    }

    /// Degree-`degree` truncation of `(4/π) arctan(z)(u − iv)` for the
    /// normalized frame: a conformal map onto a strip of width 2 along `u`,
    /// unbounded along `v`, with `f_x(0) = (4/π)u`.
    pub fn strip(x: &Point, frame: &ConformalFrame, degree: usize) -> Result<Self> {
        check_dim(x, frame.dim())?;
        if degree == 0 {
            return Err(Error::InvalidInput("degree must be positive".into()));
        }
        let fr = frame.normalized()?;
        let w = complexify(fr.u(), fr.v());
        let coeffs = (1..=degree).map(|k| w.clone() * Complex64::new(strip_coefficient(k), 0.0)).collect();
        Self::new(x.clone(), coeffs)
    }

    /// Fejér (Cesàro) mean of [`NullDisc::strip`]: `c_k` damped by
    /// `1 − k/(N+1)`. The Fejér kernel is positive, so `Re` stays strictly
    /// inside the strip for every degree, at the cost of `f_x(0)` shrinking
    /// by `N/(N+1)`.
    pub fn strip_fejer(x: &Point, frame: &ConformalFrame, degree: usize) -> Result<Self> {
        let raw = Self::strip(x, frame, degree)?;
        let damp = |k: usize| 1.0 - k as f64 / (degree + 1) as f64;
        let coeffs = raw.coeffs.iter().enumerate().map(|(i, c)| c * Complex64::new(damp(i + 1), 0.0)).collect();
        Self::new(x.clone(), coeffs)
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn coeffs(&self) -> &[CVector] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `F(z) - x`, the complex displacement.
    pub fn displacement(&self, z: Complex64) -> CVector {
        // Horner in z
        let mut acc = CVector::zeros(self.dim());
        for c in self.coeffs.iter().rev() {
            acc = (acc + c) * z;
        }
        acc
    }

    /// `f(z) = x + Re Σ c_k z^k`.
    pub fn evaluate(&self, z: Complex64) -> Point {
        &self.center + self.displacement(z).map(|w| w.re)
    }

    /// `F'(z) = Σ k c_k z^{k-1}`.
    pub fn complex_derivative(&self, z: Complex64) -> CVector {
        let mut acc = CVector::zeros(self.dim());
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            acc = acc * z + c * Complex64::new((i + 1) as f64, 0.0);
        }
        acc
    }

    /// `(f_x(z), f_y(z)) = (Re F'(z), −Im F'(z))`.
    pub fn derivative(&self, z: Complex64) -> (Direction, Direction) {
        let d = self.complex_derivative(z);
        (d.map(|w| w.re), d.map(|w| -w.im))
    }

    /// Coefficients of `Σ_j (F'_j(z))²`, of degree `2N − 2`.
    pub fn null_coefficients(&self) -> Vec<Complex64> {
        let n = self.degree();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        for a in 0..n {
            for b in a..n {
                let w = (a + 1) as f64 * (b + 1) as f64 * bilinear(&self.coeffs[a], &self.coeffs[b]);
                out[a + b] += if a == b { w } else { w * 2.0 };
            }
        }
        out
    }

    /// Max modulus of the coefficients of `Σ_j (F'_j)²`; zero iff the disc
    /// is conformal.
    pub fn null_residual(&self) -> f64 {
        self.null_coefficients().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `z ↦ f(sz)`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut p = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                p *= s;
                c * Complex64::new(p, 0.0)
            })
            .collect();
        Self { center: self.center.clone(), coeffs }
    }

    /// `z ↦ f(e^{iθ} z)`.
    pub fn rotated(&self, theta: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, theta * (i + 1) as f64))
            .collect();
        Self { center: self.center.clone(), coeffs }
    }

    /// Same shape recentred at `x`.
    pub fn recentred(&self, x: Point) -> Self {
        Self { center: x, coeffs: self.coeffs.clone() }
    }

    /// Minimum signed clearance of `f` over a polar grid with Chebyshev-
    /// clustered radii (including `r = 1`) and uniform angles.
    pub fn containment_margin(&self, dom: &DomainSpec, n_radii: usize, n_angles: usize) -> Result<f64> {
        if n_radii < 8 || n_angles < 32 {
            return Err(Error::InvalidInput(format!(
                "containment grid must be at least 8 x 32, got {n_radii} x {n_angles}"
            )));
        }
        check_dim(&self.center, dom.dim())?;
        let mut m = dom.signed_clearance(&self.center)?;
        for z in grid_points(n_radii, n_angles) {
            m = m.min(dom.signed_clearance(&self.evaluate(z))?);
        }
        Ok(m)
    }

    /// Whether every grid point (and the center) has clearance `≥ margin`.
    pub fn contained(&self, dom: &DomainSpec, n_radii: usize, n_angles: usize, margin: f64) -> Result<bool> {
        for z in std::iter::once(Complex64::new(0.0, 0.0)).chain(grid_points(n_radii, n_angles)) {
            let p = self.evaluate(z);
            let inside = match dom.contains(&p, margin) {
                Ok(b) => b,
                Err(Error::OutsideBox) => false,
                Err(e) => return Err(e),
            };
            if !inside {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn report(&self, dom: &DomainSpec, n_radii: usize, n_angles: usize) -> Result<DiscReport> {
        let (fx, fy) = self.derivative(Complex64::new(0.0, 0.0));
        Ok(DiscReport {
            null_residual: self.null_residual(),
            containment_margin: self.containment_margin(dom, n_radii, n_angles)?,
            deriv_at_0: (fx.iter().copied().collect(), fy.iter().copied().collect()),
        })
    }
}

/// `u − i v` as a complex vector.
pub fn complexify(u: &Direction, v: &Direction) -> CVector {
    CVector::from_fn(u.len(), |i, _| Complex64::new(u[i], -v[i]))
}

/// Non-Hermitian bilinear form `Σ_j a_j b_j`.
pub fn bilinear(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Taylor coefficient of `(4/π) arctan z`.
pub fn strip_coefficient(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        0.0
    } else {
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        4.0 / PI * sign / k as f64
    }
}

/// Chebyshev-clustered radii in `(0, 1]`, starting with 1.
pub fn chebyshev_radii(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / (2.0 * n as f64)).cos()).collect()
}

pub fn grid_points(n_radii: usize, n_angles: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n_radii * n_angles);
    for r in chebyshev_radii(n_radii) {
        for j in 0..n_angles {
            out.push(Complex64::from_polar(r, 2.0 * PI * j as f64 / n_angles as f64));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
pub struct DiscJson {
    pub center: Vec<f64>,
    /// `coeffs[k-1][j] = [Re, Im]` of component `j` of `c_k`.
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

impl From<&NullDisc> for DiscJson {
    fn from(d: &NullDisc) -> Self {
        Self {
            center: d.center.iter().copied().collect(),
            coeffs: d.coeffs.iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

impl TryFrom<DiscJson> for NullDisc {
    type Error = Error;

    fn try_from(j: DiscJson) -> Result<Self> {
        NullDisc::new(
            DVector::from_vec(j.center),
            j.coeffs
                .into_iter()
                .map(|c| CVector::from_iterator(c.len(), c.into_iter().map(|[a, b]| Complex64::new(a, b))))
                .collect(),
        )
    }
}
