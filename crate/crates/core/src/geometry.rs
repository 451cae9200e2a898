//! Points, directions, conformal frames and 2-planes in R^n.

use nalgebra::{DMatrix, DVector};

use crate::config::TOL_FRAME;
use crate::error::{Error, Result};

/// Euclidean coordinates x1..xn.
pub type Point = DVector<f64>;
/// A tangent vector at a point; shares the representation of [`Point`].
pub type Direction = DVector<f64>;

/// Builds a point from a slice of coordinates.
pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

/// The standard basis vector `e_{i+1}` of R^n.
pub fn basis(n: usize, i: usize) -> Direction {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

pub(crate) fn check_dim(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    Ok(())
}

/// A pair `(u, v)` with `|u| = |v|` and `u · v = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFrame {
    u: Direction,
    v: Direction,
}

impl ConformalFrame {
    pub fn new(u: Direction, v: Direction) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
        }
        let scale = 1.0 + u.norm_squared().max(v.norm_squared());
        if (u.norm() - v.norm()).abs() > TOL_FRAME * scale.sqrt() || u.dot(&v).abs() > TOL_FRAME * scale {
            return Err(Error::InvalidInput("vectors do not form a conformal frame".into()));
        }
        Ok(Self { u, v })
    }

    pub fn u(&self) -> &Direction {
        &self.u
    }

    pub fn v(&self) -> &Direction {
        &self.v
    }

    /// Common length `|u| = |v|`.
    pub fn scale(&self) -> f64 {
        self.u.norm()
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// The same frame rescaled to unit length.
    pub fn normalized(&self) -> Result<Self> {
        let s = self.scale();
        if s == 0.0 {
            return Err(Error::ZeroDirection);
        }
        Ok(Self { u: &self.u / s, v: &self.v / s })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { u: &self.u * s, v: &self.v * s }
    }

    /// The 2-plane spanned by the frame.
    pub fn plane(&self) -> Result<TwoPlane> {
        let n = self.normalized()?;
        TwoPlane::new(n.u, n.v)
    }
}

/// Completes `u` to a conformal frame `(u, v)`.
///
/// With a seed, `v` is the Gram-Schmidt projection of the seed orthogonal to
/// `u`, rescaled to `|u|`. Without a seed the first standard basis vector not
/// parallel to `u` is used.
pub fn frame_complete(u: &Direction, seed: Option<&Direction>) -> Result<ConformalFrame> {
    let nu = u.norm();
    if nu == 0.0 || !nu.is_finite() {
        return Err(Error::ZeroDirection);
    }
    let n = u.len();
    let unit = u / nu;
    let project = |w: &Direction| -> Option<Direction> {
        let p = w - &unit * unit.dot(w);
        let np = p.norm();
        if np > 1e-8 * w.norm().max(1.0) {
            Some(p / np)
        } else {
            None
        }
    };
    let v = match seed {
        Some(s) => {
            check_dim(s, n)?;
            project(s).ok_or_else(|| Error::InvalidInput("seed is parallel to u".into()))?
        }
        None => (0..n)
            .find_map(|i| {
                let e = basis(n, i);
                // "not parallel": the normalized projection must be well defined
                if (unit.dot(&e).abs() - 1.0).abs() < 1e-12 {
                    None
                } else {
                    project(&e)
                }
            })
            .ok_or(Error::ZeroDirection)?,
    };
    Ok(ConformalFrame { u: u.clone(), v: v * nu })
}

/// An oriented 2-plane through the origin, stored by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct TwoPlane {
    b1: Direction,
    b2: Direction,
}

impl TwoPlane {
    pub fn new(b1: Direction, b2: Direction) -> Result<Self> {
        if b1.len() != b2.len() {
            return Err(Error::DimensionMismatch { expected: b1.len(), got: b2.len() });
        }
        if (b1.norm() - 1.0).abs() > TOL_FRAME || (b2.norm() - 1.0).abs() > TOL_FRAME || b1.dot(&b2).abs() > TOL_FRAME {
            return Err(Error::InvalidInput("plane basis is not orthonormal".into()));
        }
        Ok(Self { b1, b2 })
    }

    /// Orthonormalizes an arbitrary spanning pair.
    pub fn spanned_by(a: &Direction, b: &Direction) -> Result<Self> {
        let na = a.norm();
        if na == 0.0 {
            return Err(Error::ZeroDirection);
        }
        let b1 = a / na;
        let p = b - &b1 * b1.dot(b);
        let np = p.norm();
        if np < 1e-12 * b.norm().max(1.0) {
            return Err(Error::InvalidInput("vectors are parallel".into()));
        }
        Ok(Self { b1, b2: p / np })
    }

    /// `span(e_{i+1}, e_{j+1})`.
    pub fn coordinate(n: usize, i: usize, j: usize) -> Result<Self> {
        Self::new(basis(n, i), basis(n, j))
    }

    pub fn b1(&self) -> &Direction {
        &self.b1
    }

    pub fn b2(&self) -> &Direction {
        &self.b2
    }

    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    /// Orthogonal projector onto the plane.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.b1 * self.b1.transpose() + &self.b2 * self.b2.transpose()
    }

    /// Unit vector `cos(t) b1 + sin(t) b2`.
    pub fn unit(&self, t: f64) -> Direction {
        &self.b1 * t.cos() + &self.b2 * t.sin()
    }

    /// Equality as subspaces (projectors agree within `tol`).
    pub fn same_plane(&self, other: &TwoPlane, tol: f64) -> bool {
        self.dim() == other.dim() && (self.projector() - other.projector()).amax() <= tol
    }
}

impl PartialEq for TwoPlane {
    fn eq(&self, other: &Self) -> bool {
        self.same_plane(other, 1e-9)
    }
}

/// Piecewise linear path through a domain. Only a two-vertex path may be
/// degenerate (both vertices equal).
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("polyline needs at least 2 vertices".into()));
        }
        let n = vertices[0].len();
        for w in vertices.windows(2) {
            check_dim(&w[1], n)?;
            if (&w[1] - &w[0]).norm() == 0.0 && vertices.len() > 2 {
                return Err(Error::InvalidInput("consecutive polyline vertices coincide".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Straight segment subdivided into `pieces` equal parts. A degenerate
    /// segment (`a = b`) is a single piece.
    pub fn segment(a: &Point, b: &Point, pieces: usize) -> Result<Self> {
        let pieces = if a == b { 1 } else { pieces.max(1) };
        let verts = (0..=pieces).map(|k| a + (b - a) * (k as f64 / pieces as f64)).collect();
        Self::new(verts)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn euclidean_length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }
}

/// Sample point `k` of a Kronecker (additive recurrence) sequence in `[0,1)^d`.
///
/// Uses the generalized golden ratio; low discrepancy and deterministic.
pub fn kronecker_point(k: usize, d: usize) -> Vec<f64> {
    // phi_d is the unique positive root of x^(d+1) = x + 1
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    (0..d)
        .map(|j| {
            let alpha = (1.0 / phi).powi(j as i32 + 1);
            (0.5 + alpha * (k as f64 + 1.0)).fract()
        })
        .collect()
}

/// Singular values of the matrix whose rows are the given vectors.
pub fn singular_values(rows: &[Direction]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let n = rows[0].len();
    let m = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Orthonormal basis of the orthogonal complement of `span(rows)`.
pub fn orthogonal_complement(rows: &[Direction], n: usize, rel_tol: f64) -> Vec<Direction> {
    if rows.is_empty() {
        return (0..n).map(|i| basis(n, i)).collect();
    }
    // pad with zero rows so that the SVD yields a full right basis
    let m = rows.len().max(n);
    let a = DMatrix::from_fn(m, n, |i, j| if i < rows.len() { rows[i][j] } else { 0.0 });
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.max();
    let mut out = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= rel_tol * smax.max(f64::MIN_POSITIVE) {
            out.push(vt.row(k).transpose());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn frame_of_e1_is_e2() {
        let f = frame_complete(&point(&[1.0, 0.0, 0.0]), None).unwrap();
        assert_abs_diff_eq!((f.v() - point(&[0.0, 1.0, 0.0])).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn frame_of_scaled_e3() {
        let u = point(&[0.0, 0.0, 2.0]);
        let f = frame_complete(&u, None).unwrap();
        assert_abs_diff_eq!(f.v().norm(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.v().dot(&u), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frame_with_seed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = point(&[s, s, 0.0]);
        let f = frame_complete(&u, Some(&point(&[0.0, 0.0, 1.0]))).unwrap();
        assert_abs_diff_eq!((f.v() - point(&[0.0, 0.0, 1.0])).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_direction_rejected() {
        assert_eq!(frame_complete(&point(&[0.0, 0.0, 0.0]), None).unwrap_err(), Error::ZeroDirection);
    }

    #[test]
    fn plane_equality_by_projector() {
        let a = TwoPlane::coordinate(3, 0, 1).unwrap();
        let b = TwoPlane::spanned_by(&point(&[1.0, 1.0, 0.0]), &point(&[1.0, -1.0, 0.0])).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, TwoPlane::coordinate(3, 0, 2).unwrap());
    }

    #[test]
    fn complement_of_two_normals() {
        let c = orthogonal_complement(&[basis(3, 0), basis(3, 1)], 3, 1e-8);
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0][2].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kronecker_in_unit_cube() {
        for k in 0..100 {
            let p = kronecker_point(k, 3);
            assert!(p.iter().all(|x| (0.0..1.0).contains(x)));
        }
    }

    proptest::proptest! {
        #[test]
        fn frame_invariants_hold(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
            let u = point(&[a, b, c]);
            proptest::prop_assume!(u.norm() > 1e-6);
            let f = frame_complete(&u, None).unwrap();
            proptest::prop_assert!((f.u().norm() - f.v().norm()).abs() <= 1e-10 * (1.0 + u.norm()));
            proptest::prop_assert!(f.u().dot(f.v()).abs() <= 1e-10 * (1.0 + u.norm_squared()));
        }
    }
}
