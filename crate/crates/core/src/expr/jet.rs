use nalgebra::{DMatrix, DVector};

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: DVector<f64>,
    /// Symmetric by construction.
    pub hessian: DMatrix<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }
}

/// Second-order forward-mode dual number in `n` variables.
///
/// Stores the value, `n` first-order slots and the `n(n+1)/2` upper-triangular
/// second-order slots (row-major packing).
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

#[inline]
fn tri(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl Dual2 {
    pub fn constant(n: usize, v: f64) -> Self {
        Self { v, g: vec![0.0; n], h: vec![0.0; n * (n + 1) / 2] }
    }

    /// The coordinate function `x_{i+1}` evaluated at `value`.
    pub fn variable(n: usize, i: usize, value: f64) -> Self {
        let mut d = Self::constant(n, value);
        d.g[i] = 1.0;
        d
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Second partial derivative with respect to `x_i, x_j`.
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[tri(self.dim(), i, j)]
    }

    /// Composition `phi(self)` given `phi`, `phi'` and `phi''` at `self.v`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let g: Vec<f64> = self.g.iter().map(|gi| f1 * gi).collect();
        let mut h = vec![0.0; self.h.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri(n, i, j);
                h[k] = f1 * self.h[k] + f2 * self.g[i] * self.g[j];
            }
        }
        Self { v: f0, g, h }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            v: self.v + o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            v: self.v - o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a - b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { v: s * self.v, g: self.g.iter().map(|a| s * a).collect(), h: self.h.iter().map(|a| s * a).collect() }
    }

    pub fn add_const(&self, c: f64) -> Self {
        let mut d = self.clone();
        d.v += c;
        d
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.dim();
        let mut h = vec![0.0; self.h.len()];
        for i in 0..n {
            for j in i..n {
                let k = tri(n, i, j);
                h[k] = self.v * o.h[k] + o.v * self.h[k] + self.g[i] * o.g[j] + self.g[j] * o.g[i];
            }
        }
        Self { v: self.v * o.v, g: self.g.iter().zip(&o.g).map(|(a, b)| self.v * b + o.v * a).collect(), h }
    }

    pub fn recip(&self) -> Self {
        let v = self.v;
        self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    pub fn powi(&self, k: i32) -> Self {
        let v = self.v;
        let kf = k as f64;
        let f0 = v.powi(k);
        let f1 = if k == 0 { 0.0 } else { kf * v.powi(k - 1) };
        let f2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * v.powi(k - 2) };
        self.compose(f0, f1, f2)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.v;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.g.iter().all(|x| x.is_finite()) && self.h.iter().all(|x| x.is_finite())
    }

    /// Unpacks into a [`Jet2`] with an exactly symmetric Hessian.
    pub fn to_jet(&self) -> Jet2 {
        let n = self.dim();
        let hessian = DMatrix::from_fn(n, n, |i, j| self.h[tri(n, i, j)]);
        Jet2 { value: self.v, gradient: DVector::from_column_slice(&self.g), hessian }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_second_order() {
        // f = x*y at (2,3): f_xy = 1, f_xx = f_yy = 0
        let x = Dual2::variable(2, 0, 2.0);
        let y = Dual2::variable(2, 1, 3.0);
        let f = x.mul(&y);
        assert_eq!(f.v, 6.0);
        assert_eq!(f.g, vec![3.0, 2.0]);
        assert_eq!(f.hess(0, 1), 1.0);
        assert_eq!(f.hess(0, 0), 0.0);
    }

    #[test]
    fn chain_rule_exp_square() {
        // f = exp(x^2) at x=1: f' = 2x e^{x^2}, f'' = (2 + 4x^2) e^{x^2}
        let x = Dual2::variable(1, 0, 1.0);
        let f = x.powi(2).exp();
        let e = 1.0f64.exp();
        assert!((f.g[0] - 2.0 * e).abs() < 1e-14);
        assert!((f.hess(0, 0) - 6.0 * e).abs() < 1e-13);
    }
}
