//! Limited-memory BFGS with Armijo backtracking.

use std::collections::VecDeque;

pub(crate) struct Lbfgs {
    pub memory: usize,
    pub max_iter: usize,
    pub gtol: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    /// Minimizes `f` (returning value and gradient) from `x`, in place.
    /// Returns the final value.
    pub fn minimize(&self, x: &mut Vec<f64>, mut f: impl FnMut(&[f64]) -> (f64, Vec<f64>)) -> f64 {
        let (mut fx, mut g) = f(x);
        let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        for _ in 0..self.max_iter {
            let gnorm = dot(&g, &g).sqrt();
            if !(gnorm > self.gtol) || !fx.is_finite() {
                break;
            }
            // two-loop recursion
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(hist.len());
            for (s, y, rho) in hist.iter().rev() {
                let a = rho * dot(s, &q);
                q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = hist.back() {
                let gamma = dot(s, y) / dot(y, y);
                q.iter_mut().for_each(|qi| *qi *= gamma);
            } else {
                let scale = 1.0 / gnorm.max(1.0);
                q.iter_mut().for_each(|qi| *qi *= scale);
            }
            for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
            }
            let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                hist.clear();
                d = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
                slope = dot(&g, &d);
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (fn_, gn) = f(&xn);
                if fn_.is_finite() && fn_ <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                t *= 0.5;
            }
            let Some((xn, fn_, gn)) = accepted else {
                if hist.is_empty() {
                    break;
                }
                hist.clear();
                continue;
            };
            let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if hist.len() == self.memory {
                    hist.pop_front();
                }
                hist.push_back((s, y, 1.0 / sy));
            }
            let progress = fx - fn_;
            *x = xn;
            fx = fn_;
            g = gn;
            if progress.abs() <= 1e-15 * fx.abs().max(1.0) {
                break;
            }
        }
        fx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let opt = Lbfgs { memory: 8, max_iter: 500, gtol: 1e-10 };
        let v = opt.minimize(&mut x, |p| {
            let (a, b) = (p[0], p[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        });
        assert!(v < 1e-16, "{v}");
        assert!((x[0] - 1.0).abs() < 1e-7 && (x[1] - 1.0).abs() < 1e-7);
    }
}
