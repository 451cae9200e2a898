//! One-dimensional quadrature.

/// Adaptive Simpson integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson rule on `nodes` equally spaced samples (`nodes` odd, ≥ 3)
/// over an interval of length `len`.
pub fn composite_simpson(values: &[f64], len: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "composite Simpson needs an odd node count >= 3");
    let h = len / (n - 1) as f64;
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artanh_integral() {
        let v = adaptive_simpson(&|t: f64| 1.0 / (1.0 - t * t), 0.0, 0.5, 1e-12);
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let vals: Vec<f64> = (0..5).map(|i| (i as f64 / 4.0).powi(3)).collect();
        assert!((composite_simpson(&vals, 1.0) - 0.25).abs() < 1e-15);
    }
}
