//! Smooth cutoff functions: a C^∞ step, box plateaus built from it, and
//! compactly supported radial bumps.

use crate::region::AxisBox;

#[inline]
fn psi(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// C^∞ step: 0 for u ≤ 0, 1 for u ≥ 1, strictly increasing in between.
#[inline]
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = psi(u);
        a / (a + psi(1.0 - u))
    }
}

/// Derivative of [`smooth_step`].
#[inline]
pub fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let a = psi(u);
        let b = psi(1.0 - u);
        let da = a / (u * u);
        let db = -b / ((1.0 - u) * (1.0 - u));
        (da * b - a * db) / ((a + b) * (a + b))
    }
}

/// Second derivative of [`smooth_step`].
pub fn smooth_step_second_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - u;
    let a = psi(u);
    let b = psi(w);
    let da = a / (u * u);
    let db = -b / (w * w);
    let dda = a * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let ddb = b * (1.0 / w.powi(4) - 2.0 / w.powi(3));
    let s = a + b;
    let num = da * s - a * (da + db);
    (dda * s - a * (dda + ddb)) / (s * s) - 2.0 * (da + db) * num / (s * s * s)
}

/// [`plateau_1d`] with its second derivative.
pub fn plateau_1d_second(x: f64, lo: f64, hi: f64, margin: f64) -> (f64, f64, f64) {
    if x >= lo && x <= hi {
        (1.0, 0.0, 0.0)
    } else if x < lo {
        let u = (x - (lo - margin)) / margin;
        (
            smooth_step(u),
            smooth_step_derivative(u) / margin,
            smooth_step_second_derivative(u) / (margin * margin),
        )
    } else {
        let u = ((hi + margin) - x) / margin;
        (
            smooth_step(u),
            -smooth_step_derivative(u) / margin,
            smooth_step_second_derivative(u) / (margin * margin),
        )
    }
}

/// One-dimensional plateau: 1 on `[lo, hi]`, 0 outside `[lo - margin, hi + margin]`.
#[inline]
pub fn plateau_1d(x: f64, lo: f64, hi: f64, margin: f64) -> (f64, f64) {
    if x >= lo && x <= hi {
        (1.0, 0.0)
    } else if x < lo {
        let u = (x - (lo - margin)) / margin;
        (smooth_step(u), smooth_step_derivative(u) / margin)
    } else {
        let u = ((hi + margin) - x) / margin;
        (smooth_step(u), -smooth_step_derivative(u) / margin)
    }
}

/// Tensor-product plateau over a box: 1 on `inner`, 0 outside `inner` inflated by `margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    pub inner: AxisBox,
    pub margin: f64,
}

impl Plateau {
    pub fn new(inner: AxisBox, margin: f64) -> Self {
        assert!(margin > 0.0, "plateau margin must be positive");
        Plateau { inner, margin }
    }

    pub fn outer(&self) -> AxisBox {
        self.inner.inflate(self.margin)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (i, xi) in x.iter().enumerate() {
            v *= plateau_1d(*xi, self.inner.lo[i], self.inner.hi[i], self.margin).0;
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }

    /// Value and gradient; `grad` is overwritten.
    pub fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let n = x.len();
        let mut vals = [0.0; crate::MAX_DIM];
        let mut ders = [0.0; crate::MAX_DIM];
        for i in 0..n {
            let (v, d) = plateau_1d(x[i], self.inner.lo[i], self.inner.hi[i], self.margin);
            vals[i] = v;
            ders[i] = d;
        }
        let total: f64 = vals[..n].iter().product();
        for i in 0..n {
            if ders[i] == 0.0 {
                grad[i] = 0.0;
                continue;
            }
            let others: f64 = (0..n).filter(|&k| k != i).map(|k| vals[k]).product();
            grad[i] = ders[i] * others;
        }
        total
    }

    /// Value, gradient and row-major Hessian.
    pub fn value_gradient_hessian(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = x.len();
        let mut v = [0.0; crate::MAX_DIM];
        let mut d = [0.0; crate::MAX_DIM];
        let mut dd = [0.0; crate::MAX_DIM];
        for i in 0..n {
            (v[i], d[i], dd[i]) = plateau_1d_second(x[i], self.inner.lo[i], self.inner.hi[i], self.margin);
        }
        let prod_except = |skip: &[usize]| -> f64 { (0..n).filter(|k| !skip.contains(k)).map(|k| v[k]).product() };
        for i in 0..n {
            grad[i] = if d[i] == 0.0 { 0.0 } else { d[i] * prod_except(&[i]) };
            for j in 0..n {
                hess[i * n + j] = if i == j {
                    if dd[i] == 0.0 {
                        0.0
                    } else {
                        dd[i] * prod_except(&[i])
                    }
                } else if d[i] == 0.0 || d[j] == 0.0 {
                    0.0
                } else {
                    d[i] * d[j] * prod_except(&[i, j])
                };
            }
        }
        v[..n].iter().product()
    }
}

/// Radial bump `height · exp(1 − 1/(1 − s²))`, `s = |x − c| / r`, supported in the open ball.
#[inline]
pub fn bump_profile(s2: f64) -> (f64, f64) {
    if s2 >= 1.0 {
        return (0.0, 0.0);
    }
    let d = 1.0 - s2;
    let v = (1.0 - 1.0 / d).exp();
    // derivative with respect to s²
    (v, -v / (d * d))
}

/// [`bump_profile`] with the second derivative in s².
#[inline]
pub fn bump_profile_second(s2: f64) -> (f64, f64, f64) {
    if s2 >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let d = 1.0 - s2;
    let v = (1.0 - 1.0 / d).exp();
    let d2 = d * d;
    (v, -v / d2, v * (1.0 - 2.0 * d) / (d2 * d2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_limits_and_symmetry() {
        assert_eq!(smooth_step(-0.5), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        for k in 1..20 {
            let u = k as f64 / 20.0;
            assert!((smooth_step(u) + smooth_step(1.0 - u) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn step_derivative_matches_central_difference() {
        for k in 1..50 {
            let u = k as f64 / 50.0;
            let h = 1e-6;
            let fd = (smooth_step(u + h) - smooth_step(u - h)) / (2.0 * h);
            assert!((fd - smooth_step_derivative(u)).abs() < 1e-6, "u = {u}");
        }
    }

    #[test]
    fn second_derivatives_match_central_differences() {
        let h = 1e-6;
        for k in 1..50 {
            let u = k as f64 / 50.0;
            let fd = (smooth_step_derivative(u + h) - smooth_step_derivative(u - h)) / (2.0 * h);
            assert!(
                (fd - smooth_step_second_derivative(u)).abs() < 1e-5 * (1.0 + fd.abs()),
                "u = {u}"
            );
            let s2 = 0.98 * u;
            let fd = (bump_profile(s2 + h).1 - bump_profile(s2 - h).1) / (2.0 * h);
            assert!(
                (fd - bump_profile_second(s2).2).abs() < 1e-5 * (1.0 + fd.abs()),
                "s2 = {s2}"
            );
        }
    }

    #[test]
    fn plateau_hessian_matches_central_difference() {
        let p = Plateau::new(AxisBox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap(), 0.4);
        for x in [[1.1, 0.2], [-1.2, 0.7], [0.0, -0.8], [1.3, -0.6]] {
            let (mut g, mut hs) = ([0.0; 2], [0.0; 4]);
            p.value_gradient_hessian(&x, &mut g, &mut hs);
            for j in 0..2 {
                let (mut a, mut b) = (x, x);
                a[j] += 1e-6;
                b[j] -= 1e-6;
                let (mut ga, mut gb) = ([0.0; 2], [0.0; 2]);
                p.value_gradient(&a, &mut ga);
                p.value_gradient(&b, &mut gb);
                for i in 0..2 {
                    let fd = (ga[i] - gb[i]) / 2e-6;
                    assert!((fd - hs[i * 2 + j]).abs() < 1e-5, "{x:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn plateau_gradient_matches_central_difference() {
        let p = Plateau::new(AxisBox::new(vec![-1.0, -0.5], vec![1.0, 0.5]).unwrap(), 0.4);
        let pts = [[1.1, 0.2], [-1.2, 0.7], [0.0, -0.8], [1.3, -0.6]];
        for x in pts {
            let mut g = [0.0; 2];
            p.value_gradient(&x, &mut g);
            for i in 0..2 {
                let h = 1e-6;
                let mut a = x;
                let mut b = x;
                a[i] += h;
                b[i] -= h;
                let fd = (p.value(&a) - p.value(&b)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plateau_support() {
        let p = Plateau::new(AxisBox::cube(2, 1.0), 0.25);
        assert_eq!(p.value(&[0.9, -1.0]), 1.0);
        assert_eq!(p.value(&[1.25, 0.0]), 0.0);
        assert_eq!(p.value(&[0.0, 2.0]), 0.0);
        let v = p.value(&[1.1, 0.0]);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn bump_is_one_at_center_and_vanishes_at_rim() {
        assert_eq!(bump_profile(0.0).0, 1.0);
        assert_eq!(bump_profile(1.0).0, 0.0);
        assert!(bump_profile(0.999).0 < 1e-200);
    }
}
