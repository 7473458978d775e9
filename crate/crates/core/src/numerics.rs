//! Small shared numerical routines: tridiagonal solves, root finding,
//! adaptive quadrature, monotone interpolation, line fits.

use crate::real::Real;

/// Solve a tridiagonal system in place (Thomas algorithm).
///
/// `sub[i]` couples row `i+1` to `i`, `sup[i]` couples row `i` to `i+1`.
/// Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal<S: Real>(sub: &[S], diag: &[S], sup: &[S], rhs: &[S]) -> Option<Vec<S>> {
    let n = diag.len();
    debug_assert_eq!(sub.len(), n - 1);
    debug_assert_eq!(sup.len(), n - 1);
    debug_assert_eq!(rhs.len(), n);
    let mut c = vec![S::zero(); n - 1];
    let mut d = vec![S::zero(); n];
    let mut piv = diag[0];
    if piv == S::zero() {
        return None;
    }
    d[0] = rhs[0] / piv;
    if n > 1 {
        c[0] = sup[0] / piv;
    }
    for i in 1..n {
        piv = diag[i] - sub[i - 1] * c[i - 1];
        if piv == S::zero() {
            return None;
        }
        if i < n - 1 {
            c[i] = sup[i] / piv;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1];
        d[i] = d[i] - c[i] * next;
    }
    Some(d)
}

/// Brent-style root bracketing refinement on `[a, b]` with `f(a) f(b) <= 0`.
pub fn brent<S: Real>(mut a: S, mut b: S, mut fa: S, mut fb: S, f: impl Fn(S) -> S, tol: S, max_iter: usize) -> S {
    if fa == S::zero() {
        return a;
    }
    if fb == S::zero() {
        return b;
    }
    debug_assert!(fa * fb <= S::zero(), "brent needs a sign change");
    for _ in 0..max_iter {
        // secant proposal, clipped into the bracket; bisection fallback
        let mid = (a + b) * S::of(0.5);
        let mut x = if fb != fa { b - fb * (b - a) / (fb - fa) } else { mid };
        let lo = a.min(b);
        let hi = a.max(b);
        if !(x > lo && x < hi) {
            x = mid;
        }
        let fx = f(x);
        if fx == S::zero() || (b - a).abs() < tol {
            return x;
        }
        if fa * fx <= S::zero() {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
    }
    (a + b) * S::of(0.5)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<S: Real>(f: &impl Fn(S) -> S, a: S, b: S, tol: S) -> S {
    fn simpson<S: Real>(f: &impl Fn(S) -> S, a: S, fa: S, b: S, fb: S) -> (S, S, S) {
        let m = (a + b) * S::of(0.5);
        let fm = f(m);
        let s = (b - a) / S::of(6.0) * (fa + S::of(4.0) * fm + fb);
        (m, fm, s)
    }
    fn recurse<S: Real>(
        f: &impl Fn(S) -> S,
        a: S,
        fa: S,
        b: S,
        fb: S,
        m: S,
        fm: S,
        whole: S,
        tol: S,
        depth: u32,
    ) -> S {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= S::of(15.0) * tol {
            return left + right + delta / S::of(15.0);
        }
        let half = tol * S::of(0.5);
        recurse(f, a, fa, m, fm, lm, flm, left, half, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, half, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Monotone cubic (Fritsch-Carlson) interpolation on a uniform grid.
///
/// `values[i]` lives at `x = i * dx`. Queries outside the table clamp to the
/// end values; callers that need tail extrapolation handle it themselves.
pub struct MonotoneCubic<S: Real> {
    dx: S,
    values: Vec<S>,
    slopes: Vec<S>,
}

impl<S: Real> MonotoneCubic<S> {
    pub fn new(dx: S, values: &[S]) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two samples");
        let mut delta = vec![S::zero(); n - 1];
        for i in 0..n - 1 {
            delta[i] = (values[i + 1] - values[i]) / dx;
        }
        let mut m = vec![S::zero(); n];
        // one-sided parabolic endpoint slopes (shape-limited), second order
        let endpoint = |d0: S, d1: S| -> S {
            let mut e = (S::of(3.0) * d0 - d1) * S::of(0.5);
            if e * d0 <= S::zero() {
                e = S::zero();
            } else if d0 * d1 <= S::zero() && e.abs() > S::of(3.0) * d0.abs() {
                e = S::of(3.0) * d0;
            }
            e
        };
        m[0] = if n > 2 { endpoint(delta[0], delta[1]) } else { delta[0] };
        m[n - 1] = if n > 2 { endpoint(delta[n - 2], delta[n - 3]) } else { delta[n - 2] };
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= S::zero() {
                S::zero()
            } else {
                (delta[i - 1] + delta[i]) * S::of(0.5)
            };
        }
        // Fritsch-Carlson limiter keeps the interpolant monotone on each cell.
        for i in 0..n - 1 {
            if delta[i] == S::zero() {
                m[i] = S::zero();
                m[i + 1] = S::zero();
            } else {
                let alpha = m[i] / delta[i];
                let beta = m[i + 1] / delta[i];
                let s = alpha * alpha + beta * beta;
                if s > S::of(9.0) {
                    let tau = S::of(3.0) / s.sqrt();
                    m[i] = tau * alpha * delta[i];
                    m[i + 1] = tau * beta * delta[i];
                }
            }
        }
        Self { dx, values: values.to_vec(), slopes: m }
    }

    pub fn eval(&self, x: S) -> S {
        let n = self.values.len();
        if x <= S::zero() {
            return self.values[0];
        }
        let idx = (x / self.dx).floor().to_f64_lossy() as usize;
        if idx >= n - 1 {
            return self.values[n - 1];
        }
        let x0 = S::of(idx as f64) * self.dx;
        let t = (x - x0) / self.dx;
        let (y0, y1) = (self.values[idx], self.values[idx + 1]);
        let (m0, m1) = (self.slopes[idx] * self.dx, self.slopes[idx + 1] * self.dx);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = S::of(2.0) * t3 - S::of(3.0) * t2 + S::one();
        let h10 = t3 - S::of(2.0) * t2 + t;
        let h01 = S::of(-2.0) * t3 + S::of(3.0) * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }
}

/// Least-squares straight line through (x, y): returns (slope, intercept).
pub fn line_fit<S: Real>(xs: &[S], ys: &[S]) -> (S, S) {
    assert_eq!(xs.len(), ys.len());
    let n = S::of(xs.len() as f64);
    let sx: S = xs.iter().copied().sum();
    let sy: S = ys.iter().copied().sum();
    let sxx: S = xs.iter().map(|&x| x * x).sum();
    let sxy: S = xs.iter().zip(ys).map(|(&x, &y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Log-slope of a positive sequence near its end: fits ln y against ln x.
pub fn tail_log_slope<S: Real>(xs: &[S], ys: &[S]) -> Option<S> {
    if xs.len() < 3 || ys.iter().any(|&y| y <= S::zero()) {
        return None;
    }
    let lx: Vec<S> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<S> = ys.iter().map(|&y| y.ln()).collect();
    Some(line_fit(&lx, &ly).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_roundtrip() {
        let n = 64;
        let sub = vec![-1.0f64; n - 1];
        let sup = vec![-1.0f64; n - 1];
        let diag = vec![2.5f64; n];
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x[i];
            if i > 0 {
                rhs[i] += sub[i - 1] * x[i - 1];
            }
            if i < n - 1 {
                rhs[i] += sup[i] * x[i + 1];
            }
        }
        let sol = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_exact_on_polynomial() {
        let f = |x: f64| 3.0 * x * x + x;
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12);
        assert!((v - 10.0).abs() < 1e-10);
    }

    #[test]
    fn brent_finds_sqrt2() {
        let f = |x: f64| x * x - 2.0;
        let r = brent(1.0, 2.0, f(1.0), f(2.0), f, 1e-14, 200);
        assert!((r - 2f64.sqrt()).abs() < 1e-16_f64.max(1e-12));
    }

    #[test]
    fn monotone_cubic_preserves_positivity() {
        let vals: Vec<f64> = (0..50).map(|i| (-(i as f64) * 0.3).exp()).collect();
        let interp = MonotoneCubic::new(0.5, &vals);
        let mut x = 0.0;
        while x < 24.0 {
            assert!(interp.eval(x) > 0.0, "negative at {x}");
            x += 0.037;
        }
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let (s, b) = line_fit(&xs, &ys);
        assert!((s - 3.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12);
    }
}
