//! Bracketed scalar root finding.

/// Outcome of a bracketed search.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Brent's method on `[a, b]`; `f(a)` and `f(b)` must differ in sign.
///
/// Returns `None` when the endpoints do not bracket a sign change.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<Root> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(Root { x: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(Root { x: b, residual: fb, iterations: iter });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(Root { x: b, residual: fb, iterations: max_iter })
}

/// Newton iteration safeguarded by a sign-change bracket `[lo, hi]`.
///
/// `fdf` returns `(g(x), g'(x))`. Steps leaving the bracket fall back to
/// bisection, so convergence is guaranteed once a bracket exists.
pub fn safeguarded_newton<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<Root> {
    let (glo, _) = fdf(lo);
    let (ghi, _) = fdf(hi);
    if glo == 0.0 {
        return Some(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if ghi == 0.0 {
        return Some(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    let lo_negative = glo < 0.0;
    let mut x = 0.5 * (lo + hi);
    let mut last = (f64::NAN, 0);
    for iter in 1..=max_iter {
        let (g, dg) = fdf(x);
        last = (g, iter);
        if g == 0.0 {
            return Some(Root { x, residual: 0.0, iterations: iter });
        }
        if (g < 0.0) == lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if dg.is_finite() && dg != 0.0 && newton > lo.min(hi) && newton < lo.max(hi) {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= xtol || (hi - lo).abs() <= xtol {
            let (g, _) = fdf(x);
            return Some(Root { x, residual: g, iterations: iter });
        }
    }
    Some(Root { x, residual: last.0, iterations: last.1 })
}

/// Plain bisection; used where a derivative-free, tolerance-exact
/// search is preferred over speed.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return None;
    }
    while (b - a).abs() > xtol {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
