//! Piecewise quintic Hermite interpolation from (y, y', y'') node data.

/// Locate `x` in a sorted grid: returns `i` with `grid[i] <= x <= grid[i+1]`.
pub fn locate(grid: &[f64], x: f64) -> usize {
    let n = grid.len();
    match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

/// Value, first and second derivative of the quintic Hermite interpolant.
pub fn quintic_hermite(
    x0: f64,
    x1: f64,
    y0: [f64; 3],
    y1: [f64; 3],
    x: f64,
) -> [f64; 3] {
    let h = x1 - x0;
    let s = (x - x0) / h;
    // basis on [0,1] with derivatives scaled by h
    let (p0, p1, p2) = (y0[0], y0[1] * h, y0[2] * h * h);
    let (q0, q1, q2) = (y1[0], y1[1] * h, y1[2] * h * h);
    // coefficients of the quintic a0 + a1 s + ... + a5 s^5
    let a0 = p0;
    let a1 = p1;
    let a2 = 0.5 * p2;
    let a3 = -10.0 * p0 - 6.0 * p1 - 1.5 * p2 + 10.0 * q0 - 4.0 * q1 + 0.5 * q2;
    let a4 = 15.0 * p0 + 8.0 * p1 + 1.5 * p2 - 15.0 * q0 + 7.0 * q1 - q2;
    let a5 = -6.0 * p0 - 3.0 * p1 - 0.5 * p2 + 6.0 * q0 - 3.0 * q1 + 0.5 * q2;
    let v = a0 + s * (a1 + s * (a2 + s * (a3 + s * (a4 + s * a5))));
    let d1 = a1 + s * (2.0 * a2 + s * (3.0 * a3 + s * (4.0 * a4 + s * 5.0 * a5)));
    let d2 = 2.0 * a2 + s * (6.0 * a3 + s * (12.0 * a4 + s * 20.0 * a5));
    [v, d1 / h, d2 / (h * h)]
}

/// Linear interpolation on a sorted grid, clamped at the ends.
pub fn linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    if x <= grid[0] {
        return values[0];
    }
    let n = grid.len();
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let i = locate(grid, x);
    let w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quintic() {
        let p = |x: f64| [
            x.powi(5) - 2.0 * x.powi(3) + x,
            5.0 * x.powi(4) - 6.0 * x * x + 1.0,
            20.0 * x.powi(3) - 12.0 * x,
        ];
        let (a, b) = (0.3, 1.1);
        for k in 0..=10 {
            let x = a + (b - a) * k as f64 / 10.0;
            let got = quintic_hermite(a, b, p(a), p(b), x);
            let want = p(x);
            for j in 0..3 {
                assert!((got[j] - want[j]).abs() < 1e-12, "{j}: {} vs {}", got[j], want[j]);
            }
        }
    }

    #[test]
    fn locate_brackets() {
        let g = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(locate(&g, 0.0), 0);
        assert_eq!(locate(&g, 1.5), 1);
        assert_eq!(locate(&g, 3.0), 2);
    }
}
