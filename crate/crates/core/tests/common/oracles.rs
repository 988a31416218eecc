//! Slow reference implementations, independent of the production numerics.

#![allow(dead_code)]

use qss_core::Nonlinearity;

/// 10-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// `ln ∫_s^∞ dσ/f(σ)` by composite Gauss-Legendre on panels graded
/// geometrically in `σ − s` from `1e-12 s` up to `σ = 1e16·max(s, 1)`.
/// No tail model: the truncation is negligible for the integrands used.
pub fn ln_f_transform(f: &Nonlinearity, s: f64) -> f64 {
    let top = 1e16 * s.max(1.0);
    let mut edges = vec![s];
    let mut d = 1e-12 * s;
    while s + d < top {
        edges.push(s + d);
        d *= 10f64.powf(1.0 / 60.0);
    }
    edges.push(top);
    // scale by the integrand at s, the largest value for increasing f
    let shift = -f.ln_f(s);
    let mut sum = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for k in 0..5 {
            for sign in [-1.0, 1.0] {
                let x = mid + sign * half * GL_X[k];
                sum += GL_W[k] * half * (-f.ln_f(x) - shift).exp();
            }
        }
    }
    sum.ln() + shift
}

/// `F⁻¹(e^{ln_sigma})` by bisection in `ln s` on the oracle transform.
pub fn f_inverse_ln(f: &Nonlinearity, ln_sigma: f64, s_lo: f64, s_hi: f64, rel_tol: f64) -> f64 {
    let (mut a, mut b) = (s_lo.ln(), s_hi.ln());
    assert!(ln_f_transform(f, a.exp()) > ln_sigma && ln_f_transform(f, b.exp()) < ln_sigma);
    while b - a > rel_tol {
        let m = 0.5 * (a + b);
        if ln_f_transform(f, m.exp()) > ln_sigma {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}

/// `r^{2/(p−1)} v(r)` for the power profile ODE
/// `v'' + ((N−1)/r + r/2)v' + v/(p−1) + v^p = 0`, `v(0) = α`, `v'(0) = 0`,
/// by fixed-step RK4, sampled at the given radii.
pub fn power_profile_tracked(p: f64, n_dim: usize, alpha: f64, h: f64, radii: &[f64]) -> Vec<f64> {
    let n = n_dim as f64;
    let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] {
        let src = y[0] / (p - 1.0) + y[0].abs().powf(p - 1.0) * y[0];
        [y[1], -((n - 1.0) / r + 0.5 * r) * y[1] - src]
    };
    // Taylor start: v ≈ α − h(α) r²/(2N)
    let src0 = alpha / (p - 1.0) + alpha.powf(p);
    let mut r = h;
    let mut y = [alpha - src0 * r * r / (2.0 * n), -src0 * r / n];
    let mut out = Vec::new();
    for &target in radii {
        while r < target - 1e-12 {
            let step = h.min(target - r);
            let k1 = rhs(r, y);
            let k2 = rhs(r + 0.5 * step, [y[0] + 0.5 * step * k1[0], y[1] + 0.5 * step * k1[1]]);
            let k3 = rhs(r + 0.5 * step, [y[0] + 0.5 * step * k2[0], y[1] + 0.5 * step * k2[1]]);
            let k4 = rhs(r + step, [y[0] + step * k3[0], y[1] + step * k3[1]]);
            for i in 0..2 {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            r += step;
        }
        out.push(r.powf(2.0 / (p - 1.0)) * y[0]);
    }
    out
}

/// `ℓ` from samples at `R` and `2R`, eliminating the `R⁻²` correction.
pub fn power_ell(p: f64, n_dim: usize, alpha: f64, r_far: f64) -> f64 {
    let v = power_profile_tracked(p, n_dim, alpha, 2e-3, &[r_far, 2.0 * r_far]);
    (4.0 * v[1] - v[0]) / 3.0
}

/// `(4πt)^{-N/2} ∫ e^{−|x|²/4t} u(|x|) dx` at the origin by the trapezoid
/// rule in the radial variable on a uniform grid reaching `12√t`.
pub fn heat_at_origin<U: Fn(f64) -> f64>(n_dim: usize, u: U, t: f64, points: usize) -> f64 {
    let n = n_dim as f64;
    let r_end = 12.0 * t.sqrt();
    let h = r_end / points as f64;
    // surface area of the unit sphere in R^N
    let area = 2.0 * std::f64::consts::PI.powf(0.5 * n) / gamma_fn(0.5 * n);
    let mut sum = 0.0;
    for i in 0..=points {
        let r = i as f64 * h;
        let w = if i == 0 || i == points { 0.5 } else { 1.0 };
        sum += w * (-r * r / (4.0 * t)).exp() * r.powf(n - 1.0) * u(r);
    }
    area * sum * h / (4.0 * std::f64::consts::PI * t).powf(0.5 * n)
}

/// Γ at half-integers and integers.
fn gamma_fn(x: f64) -> f64 {
    if (x - 0.5).abs() < 1e-12 {
        return std::f64::consts::PI.sqrt();
    }
    if (x - 1.0).abs() < 1e-12 {
        return 1.0;
    }
    (x - 1.0) * gamma_fn(x - 1.0)
}
