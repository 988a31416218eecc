#![allow(dead_code)]

pub mod oracles;

use qss_core::nonlinearity::Nonlinearity;
use qss_core::quasi::{residual_triple, w_from_v, Comparison};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth radial test function `c + a·e^{-b r²}(1 + e r²)` evaluated at a
/// sample point `(r, t)`.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub r: f64,
    pub t: f64,
}

impl TestFunction {
    pub fn eval(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.c + self.a * (-self.b * r2).exp() * (1.0 + self.e * r2)
    }
}

pub struct IdentityPair {
    pub name: &'static str,
    pub f: Nonlinearity,
    pub g: Comparison,
    pub n_dim: usize,
    pub c_range: (f64, f64),
}

pub fn identity_pairs() -> Vec<IdentityPair> {
    vec![
        IdentityPair {
            name: "power2/power3",
            f: Nonlinearity::power(2.0).unwrap(),
            g: Comparison::Power { p: 3.0 },
            n_dim: 2,
            c_range: (0.4, 1.0),
        },
        IdentityPair {
            name: "exp_inverse/power2",
            f: Nonlinearity::exp_inverse(),
            g: Comparison::Power { p: 2.0 },
            n_dim: 1,
            c_range: (0.4, 1.2),
        },
        IdentityPair {
            name: "log_power/exp",
            f: Nonlinearity::log_power(3.0, 1.0).unwrap(),
            g: Comparison::Exp,
            n_dim: 3,
            c_range: (-3.5, -1.5),
        },
    ]
}

/// Values of `w` and `u` on every stencil the identity check touches.
fn stencil_values(pair: &IdentityPair, tf: &TestFunction, h: f64) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for dr in [-h, 0.0, h] {
        out.push(w_from_v(&pair.f, &pair.g, tf.eval(tf.r + dr)).ok()?);
    }
    let x = tf.r * (tf.t + 1.0).sqrt();
    for (dx, dt) in [(-h, 0.0), (0.0, 0.0), (h, 0.0), (0.0, -h), (0.0, h)] {
        let tt = tf.t + dt;
        let v = tf.eval((x + dx) / (tt + 1.0).sqrt());
        let ln_sigma = (tt + 1.0).ln() + pair.g.ln_big_g(v);
        out.push(pair.f.f_inverse_ln(ln_sigma).ok()?);
    }
    Some(out)
}

/// Draw `count` test functions whose stencils stay on one side of the
/// nonlinearity's blend point (where `f` is only C²).
pub fn draw_test_functions(pair: &IdentityPair, count: usize, seed: u64, h: f64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = pair.f.formula_limit();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let tf = TestFunction {
            c: rng.gen_range(pair.c_range.0..pair.c_range.1),
            a: rng.gen_range(0.05..0.4),
            b: rng.gen_range(0.3..1.5),
            e: rng.gen_range(0.0..0.5),
            r: rng.gen_range(0.3..2.0),
            t: rng.gen_range(0.2..2.0),
        };
        let Some(vals) = stencil_values(pair, &tf, h) else {
            continue;
        };
        let below = vals.iter().all(|&s| s < limit);
        let above = vals.iter().all(|&s| s > limit);
        if below || above {
            out.push(tf);
        }
    }
    out
}

/// Observed order of the largest pairwise gap under halving of `h`.
pub fn identity_order(pair: &IdentityPair, tf: &TestFunction, h: f64) -> (f64, f64, f64) {
    let gap = |h: f64| {
        residual_triple(&pair.f, &pair.g, |r| tf.eval(r), pair.n_dim, tf.r, tf.t, h)
            .unwrap()
            .max_gap()
    };
    let (g1, g2) = (gap(h), gap(0.5 * h));
    ((g1 / g2).log2(), g1, g2)
}
