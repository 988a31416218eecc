//! Dormand–Prince 5(4) integrator for small fixed-size systems.

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: 1e-4,
            h_max: 0.1,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// Accepted steps of an integration, including the starting point.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub rejected: usize,
    /// Largest accepted local error estimate, in absolute units.
    pub max_local_error: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepFailed {
    pub t: f64,
    pub h: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], terms: &[(f64, &[f64; D])], h: f64) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t_end`.
///
/// `stop` is consulted after every accepted step and may end the
/// integration early (for example on a detected sign change).
pub fn dopri5<const D: usize, F, S>(
    rhs: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: OdeOptions,
    mut stop: S,
) -> Result<Trajectory<D>, StepFailed>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
    S: FnMut(f64, &[f64; D]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0],
        rejected: 0,
        max_local_error: 0.0,
    };
    let mut k1 = rhs(t, &y);
    let mut steps = 0;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(StepFailed { t, h });
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = rhs(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = rhs(
            t + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = rhs(
            t + h,
            &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
        );
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = rhs(t + h, &y_new);
        let mut err = 0.0f64;
        let mut abs_err = 0.0f64;
        for i in 0..D {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
            abs_err = abs_err.max(e.abs());
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            traj.t.push(t);
            traj.y.push(y);
            traj.max_local_error = traj.max_local_error.max(abs_err);
            if stop(t, &y) {
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(opts.h_max);
        } else {
            traj.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < opts.h_min {
                return Err(StepFailed { t, h });
            }
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let traj = dopri5(
            |_t, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        let y = traj.y.last().unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        assert_eq!(*traj.t.last().unwrap(), 10.0);
    }

    #[test]
    fn stop_callback_ends_early() {
        let traj = dopri5(
            |_t, y: &[f64; 1]| [-1.0 + 0.0 * y[0]],
            0.0,
            [1.0],
            5.0,
            OdeOptions::default(),
            |_, y| y[0] < 0.0,
        )
        .unwrap();
        assert!(*traj.t.last().unwrap() < 5.0);
        assert!(traj.y.last().unwrap()[0] < 0.0);
    }
}
