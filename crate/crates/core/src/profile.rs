//! Radial forward self-similar profiles
//!
//! `v'' + ((N-1)/r + r/2) v' + h(v) = 0`, `v(0) = α`, `v'(0) = 0`
//!
//! with `h(v) = v/(p-1) + |v|^{p-1} v` (power) or `h(v) = 1 + e^v`
//! (exponential).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp::{locate, quintic_hermite};
use crate::numerics::ode::{dopri5, OdeOptions};

/// Radius at which the series expansion hands over to the integrator.
pub const SERIES_RADIUS: f64 = 1e-4;
pub const DEFAULT_R_MAX: f64 = 50.0;
pub const MAX_R_MAX: f64 = 400.0;
/// Default relative tolerance for the extrapolated limit.
pub const DEFAULT_ELL_TOL: f64 = 1e-6;

const POSITIVITY_FLOOR: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Power { p: f64 },
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileModel {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub n_dim: usize,
}

impl ProfileModel {
    pub fn power(p: f64, n_dim: usize) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Config(format!("profile exponent must exceed 1, got {p}")));
        }
        Self::new(ProfileKind::Power { p }, n_dim)
    }

    pub fn exp(n_dim: usize) -> Result<Self> {
        Self::new(ProfileKind::Exp, n_dim)
    }

    fn new(kind: ProfileKind, n_dim: usize) -> Result<Self> {
        if n_dim == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(Self { kind, n_dim })
    }

    /// `p > 1 + 2/N`, required for positive slowly decaying profiles.
    pub fn is_fujita_supercritical(&self) -> bool {
        match self.kind {
            ProfileKind::Power { p } => p > 1.0 + 2.0 / self.n_dim as f64,
            ProfileKind::Exp => false,
        }
    }

    /// Zeroth-order source term `h(v)`.
    pub fn source(&self, v: f64) -> f64 {
        match self.kind {
            ProfileKind::Power { p } => v / (p - 1.0) + v.abs().powf(p - 1.0) * v,
            ProfileKind::Exp => 1.0 + v.exp(),
        }
    }

    /// `v''` from the ODE.
    pub fn second_derivative(&self, r: f64, v: f64, dv: f64) -> f64 {
        let n = self.n_dim as f64;
        -((n - 1.0) / r + 0.5 * r) * dv - self.source(v)
    }

    /// The quantity whose limit defines `ℓ`: `r^{2/(p-1)} v` or `2 ln r + v`.
    pub fn tracked(&self, r: f64, v: f64) -> f64 {
        match self.kind {
            ProfileKind::Power { p } => r.powf(2.0 / (p - 1.0)) * v,
            ProfileKind::Exp => 2.0 * r.ln() + v,
        }
    }

    /// Quantity bounded uniformly in the decay estimates:
    /// `(1+r)^{2/(p-1)} v / α` or `2 ln(1+r) + v - α`.
    pub fn decay_quantity(&self, r: f64, v: f64, alpha: f64) -> f64 {
        match self.kind {
            ProfileKind::Power { p } => (1.0 + r).powf(2.0 / (p - 1.0)) * v / alpha,
            ProfileKind::Exp => 2.0 * (1.0 + r).ln() + v - alpha,
        }
    }
}

/// A solved profile stored on its adaptive grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub model: ProfileModel,
    pub alpha: f64,
    pub tol: f64,
    /// Requested outer radius; the grid stops earlier at a sign change.
    pub r_max: f64,
    pub r_grid: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
    pub ell: Option<f64>,
    pub positive_on_grid: bool,
    /// First radius where a power profile reaches zero.
    pub crossing: Option<f64>,
    pub max_local_error: f64,
}

impl SelfSimilarProfile {
    pub fn r_end(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    /// `[v, v', v'']` at radius `r`.
    pub fn eval(&self, r: f64) -> Result<[f64; 3]> {
        let r_end = self.r_end();
        if !(r >= 0.0) || r > r_end * (1.0 + 1e-14) {
            return Err(Error::OutOfGrid { r, r_max: r_end });
        }
        let r = r.min(r_end);
        let i = locate(&self.r_grid, r);
        let node = |k: usize| [self.v[k], self.dv[k], self.d2v[k]];
        Ok(quintic_hermite(
            self.r_grid[i],
            self.r_grid[i + 1],
            node(i),
            node(i + 1),
            r,
        ))
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.eval(r)?[0])
    }

    /// Extrapolate `ℓ` and store it; see [`estimate_ell`].
    pub fn estimate_ell(&mut self, tol: f64) -> Result<f64> {
        let ell = estimate_ell(self, tol)?;
        self.ell = Some(ell);
        Ok(ell)
    }
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions {
        rel_tol: tol,
        abs_tol: tol * 1e-2,
        h_init: 1e-4,
        h_max: 0.1,
        ..OdeOptions::default()
    }
}

/// Solve the profile IVP on `[0, r_max]`.
///
/// Power profiles stop at the first zero of `v`.
pub fn solve_profile(
    model: ProfileModel,
    alpha: f64,
    r_max: f64,
    tol: f64,
) -> Result<SelfSimilarProfile> {
    if let ProfileKind::Power { .. } = model.kind {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("power profile needs alpha > 0, got {alpha}")));
        }
    }
    if !(r_max > SERIES_RADIUS) || !(tol > 0.0) {
        return Err(Error::Config(format!("invalid r_max {r_max} or tol {tol}")));
    }
    let n = model.n_dim as f64;
    let h0 = model.source(alpha);
    let r0 = SERIES_RADIUS;
    let y0 = [alpha - h0 * r0 * r0 / (2.0 * n), -h0 * r0 / n];
    let is_power = matches!(model.kind, ProfileKind::Power { .. });
    let traj = dopri5(
        |r, y: &[f64; 2]| [y[1], model.second_derivative(r, y[0], y[1])],
        r0,
        y0,
        r_max,
        ode_options(tol),
        |_, y| is_power && y[0] <= POSITIVITY_FLOOR,
    )
    .map_err(|e| Error::StepFailure { r: e.t, step: e.h })?;

    let mut r_grid = Vec::with_capacity(traj.t.len() + 1);
    let mut v = Vec::with_capacity(traj.t.len() + 1);
    let mut dv = Vec::with_capacity(traj.t.len() + 1);
    let mut d2v = Vec::with_capacity(traj.t.len() + 1);
    r_grid.push(0.0);
    v.push(alpha);
    dv.push(0.0);
    d2v.push(-h0 / n);
    for (r, y) in traj.t.iter().zip(&traj.y) {
        r_grid.push(*r);
        v.push(y[0]);
        dv.push(y[1]);
        d2v.push(model.second_derivative(*r, y[0], y[1]));
    }
    let crossing = if is_power && *v.last().unwrap() <= POSITIVITY_FLOOR {
        Some(*r_grid.last().unwrap())
    } else {
        None
    };
    Ok(SelfSimilarProfile {
        model,
        alpha,
        tol,
        r_max,
        r_grid,
        v,
        dv,
        d2v,
        ell: None,
        positive_on_grid: crossing.is_none(),
        crossing,
        max_local_error: traj.max_local_error,
    })
}

/// Fit `a + b x + c x²` by least squares and return `a`.
fn quadratic_intercept(x: &[f64], y: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (xi, yi) in x.iter().zip(y) {
        let t = xi / scale;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            rhs[i] += basis[i] * yi;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..3 {
            let k = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= k * m[col][j];
            }
            rhs[row] -= k * rhs[col];
        }
    }
    let mut sol = [0.0; 3];
    for i in (0..3).rev() {
        let mut acc = rhs[i];
        for j in i + 1..3 {
            acc -= m[i][j] * sol[j];
        }
        sol[i] = acc / m[i][i];
    }
    sol[0]
}

fn window_limit(profile: &SelfSimilarProfile, lo: f64, hi: f64) -> Option<f64> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (r, v) in profile.r_grid.iter().zip(&profile.v) {
        if *r >= lo && *r <= hi {
            x.push(r.powi(-2));
            y.push(profile.model.tracked(*r, *v));
        }
    }
    if x.len() < 6 {
        return None;
    }
    Some(quadratic_intercept(&x, &y))
}

/// Extrapolated large-radius limit `ℓ`.
///
/// The tracked quantity approaches its limit with corrections in powers of
/// `r^{-2}`; the fit is done on the last decade `[r_end/10, r_end]` and
/// repeated on `[r_end/20, r_end/2]`. Disagreement beyond
/// `tol·max(|ℓ|, 1)` (exponential) or `tol·|ℓ|` (power) is reported as
/// [`Error::NotConverged`].
pub fn estimate_ell(profile: &SelfSimilarProfile, tol: f64) -> Result<f64> {
    let (main, spread) = ell_fit(profile).ok_or_else(|| Error::NotConverged {
        spread: f64::INFINITY,
        tol,
        r_max: profile.r_end(),
    })?;
    let scale = match profile.model.kind {
        ProfileKind::Power { .. } => main.abs(),
        ProfileKind::Exp => main.abs().max(1.0),
    };
    if !(spread <= tol * scale) {
        return Err(Error::NotConverged {
            spread,
            tol,
            r_max: profile.r_end(),
        });
    }
    Ok(main)
}

/// Window fits behind [`estimate_ell`]: `(limit, spread)`, or `None` when the
/// profile changed sign or the grid is too short.
pub fn ell_fit(profile: &SelfSimilarProfile) -> Option<(f64, f64)> {
    if !profile.positive_on_grid {
        return None;
    }
    let r_end = profile.r_end();
    let main = window_limit(profile, r_end / 10.0, r_end)?;
    let shifted = window_limit(profile, r_end / 20.0, r_end / 2.0)?;
    Some((main, (main - shifted).abs()))
}

/// Solve and extract `ℓ`, doubling `r_max` from 50 up to 400 while the
/// extrapolation has not settled.
pub fn solve_with_ell(
    model: ProfileModel,
    alpha: f64,
    tol: f64,
    ell_tol: f64,
) -> Result<SelfSimilarProfile> {
    let mut r_max = DEFAULT_R_MAX;
    loop {
        let mut prof = solve_profile(model, alpha, r_max, tol)?;
        match prof.estimate_ell(ell_tol) {
            Ok(_) => return Ok(prof),
            Err(e @ Error::NotConverged { .. }) => {
                if !prof.positive_on_grid || r_max * 2.0 > MAX_R_MAX {
                    return Err(e);
                }
                r_max *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum AlphaStar {
    /// `alpha_ok` satisfies the predicate, `alpha_fail` does not.
    Bracket { alpha_ok: f64, alpha_fail: f64 },
    /// The predicate still holds at `alpha_max`.
    Unbounded { alpha_max: f64 },
}

/// Settings for the positivity predicate used by [`find_alpha_star`].
#[derive(Debug, Clone, Copy)]
pub struct PredicateOptions {
    pub r_max: f64,
    pub tol: f64,
    /// Absolute tolerance on `ℓ`; near `α_*` the limit itself tends to zero,
    /// so a relative criterion would fail before positivity does.
    pub ell_abs_tol: f64,
}

impl Default for PredicateOptions {
    fn default() -> Self {
        Self {
            r_max: 200.0,
            tol: 1e-10,
            ell_abs_tol: 1e-8,
        }
    }
}

/// "Positive on `[0, r_max]` with a converged `ℓ > 0`."
///
/// A positive profile whose fit has not settled is retried with `r_max`
/// doubled, up to four times the requested radius; in one dimension the
/// fit spread at `r_max = 200` sits near `1e-7 ℓ`.
pub fn positive_with_limit(model: ProfileModel, alpha: f64, opts: PredicateOptions) -> Result<bool> {
    let mut r_max = opts.r_max;
    loop {
        let prof = solve_profile(model, alpha, r_max, opts.tol)?;
        if !prof.positive_on_grid {
            return Ok(false);
        }
        match ell_fit(&prof) {
            Some((ell, spread)) if spread <= opts.ell_abs_tol => return Ok(ell > opts.ell_abs_tol),
            _ if r_max < 4.0 * opts.r_max => r_max *= 2.0,
            _ => return Ok(false),
        }
    }
}

/// Bisect the largest `α` with a positive slowly decaying profile.
pub fn find_alpha_star(model: ProfileModel, alpha_max: f64, tol: f64) -> Result<AlphaStar> {
    find_alpha_star_with(model, alpha_max, tol, PredicateOptions::default())
}

pub fn find_alpha_star_with(
    model: ProfileModel,
    alpha_max: f64,
    tol: f64,
    opts: PredicateOptions,
) -> Result<AlphaStar> {
    if !model.is_fujita_supercritical() {
        return Err(Error::Hypothesis(
            "alpha_* search needs a power profile with p > 1 + 2/N".into(),
        ));
    }
    let pred = |a: f64| positive_with_limit(model, a, opts);
    if pred(alpha_max)? {
        return Ok(AlphaStar::Unbounded { alpha_max });
    }
    let mut hi = alpha_max;
    let mut lo = alpha_max / 2.0;
    while !pred(lo)? {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(Error::InvalidBracket(
                "no admissible alpha found above 1e-12".into(),
            ));
        }
    }
    while hi - lo > tol * lo {
        let mid = (lo * hi).sqrt();
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(AlphaStar::Bracket {
        alpha_ok: lo,
        alpha_fail: hi,
    })
}

/// Empirical constant of the uniform decay estimate over `alphas`.
///
/// Each supremum is taken on `[0, r_max]` and on `[0, 2 r_max]`; growth of
/// the maximum by more than 1% is reported as [`Error::Unbounded`].
pub fn uniform_decay_check(
    model: ProfileModel,
    alphas: &[f64],
    alpha0: f64,
    r_max: f64,
    tol: f64,
) -> Result<f64> {
    if alphas.is_empty() {
        return Err(Error::Config("no alpha values supplied".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a < alpha0)) {
        return Err(Error::Config(format!("alpha {a} is not below alpha0 = {alpha0}")));
    }
    let sup_for = |r_max: f64| -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for &a in alphas {
            let prof = solve_profile(model, a, r_max, tol)?;
            if !prof.positive_on_grid {
                return Err(Error::Hypothesis(format!(
                    "profile with alpha = {a} changes sign at r = {:?}",
                    prof.crossing
                )));
            }
            for (r, v) in prof.r_grid.iter().zip(&prof.v) {
                best = best.max(model.decay_quantity(*r, *v, a));
            }
        }
        Ok(best)
    };
    let coarse = sup_for(r_max)?;
    let fine = sup_for(2.0 * r_max)?;
    if (fine - coarse).abs() > 0.01 * coarse.abs().max(1e-300) {
        return Err(Error::Unbounded { coarse, fine });
    }
    Ok(fine)
}
