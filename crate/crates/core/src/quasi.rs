//! Quasi self-similar transformations.
//!
//! A profile `v` of the comparison problem with nonlinearity `g` is carried
//! to `w = F⁻¹[G(v)]` and lifted to `u(x,t) = F⁻¹[(t+1) G(v(|x|/√(t+1)))]`.
//! With `g(s) = s^{p*}` and `g(s) = s^{p_*}` or `e^s` this yields the super-
//! and subsolutions bounding solutions with small initial data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, Q_FLOOR_TOL};
use crate::numerics::geomspace;
use crate::profile::{solve_profile, ProfileKind, ProfileModel, SelfSimilarProfile};

/// Comparison nonlinearity `g` with closed-form transform `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Comparison {
    /// `g(s) = s^p`, `G(s) = s^{-(p-1)}/(p-1)`.
    Power { p: f64 },
    /// `g(s) = e^s`, `G(s) = e^{-s}`.
    Exp,
}

impl Comparison {
    pub fn from_profile(model: &ProfileModel) -> Self {
        match model.kind {
            ProfileKind::Power { p } => Comparison::Power { p },
            ProfileKind::Exp => Comparison::Exp,
        }
    }

    pub fn profile_model(&self, n_dim: usize) -> Result<ProfileModel> {
        match *self {
            Comparison::Power { p } => ProfileModel::power(p, n_dim),
            Comparison::Exp => ProfileModel::exp(n_dim),
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        match *self {
            Comparison::Power { p } => s.powf(p),
            Comparison::Exp => s.exp(),
        }
    }

    pub fn dg(&self, s: f64) -> f64 {
        match *self {
            Comparison::Power { p } => p * s.powf(p - 1.0),
            Comparison::Exp => s.exp(),
        }
    }

    pub fn ln_big_g(&self, s: f64) -> f64 {
        match *self {
            Comparison::Power { p } => -(p - 1.0) * s.ln() - (p - 1.0).ln(),
            Comparison::Exp => -s,
        }
    }

    pub fn big_g(&self, s: f64) -> f64 {
        self.ln_big_g(s).exp()
    }

    /// `g'(s) G(s)`, constant for both families.
    pub fn q_param(&self) -> f64 {
        match *self {
            Comparison::Power { p } => p / (p - 1.0),
            Comparison::Exp => 1.0,
        }
    }

    /// The same function as a [`Nonlinearity`].
    pub fn as_nonlinearity(&self) -> Nonlinearity {
        match *self {
            Comparison::Power { p } => Nonlinearity::power(p).expect("p > 1"),
            Comparison::Exp => Nonlinearity::exp_model(),
        }
    }
}

/// `w = F⁻¹[G(v)]`.
pub fn w_from_v(f: &Nonlinearity, g: &Comparison, v: f64) -> Result<f64> {
    if let Comparison::Power { .. } = g {
        if !(v > 0.0) {
            return Err(Error::Domain { s: v, floor: 0.0 });
        }
    }
    f.f_inverse_ln(g.ln_big_g(v))
}

/// Amplitude part of the quasi-scaling: `F⁻¹[λ^{-2} F(u)]`.
pub fn quasi_scale(f: &Nonlinearity, u: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("scale factor must be positive, got {lambda}")));
    }
    f.f_inverse_ln(f.ln_f_transform(u)? - 2.0 * lambda.ln())
}

/// Radial function with its first two derivatives.
pub trait RadialProfile {
    fn derivs(&self, r: f64) -> Result<[f64; 3]>;
}

impl RadialProfile for SelfSimilarProfile {
    fn derivs(&self, r: f64) -> Result<[f64; 3]> {
        self.eval(r)
    }
}

/// A profile lifted to a function of `(x, t)` through `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSolution {
    pub f: Nonlinearity,
    pub g: Comparison,
    pub profile: SelfSimilarProfile,
    pub q_param: f64,
}

impl LiftedSolution {
    pub fn new(f: Nonlinearity, profile: SelfSimilarProfile) -> Self {
        let g = Comparison::from_profile(&profile.model);
        Self {
            f,
            g,
            q_param: g.q_param(),
            profile,
        }
    }

    pub fn n_dim(&self) -> usize {
        self.profile.model.n_dim
    }

    /// `ln F(u(x,t)) = ln(t+1) + ln G(v(|x|/√(t+1)))`.
    pub fn ln_f_transform(&self, x: f64, t: f64) -> Result<f64> {
        let r = x.abs() / (t + 1.0).sqrt();
        let v = self.profile.value(r)?;
        Ok((t + 1.0).ln() + self.g.ln_big_g(v))
    }

    /// `u(x, t)`.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        self.f.f_inverse_ln(self.ln_f_transform(x, t)?)
    }

    /// `w(y) = F⁻¹[G(v(y))]`, the time-zero slice.
    pub fn w(&self, y: f64) -> Result<f64> {
        self.eval(y, 0.0)
    }

    /// Largest value over the lifted family, attained at `x = 0`, `t = 0`
    /// for a non-increasing profile.
    pub fn sup(&self) -> Result<f64> {
        w_from_v(&self.f, &self.g, self.profile.alpha)
    }
}

/// `[w, w', w'']` by the chain rule: `w' = f(w) v'/g(v)` and
/// `w'' = f'(w) w' v'/g + f(w)(v'' g - g' v'²)/g²`.
impl RadialProfile for LiftedSolution {
    fn derivs(&self, y: f64) -> Result<[f64; 3]> {
        let [v, dv, d2v] = self.profile.eval(y)?;
        let w = w_from_v(&self.f, &self.g, v)?;
        let (gv, dgv) = (self.g.g(v), self.g.dg(v));
        let fw = self.f.f(w);
        let dw = fw * dv / gv;
        let d2w = self.f.df(w) * dw * dv / gv + fw * (d2v * gv - dgv * dv * dv) / (gv * gv);
        Ok([w, dw, d2w])
    }
}

/// Evaluate the lift `F⁻¹[(t+1)·G(v(x/√(t+1)))]`.
pub fn lift(ls: &LiftedSolution, x: f64, t: f64) -> Result<f64> {
    ls.eval(x, t)
}

/// The three bracketed expressions of the transformation identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub u_form: f64,
    pub w_form: f64,
    pub v_form: f64,
}

impl Residuals {
    pub fn max_gap(&self) -> f64 {
        (self.u_form - self.w_form)
            .abs()
            .max((self.w_form - self.v_form).abs())
            .max((self.u_form - self.v_form).abs())
    }
}

fn central(fm: f64, f0: f64, fp: f64, h: f64) -> (f64, f64) {
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

/// Evaluate the u-, w- and v-forms of the identity at radius `r` and time
/// `t` using central differences of step `h`.
///
/// * u-form: `(1/f(u))[u_t − Δu − f(u) + (f'(u)/f(u))|∇u|²]` at `|x| = r√(t+1)`
/// * w-form: `(1/f(w))[−w'' − (N−1)w'/r − r w'/2 − f(w) − f(w)F(w) + (f'(w)/f(w))w'²]`
/// * v-form: the same with `g`, `G` and `v`.
pub fn residual_triple<V: Fn(f64) -> f64>(
    f: &Nonlinearity,
    g: &Comparison,
    v_fn: V,
    n_dim: usize,
    r: f64,
    t: f64,
    h: f64,
) -> Result<Residuals> {
    let n1 = n_dim as f64 - 1.0;
    // v-form
    let (vm, v0, vp) = (v_fn(r - h), v_fn(r), v_fn(r + h));
    let (dv, d2v) = central(vm, v0, vp, h);
    let gv = g.g(v0);
    let v_form = (-d2v - n1 / r * dv - 0.5 * r * dv - gv - gv * g.big_g(v0)
        + g.dg(v0) / gv * dv * dv)
        / gv;
    // w-form
    let w_at = |rr: f64| w_from_v(f, g, v_fn(rr));
    let (wm, w0, wp) = (w_at(r - h)?, w_at(r)?, w_at(r + h)?);
    let (dw, d2w) = central(wm, w0, wp, h);
    let fw = f.f(w0);
    let fbig_w = f.eval_f_transform(w0)?;
    let w_form = (-d2w - n1 / r * dw - 0.5 * r * dw - fw - fw * fbig_w + f.df(w0) / fw * dw * dw)
        / fw;
    // u-form
    let u_at = |x: f64, tt: f64| -> Result<f64> {
        let rr = x / (tt + 1.0).sqrt();
        f.f_inverse_ln((tt + 1.0).ln() + g.ln_big_g(v_fn(rr)))
    };
    let x = r * (t + 1.0).sqrt();
    let u0 = u_at(x, t)?;
    let (ux, uxx) = central(u_at(x - h, t)?, u0, u_at(x + h, t)?, h);
    let (ut, _) = central(u_at(x, t - h)?, u0, u_at(x, t + h)?, h);
    let fu = f.f(u0);
    let lap = uxx + n1 / x * ux;
    let u_form = (ut - lap - fu + f.df(u0) / fu * ux * ux) / fu;
    Ok(Residuals {
        u_form,
        w_form,
        v_form,
    })
}

/// Radial form of the quasi self-similar equation
/// `ΔW + (y/2)W' + f(W)F(W) + f(W) + W'²/(f(W)F(W))·[q − f'(W)F(W)]`.
pub fn selfsimilar_residual(
    f: &Nonlinearity,
    q_param: f64,
    w_fn: &dyn RadialProfile,
    y: f64,
    n_dim: usize,
) -> Result<f64> {
    let [w, dw, d2w] = w_fn.derivs(y)?;
    let n = n_dim as f64;
    let lap = if y > 0.0 { d2w + (n - 1.0) / y * dw } else { n * d2w };
    let ln_ff = f.ln_f(w) + f.ln_f_transform(w)?;
    let ff = ln_ff.exp();
    if !(ff > 0.0) || !ff.is_finite() {
        return Err(Error::SingularPoint { w });
    }
    let dff = (f.ln_df(w) + f.ln_f_transform(w)?).exp();
    Ok(lap + 0.5 * y * dw + ff + f.f(w) + dw * dw / ff * (q_param - dff))
}

/// `φ(s) = F⁻¹[G(s)]` with `φ'` and the convexity indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub phi: f64,
    /// `f(φ)/g(s)`.
    pub dphi: f64,
    /// `f'(φ)F(φ) − g'(s)G(s)`; nonnegative where `φ` is convex.
    pub convexity: f64,
}

pub fn phi_transform(f: &Nonlinearity, g: &Comparison, s: f64) -> Result<PhiValue> {
    let phi = w_from_v(f, g, s)?;
    Ok(PhiValue {
        phi,
        dphi: f.f(phi) / g.g(s),
        convexity: f.df_times_f_transform(phi)? - g.q_param(),
    })
}

/// Configuration for the super- and subsolution constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperSubConfig {
    /// Exponent `q` of `f` (taken as exactly 1 within the estimation floor).
    pub q: f64,
    pub n_dim: usize,
    /// `q* ∈ (q, 1 + N/2)`.
    pub q_upper: f64,
    /// `q_* ∈ (1, q)` for `q > 1`, exactly 1 when `q = 1`.
    pub q_lower: f64,
    /// Below this, `f'F ≤ q*`.
    pub s_upper: f64,
    /// Below this, `f'F ≥ q_*`.
    pub s_lower: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_max: f64,
    pub tol: f64,
}

pub fn default_q_upper(q: f64, n_dim: usize) -> f64 {
    q + 0.5 * (1.0 + n_dim as f64 / 2.0 - q)
}

pub fn default_q_lower(q: f64) -> f64 {
    if q > 1.0 {
        1.0 + 0.5 * (q - 1.0)
    } else {
        1.0
    }
}

/// Whether an estimated exponent is treated as `q = 1`.
pub fn is_unit_q(q: f64) -> bool {
    (q - 1.0).abs() <= Q_FLOOR_TOL
}

/// Direction of the inequality scanned by [`find_smallness_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// `f'F ≤ bound`.
    Upper,
    /// `f'F ≥ bound`.
    Lower,
}

/// Largest sampled `s` such that the inequality holds, with `margin`, at
/// every sampled point of `[s_min, s]` on a 400-point log-grid up to
/// `s_cap`. The grid starts at `10⁻⁶` (or the domain floor): below that
/// `ln F` is too large for `f'F` to resolve margins of order `s`, and the
/// limit `q` already governs.
pub fn find_smallness_threshold(
    f: &Nonlinearity,
    bound: f64,
    kind: Bound,
    margin: f64,
    s_cap: f64,
) -> Result<f64> {
    let s_min = f.domain_floor().max(S_SCAN_MIN);
    let mut best = None;
    for s in geomspace(s_min, s_cap, 400) {
        let val = f.df_times_f_transform(s)?;
        let ok = match kind {
            Bound::Upper => val <= bound - margin,
            Bound::Lower => val >= bound + margin,
        };
        if !ok {
            break;
        }
        best = Some(s);
    }
    best.ok_or_else(|| {
        Error::Hypothesis(format!(
            "f'F violates the {kind:?} bound {bound} already at s = {s_min}"
        ))
    })
}

/// Ends of the threshold scans.
const S_SCAN_MIN: f64 = 1e-6;
const S_SCAN_CAP: f64 = 10.0;

impl SuperSubConfig {
    /// Defaults: `q*` and `q_*` halfway into their intervals, smallness
    /// thresholds from a scan with a 1% margin, `α` and `β` halved from 1
    /// until the lifts stay below the thresholds.
    pub fn auto(f: &Nonlinearity, n_dim: usize) -> Result<Self> {
        let q_est = f.estimate_q()?.q;
        let q = if is_unit_q(q_est) { 1.0 } else { q_est };
        let q_upper = default_q_upper(q, n_dim);
        let q_lower = default_q_lower(q);
        Self::with_exponents(f, n_dim, q, q_upper, q_lower)
    }

    pub fn with_exponents(
        f: &Nonlinearity,
        n_dim: usize,
        q: f64,
        q_upper: f64,
        q_lower: f64,
    ) -> Result<Self> {
        let fujita = 1.0 + n_dim as f64 / 2.0;
        if !(q_upper > q && q_upper < fujita) {
            return Err(Error::Hypothesis(format!(
                "q_upper = {q_upper} must lie in (q, 1 + N/2) = ({q}, {fujita})"
            )));
        }
        if !(q_lower <= q + Q_FLOOR_TOL && q_lower >= 1.0) {
            return Err(Error::Hypothesis(format!(
                "q_lower = {q_lower} must lie in [1, q] with q = {q}"
            )));
        }
        let s_upper = find_smallness_threshold(
            f,
            q_upper,
            Bound::Upper,
            0.01 * (q_upper - q).abs(),
            S_SCAN_CAP,
        )?;
        let s_lower = find_smallness_threshold(
            f,
            q_lower,
            Bound::Lower,
            0.01 * (q - q_lower).abs(),
            S_SCAN_CAP,
        )?;
        let mut cfg = Self {
            q,
            n_dim,
            q_upper,
            q_lower,
            s_upper,
            s_lower,
            alpha: 1.0,
            beta: 1.0,
            r_max: 200.0,
            tol: 1e-10,
        };
        cfg.alpha = shrink_until(1.0, |a| {
            let g = cfg.upper_comparison();
            Ok(w_from_v(f, &g, a)? <= cfg.s_upper
                && solve_profile(g.profile_model(n_dim)?, a, cfg.r_max, cfg.tol)?.positive_on_grid)
        })?;
        cfg.beta = shrink_until(1.0, |b| {
            let g = cfg.lower_comparison();
            let b_q = cfg.beta_q(b);
            Ok(w_from_v(f, &g, b_q)? <= cfg.s_lower
                && solve_profile(g.profile_model(n_dim)?, b_q, cfg.r_max, cfg.tol)?
                    .positive_on_grid)
        })?;
        Ok(cfg)
    }

    /// `p* = q*/(q* − 1)`.
    pub fn p_upper(&self) -> f64 {
        self.q_upper / (self.q_upper - 1.0)
    }

    pub fn upper_comparison(&self) -> Comparison {
        Comparison::Power { p: self.p_upper() }
    }

    pub fn lower_comparison(&self) -> Comparison {
        if is_unit_q(self.q) {
            Comparison::Exp
        } else {
            Comparison::Power {
                p: self.q_lower / (self.q_lower - 1.0),
            }
        }
    }

    /// Profile start value `β_q`: `β` if `q > 1`, `ln β` if `q = 1`.
    pub fn beta_q(&self, beta: f64) -> f64 {
        if is_unit_q(self.q) {
            beta.ln()
        } else {
            beta
        }
    }
}

fn shrink_until<P: FnMut(f64) -> Result<bool>>(start: f64, mut pred: P) -> Result<f64> {
    let mut a = start;
    for _ in 0..200 {
        if pred(a)? {
            return Ok(a);
        }
        a *= 0.5;
    }
    Err(Error::Hypothesis(format!(
        "no admissible amplitude found down to {a:e}"
    )))
}

/// Supersolution `u_α = F⁻¹[(t+1) G(v_α)]` with `g(s) = s^{p*}`.
pub fn build_supersolution(f: &Nonlinearity, cfg: &SuperSubConfig) -> Result<LiftedSolution> {
    let g = cfg.upper_comparison();
    let profile = solve_profile(g.profile_model(cfg.n_dim)?, cfg.alpha, cfg.r_max, cfg.tol)?;
    let ls = LiftedSolution::new(f.clone(), profile);
    let sup = ls.sup()?;
    if sup > cfg.s_upper {
        return Err(Error::SmallnessViolated {
            sup,
            threshold: cfg.s_upper,
        });
    }
    Ok(ls)
}

/// Subsolution `u_β = F⁻¹[(t+1) G(v_β)]` with `g(s) = s^{p_*}` or `e^s`.
pub fn build_subsolution(f: &Nonlinearity, cfg: &SuperSubConfig) -> Result<LiftedSolution> {
    let g = cfg.lower_comparison();
    let profile = solve_profile(
        g.profile_model(cfg.n_dim)?,
        cfg.beta_q(cfg.beta),
        cfg.r_max,
        cfg.tol,
    )?;
    let ls = LiftedSolution::new(f.clone(), profile);
    let sup = ls.sup()?;
    if sup > cfg.s_lower {
        return Err(Error::SmallnessViolated {
            sup,
            threshold: cfg.s_lower,
        });
    }
    Ok(ls)
}

/// Largest `γ` for which the supersolution dominates
/// `F⁻¹[γ⁻¹(|x|²+1)]` at `t = 0`: `inf_r (r²+1)/G(v_α(r))`, including the
/// large-radius limit `(p*−1)·c_α^{p*−1}` when `ℓ` is known.
pub fn gamma_star(ls: &LiftedSolution) -> f64 {
    let prof = &ls.profile;
    let mut best = f64::INFINITY;
    for (r, v) in prof.r_grid.iter().zip(&prof.v) {
        best = best.min(((r * r + 1.0).ln() - ls.g.ln_big_g(*v)).exp());
    }
    if let (Some(ell), Comparison::Power { p }) = (prof.ell, ls.g) {
        best = best.min((p - 1.0) * ell.powf(p - 1.0));
    }
    best
}

/// Smallest `γ` for which the subsolution lies below `F⁻¹[γ⁻¹(|x|²+1)]`
/// at `t = 0` on the profile grid: `sup_r (r²+1)/G(v_β(r))`.
pub fn gamma_lower(ls: &LiftedSolution) -> f64 {
    let prof = &ls.profile;
    prof.r_grid
        .iter()
        .zip(&prof.v)
        .map(|(r, v)| ((r * r + 1.0).ln() - ls.g.ln_big_g(*v)).exp())
        .fold(0.0, f64::max)
}

/// Halve `β` until the subsolution lies below the data of amplitude `gamma`.
pub fn fit_beta_below(f: &Nonlinearity, cfg: &SuperSubConfig, gamma: f64) -> Result<SuperSubConfig> {
    let mut c = *cfg;
    for _ in 0..200 {
        let ls = build_subsolution(f, &c)?;
        if gamma_lower(&ls) <= gamma {
            return Ok(c);
        }
        c.beta *= 0.5;
    }
    Err(Error::Hypothesis(format!(
        "no beta found with the subsolution below gamma = {gamma}"
    )))
}

/// `u_t − Δu − f(u)` of a lifted solution by central differences with steps
/// `ε^{1/4}·max(|x|, 1)` and `ε^{1/4}·max(t, 1)`.
pub fn pde_residual(ls: &LiftedSolution, x: f64, t: f64) -> Result<f64> {
    let eps4 = f64::EPSILON.powf(0.25);
    let hx = eps4 * x.abs().max(1.0);
    let ht = eps4 * t.max(1.0);
    let n = ls.n_dim() as f64;
    let u0 = ls.eval(x, t)?;
    let up = ls.eval(x + hx, t)?;
    let um = ls.eval((x - hx).abs(), t)?;
    let (ux, uxx) = central(um, u0, up, hx);
    // the reflected point keeps the stencil on a line through the origin
    let lap = if x == 0.0 { n * uxx } else { uxx + (n - 1.0) / x * ux };
    let (ut, _) = central(ls.eval(x, t - ht)?, u0, ls.eval(x, t + ht)?, ht);
    Ok(ut - lap - ls.f.f(u0))
}

/// Sample layout for [`verify_residual`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualGrid {
    pub times: Vec<f64>,
    pub n_x: usize,
    /// `x` ranges over `[0, extent·√(t+1)]`.
    pub extent: f64,
}

impl Default for ResidualGrid {
    fn default() -> Self {
        Self {
            times: vec![0.0, 0.5, 1.0, 5.0, 20.0],
            n_x: 50,
            extent: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Extremes of [`pde_residual`] over the grid; evaluated in parallel.
pub fn verify_residual(ls: &LiftedSolution, grid: &ResidualGrid) -> Result<ResidualReport> {
    let pts: Vec<(f64, f64)> = grid
        .times
        .iter()
        .flat_map(|&t| {
            let xmax = grid.extent * (t + 1.0).sqrt();
            (0..grid.n_x).map(move |i| (xmax * i as f64 / (grid.n_x - 1) as f64, t))
        })
        .collect();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&(x, t)| pde_residual(ls, x, t))
        .collect::<Result<_>>()?;
    Ok(ResidualReport {
        min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        points: vals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(p: f64) -> Nonlinearity {
        Nonlinearity::power(p).unwrap()
    }

    #[test]
    fn w_equals_v_when_f_is_g() {
        let f = power(3.0);
        let g = Comparison::Power { p: 3.0 };
        for v in [0.1, 0.7, 2.0] {
            assert!((w_from_v(&f, &g, v).unwrap() / v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn w_closed_form_case() {
        let w = w_from_v(&power(2.0), &Comparison::Power { p: 3.0 }, 1.0).unwrap();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quasi_scale_is_classical_for_powers() {
        let f = power(3.0);
        let u = 0.7;
        for lambda in [0.5, 1.0, 3.0] {
            let got = quasi_scale(&f, u, lambda).unwrap();
            assert!((got / (lambda * u) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn quasi_scale_composes() {
        let f = Nonlinearity::exp_inverse();
        let u = 0.08;
        let a = quasi_scale(&f, quasi_scale(&f, u, 1.7).unwrap(), 0.6).unwrap();
        let b = quasi_scale(&f, u, 1.7 * 0.6).unwrap();
        assert!((a / b - 1.0).abs() < 1e-9);
        assert!((quasi_scale(&f, u, 1.0).unwrap() / u - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phi_is_identity_for_matching_pair() {
        let f = power(2.5);
        let g = Comparison::Power { p: 2.5 };
        let ph = phi_transform(&f, &g, 0.3).unwrap();
        assert!((ph.phi - 0.3).abs() < 1e-14);
        assert!((ph.dphi - 1.0).abs() < 1e-12);
        assert!(ph.convexity.abs() < 1e-12);
    }

    #[test]
    fn identity_forms_agree_for_powers() {
        let f = power(2.0);
        let g = Comparison::Power { p: 3.0 };
        let v = |r: f64| 0.5 + 0.3 * (-r * r).exp();
        let res = residual_triple(&f, &g, v, 2, 0.8, 0.5, 1e-3).unwrap();
        assert!(res.max_gap() < 1e-4, "{res:?}");
    }

    #[test]
    fn power_lift_is_classical() {
        let model = ProfileModel::power(3.0, 3).unwrap();
        let prof = solve_profile(model, 0.3, 20.0, 1e-10).unwrap();
        let ls = LiftedSolution::new(power(3.0), prof.clone());
        for (x, t) in [(0.0, 0.0), (1.0, 0.5), (3.0, 4.0)] {
            let want = (t + 1.0f64).powf(-0.5) * prof.value(x / (t + 1.0f64).sqrt()).unwrap();
            assert!((ls.eval(x, t).unwrap() / want - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn default_exponents() {
        assert!((default_q_upper(1.0, 1) - 1.25).abs() < 1e-15);
        assert!((default_q_lower(1.5) - 1.25).abs() < 1e-15);
        assert_eq!(default_q_lower(1.0), 1.0);
    }
}
