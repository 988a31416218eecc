//! Nonlinear source terms `f`, the blow-up-time transform
//! `F(s) = ∫_s^∞ dσ / f(σ)`, its inverse and the exponent
//! `q = lim_{s→0+} f'(s) F(s)`.
//!
//! `F` is evaluated in log space throughout: for `f(u) = exp(-1/u)` the
//! transform exceeds the f64 range below `u ≈ 1/709`, while `ln F` stays
//! moderate. [`Nonlinearity::eval_f_transform`] reports [`Error::Overflow`]
//! in that regime and [`Nonlinearity::ln_f_transform`] keeps working.

use std::f64::consts::{E, LN_10};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quadrature::{integrate_with_breaks, QuadOptions};
use crate::numerics::roots::safeguarded_newton;

/// Default lower bound of the evaluation domain.
pub const DEFAULT_DOMAIN_FLOOR: f64 = 1e-12;

/// Upper end of the root-finding range used by the inverse transform.
const S_MAX: f64 = 1e8;

/// Scalar map used by user-registered nonlinearities.
pub type ScalarFn = fn(f64) -> f64;

/// A nonlinearity supplied as plain function pointers.
#[derive(Clone, Copy)]
pub struct CustomFn {
    pub name: &'static str,
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub d2f: ScalarFn,
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn").field("name", &self.name).finish()
    }
}

impl PartialEq for CustomFn {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `f(s) = s^p`, `p > 1`.
    Power { p: f64 },
    /// `f(s) = e^s` on all of ℝ; the model nonlinearity with `q = 1`.
    ExpModel,
    /// `f(u) = exp(-1/u)` near zero, extended convexly.
    ExpInverse,
    /// `f(u) = u^p [ln(e + 1/u)]^{-r}` near zero, extended convexly.
    LogPower { p: f64, r: f64 },
    Custom(CustomFn),
}

/// C²-matched continuation `a·e^{b u} + c` beyond `u_blend`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Blend {
    u_blend: f64,
    /// `f'(u_blend)`; the blend is `(f1/b)·e^{b(u-u_blend)} + c`.
    f1: f64,
    b: f64,
    c: f64,
}

impl Blend {
    fn matching(u_blend: f64, f0: f64, f1: f64, f2: f64) -> Self {
        let b = f2 / f1;
        Blend {
            u_blend,
            f1,
            b,
            c: f0 - f1 / b,
        }
    }

    fn f(&self, u: f64) -> f64 {
        self.f1 / self.b * (self.b * (u - self.u_blend)).exp() + self.c
    }

    fn df(&self, u: f64) -> f64 {
        self.f1 * (self.b * (u - self.u_blend)).exp()
    }

    fn d2f(&self, u: f64) -> f64 {
        self.f1 * self.b * (self.b * (u - self.u_blend)).exp()
    }

    fn ln_f(&self, u: f64) -> f64 {
        let z = self.b * (u - self.u_blend);
        let lead = (self.f1 / self.b).ln() + z;
        lead + (self.c * self.b / self.f1 * (-z).exp()).ln_1p()
    }

    fn ln_df(&self, u: f64) -> f64 {
        self.f1.ln() + self.b * (u - self.u_blend)
    }
}

/// A convex superlinear nonlinearity together with its transform.
///
/// Values are immutable after construction and can be shared freely
/// between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    kind: Kind,
    domain_floor: f64,
    blend: Option<Blend>,
}

/// Blend point for `exp(-1/u)`; its second derivative changes sign at 1/2.
pub const EXP_INVERSE_BLEND: f64 = 0.25;
/// Blend point for the logarithmically weakened power.
pub const LOG_POWER_BLEND: f64 = 0.5;

impl Nonlinearity {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Config(format!("power exponent must exceed 1, got {p}")));
        }
        Ok(Self::from_kind(Kind::Power { p }))
    }

    pub fn exp_model() -> Self {
        Self {
            kind: Kind::ExpModel,
            domain_floor: f64::NEG_INFINITY,
            blend: None,
        }
    }

    pub fn exp_inverse() -> Self {
        let u = EXP_INVERSE_BLEND;
        let e = (-1.0 / u).exp();
        let f0 = e;
        let f1 = e / (u * u);
        let f2 = e * (1.0 - 2.0 * u) / u.powi(4);
        Self {
            kind: Kind::ExpInverse,
            domain_floor: DEFAULT_DOMAIN_FLOOR,
            blend: Some(Blend::matching(u, f0, f1, f2)),
        }
    }

    pub fn log_power(p: f64, r: f64) -> Result<Self> {
        if !(p > 1.0) || !(r > 0.0) {
            return Err(Error::Config(format!(
                "log_power needs p > 1 and r > 0, got p = {p}, r = {r}"
            )));
        }
        let u = LOG_POWER_BLEND;
        let (f0, f1, f2) = log_power_derivs(p, r, u);
        Ok(Self {
            kind: Kind::LogPower { p, r },
            domain_floor: DEFAULT_DOMAIN_FLOOR,
            blend: Some(Blend::matching(u, f0, f1, f2)),
        })
    }

    pub fn custom(c: CustomFn) -> Self {
        Self::from_kind(Kind::Custom(c))
    }

    /// Look up a registered custom nonlinearity by name.
    pub fn registry(name: &str) -> Result<Self> {
        CUSTOM_REGISTRY
            .iter()
            .find(|c| c.name == name)
            .map(|c| Self::custom(*c))
            .ok_or_else(|| Error::UnknownCustom(name.to_string()))
    }

    fn from_kind(kind: Kind) -> Self {
        Self {
            kind,
            domain_floor: DEFAULT_DOMAIN_FLOOR,
            blend: None,
        }
    }

    pub fn with_domain_floor(mut self, floor: f64) -> Self {
        self.domain_floor = floor;
        self
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn domain_floor(&self) -> f64 {
        self.domain_floor
    }

    /// Largest argument up to which the defining formula (not the convex
    /// continuation) is used.
    pub fn formula_limit(&self) -> f64 {
        self.blend.map_or(f64::INFINITY, |b| b.u_blend)
    }

    /// Whether `f(0+) = 0` is expected; false only for the exponential model.
    pub fn vanishes_at_zero(&self) -> bool {
        !matches!(self.kind, Kind::ExpModel)
    }

    /// Human-readable label used in reports.
    pub fn label(&self) -> String {
        match self.kind {
            Kind::Power { p } => format!("power(p={p})"),
            Kind::ExpModel => "exp_model".into(),
            Kind::ExpInverse => "exp_inverse".into(),
            Kind::LogPower { p, r } => format!("log_power(p={p},r={r})"),
            Kind::Custom(c) => format!("custom({})", c.name),
        }
    }

    fn blended(&self, s: f64) -> Option<&Blend> {
        self.blend.as_ref().filter(|b| s > b.u_blend)
    }

    pub fn f(&self, s: f64) -> f64 {
        if let Some(b) = self.blended(s) {
            return b.f(s);
        }
        match self.kind {
            Kind::Power { p } => s.powf(p),
            Kind::ExpModel => s.exp(),
            Kind::ExpInverse => (-1.0 / s).exp(),
            Kind::LogPower { p, r } => log_power_derivs(p, r, s).0,
            Kind::Custom(c) => (c.f)(s),
        }
    }

    pub fn df(&self, s: f64) -> f64 {
        if let Some(b) = self.blended(s) {
            return b.df(s);
        }
        match self.kind {
            Kind::Power { p } => p * s.powf(p - 1.0),
            Kind::ExpModel => s.exp(),
            Kind::ExpInverse => (-1.0 / s).exp() / (s * s),
            Kind::LogPower { p, r } => log_power_derivs(p, r, s).1,
            Kind::Custom(c) => (c.df)(s),
        }
    }

    pub fn d2f(&self, s: f64) -> f64 {
        if let Some(b) = self.blended(s) {
            return b.d2f(s);
        }
        match self.kind {
            Kind::Power { p } => p * (p - 1.0) * s.powf(p - 2.0),
            Kind::ExpModel => s.exp(),
            Kind::ExpInverse => (-1.0 / s).exp() * (1.0 - 2.0 * s) / s.powi(4),
            Kind::LogPower { p, r } => log_power_derivs(p, r, s).2,
            Kind::Custom(c) => (c.d2f)(s),
        }
    }

    /// `ln f(s)`, finite even where `f` itself underflows.
    pub fn ln_f(&self, s: f64) -> f64 {
        if let Some(b) = self.blended(s) {
            return b.ln_f(s);
        }
        match self.kind {
            Kind::Power { p } => p * s.ln(),
            Kind::ExpModel => s,
            Kind::ExpInverse => -1.0 / s,
            Kind::LogPower { p, r } => p * s.ln() - r * (E + 1.0 / s).ln().ln(),
            Kind::Custom(c) => (c.f)(s).ln(),
        }
    }

    /// `ln f'(s)`.
    pub fn ln_df(&self, s: f64) -> f64 {
        if let Some(b) = self.blended(s) {
            return b.ln_df(s);
        }
        match self.kind {
            Kind::Power { p } => p.ln() + (p - 1.0) * s.ln(),
            Kind::ExpModel => s,
            Kind::ExpInverse => -1.0 / s - 2.0 * s.ln(),
            Kind::LogPower { p, r } => {
                let l = (E + 1.0 / s).ln();
                let dlog = p / s + r / (s * (E * s + 1.0) * l);
                self.ln_f(s) + dlog.ln()
            }
            Kind::Custom(c) => (c.df)(s).ln(),
        }
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !(s >= self.domain_floor) || s.is_nan() {
            return Err(Error::Domain {
                s,
                floor: self.domain_floor,
            });
        }
        Ok(())
    }

    /// `ln F(s)`.
    pub fn ln_f_transform(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        match self.kind {
            Kind::Power { p } => Ok(-(p - 1.0) * s.ln() - (p - 1.0).ln()),
            Kind::ExpModel => Ok(-s),
            _ => self.ln_f_transform_quadrature(s),
        }
    }

    /// `ln F(s)` by quadrature, bypassing any closed form.
    ///
    /// `F(s) = I(s) / f(s)` with `I(s) = ∫_s^∞ f(s)/f(σ) dσ`; the ratio is
    /// at most one, so `I` never overflows. The integral runs to
    /// `S_cut = max(s, 1)·10³` in the variable `τ = ln(σ/s)`; beyond that
    /// `f` is modelled by the power law fitted on the last decade.
    pub fn ln_f_transform_quadrature(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        let s_cut = s.max(1.0) * 1e3;
        let ln_fs = self.ln_f(s);
        let t_end = (s_cut / s).ln();
        let integrand = |tau: f64| {
            let sigma = s * tau.exp();
            sigma * (ln_fs - self.ln_f(sigma)).exp()
        };
        // the integrand decays like exp(-(κ-1)τ) near τ = 0 with κ = s f'/f
        let kappa = (s * (self.ln_df(s) - ln_fs).exp()).max(1.0);
        let mut breaks = vec![0.0];
        let mut b = 0.25 / kappa;
        while b < t_end.min(8.0) {
            breaks.push(b);
            b *= 4.0;
        }
        let mut next = 8.0;
        while next < t_end {
            breaks.push(next);
            next += 8.0;
        }
        breaks.push(t_end);
        let body = integrate_with_breaks(
            integrand,
            &breaks,
            QuadOptions {
                abs_tol: 0.0,
                rel_tol: 4e-14,
                max_intervals: 400,
            },
        );
        let exponent = (self.ln_f(s_cut) - self.ln_f(s_cut / 10.0)) / LN_10;
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::NonIntegrableTail { s_cut, exponent });
        }
        let tail = (ln_fs - self.ln_f(s_cut)).exp() * s_cut / (exponent - 1.0);
        Ok((body.value + tail).ln() - ln_fs)
    }

    /// `F(s) = ∫_s^∞ dσ/f(σ)`.
    pub fn eval_f_transform(&self, s: f64) -> Result<f64> {
        let ln_value = self.ln_f_transform(s)?;
        if ln_value > f64::MAX.ln() {
            return Err(Error::Overflow { s, ln_value });
        }
        Ok(ln_value.exp())
    }

    /// `F⁻¹(σ)` for `σ > 0`.
    pub fn eval_f_inverse(&self, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(Error::Domain { s: sigma, floor: 0.0 });
        }
        self.f_inverse_ln(sigma.ln())
    }

    /// `F⁻¹(exp(ln_sigma))`; accepts targets beyond the f64 range of `σ`.
    pub fn f_inverse_ln(&self, ln_sigma: f64) -> Result<f64> {
        match self.kind {
            Kind::Power { p } => {
                let ln_s = -((p - 1.0).ln() + ln_sigma) / (p - 1.0);
                let s = ln_s.exp();
                if s < self.domain_floor {
                    return Err(Error::BracketFailure {
                        ln_sigma,
                        s_min: self.domain_floor,
                        s_max: f64::MAX,
                    });
                }
                Ok(s)
            }
            Kind::ExpModel => Ok(-ln_sigma),
            _ => self.f_inverse_ln_numeric(ln_sigma),
        }
    }

    /// Root-finding inverse, bypassing closed forms.
    ///
    /// Solves `ln F(e^x) = ln σ` in `x = ln s` by Newton's method inside an
    /// expanding sign-change bracket; `d/dx ln F(e^x) = -s / (f(s) F(s))`.
    pub fn f_inverse_ln_numeric(&self, ln_sigma: f64) -> Result<f64> {
        if !ln_sigma.is_finite() {
            return Err(Error::Domain { s: ln_sigma, floor: f64::MIN });
        }
        let x_min = self.domain_floor.max(f64::MIN_POSITIVE).ln();
        let x_max = S_MAX.ln();
        let fail = || Error::BracketFailure {
            ln_sigma,
            s_min: x_min.exp(),
            s_max: S_MAX,
        };
        let g = |x: f64| -> Result<(f64, f64)> {
            let s = x.exp();
            let ln_big_f = self.ln_f_transform(s)?;
            let slope = -(x - self.ln_f(s) - ln_big_f).exp();
            Ok((ln_big_f - ln_sigma, slope))
        };
        // F is decreasing, so g(x) < 0 means x is already too large.
        let mut x0 = 0.0;
        let (g0, _) = g(x0)?;
        let (mut lo, mut hi);
        let mut step = 2.0;
        if g0 > 0.0 {
            lo = x0;
            loop {
                let x1 = (x0 + step).min(x_max);
                let (g1, _) = g(x1)?;
                if g1 <= 0.0 {
                    hi = x1;
                    break;
                }
                if x1 >= x_max {
                    return Err(fail());
                }
                lo = x1;
                x0 = x1;
                step *= 2.0;
            }
        } else {
            hi = x0;
            loop {
                let x1 = (x0 - step).max(x_min);
                let (g1, _) = g(x1)?;
                if g1 >= 0.0 {
                    lo = x1;
                    break;
                }
                if x1 <= x_min {
                    return Err(fail());
                }
                hi = x1;
                x0 = x1;
                step *= 2.0;
            }
        }
        let mut err = None;
        let root = safeguarded_newton(
            |x| match g(x) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    (f64::NAN, f64::NAN)
                }
            },
            lo,
            hi,
            1e-15,
            200,
        );
        if let Some(e) = err {
            return Err(e);
        }
        root.map(|r| r.x.exp()).ok_or_else(fail)
    }

    /// `f'(s) F(s)`, computed through logarithms.
    pub fn df_times_f_transform(&self, s: f64) -> Result<f64> {
        if let Kind::Power { p } = self.kind {
            return Ok(p / (p - 1.0));
        }
        Ok((self.ln_df(s) + self.ln_f_transform(s)?).exp())
    }

    /// `f(s) F(s)`, computed through logarithms.
    pub fn f_times_f_transform(&self, s: f64) -> Result<f64> {
        Ok((self.ln_f(s) + self.ln_f_transform(s)?).exp())
    }

    /// Extrapolated `q = lim_{s→0+} f'(s) F(s)`.
    pub fn estimate_q(&self) -> Result<QEstimate> {
        estimate_q(self)
    }

    /// Sample the structural assumptions on a log grid up to the
    /// formula limit: `f, f', f'' > 0`, `f(0+) = 0` and finite `F`.
    pub fn check_invariants(&self) -> Result<()> {
        let hi = self.formula_limit().min(1e3);
        let lo: f64 = if self.domain_floor.is_finite() { 1e-6 } else { -20.0 };
        let n = 60;
        for i in 0..=n {
            let s = if self.domain_floor.is_finite() {
                (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / n as f64).exp()
            } else {
                lo + (hi.min(20.0) - lo) * i as f64 / n as f64
            };
            let s = if i == n { hi * (1.0 - 1e-12) } else { s };
            let (lf, ldf, d2) = (self.ln_f(s), self.ln_df(s), self.d2f(s));
            let underflow = lf < -700.0;
            if !lf.is_finite() || !ldf.is_finite() || !(d2 > 0.0 || (underflow && d2 == 0.0)) {
                return Err(Error::Hypothesis(format!(
                    "{}: convexity assumptions fail at s = {s}",
                    self.label()
                )));
            }
            self.ln_f_transform(s)?;
        }
        if self.vanishes_at_zero() && self.ln_f(self.domain_floor) > -20.0 {
            return Err(Error::Hypothesis(format!(
                "{}: f does not vanish at the domain floor",
                self.label()
            )));
        }
        Ok(())
    }
}

/// `f`, `f'`, `f''` of `u^p [ln(e + 1/u)]^{-r}`.
fn log_power_derivs(p: f64, r: f64, u: f64) -> (f64, f64, f64) {
    let l = (E + 1.0 / u).ln();
    let f = u.powf(p) * l.powf(-r);
    let d = u * (E * u + 1.0) * l;
    let dlog = p / u + r / d;
    let dd = (2.0 * E * u + 1.0) * l - 1.0;
    let d2log = -p / (u * u) - r * dd / (d * d);
    (f, f * dlog, f * (dlog * dlog + d2log))
}

/// Built-in entries for [`Nonlinearity::registry`].
pub static CUSTOM_REGISTRY: &[CustomFn] = &[
    CustomFn {
        name: "tiny_quadratic",
        f: |s| 1e-12 * s * s,
        df: |s| 2e-12 * s,
        d2f: |_| 2e-12,
    },
    CustomFn {
        name: "cubic_quartic",
        f: |s| s.powi(3) + s.powi(4),
        df: |s| 3.0 * s * s + 4.0 * s.powi(3),
        d2f: |s| 6.0 * s + 12.0 * s * s,
    },
    CustomFn {
        name: "cubic_numeric",
        f: |s| s.powi(3),
        df: |s| 3.0 * s * s,
        d2f: |s| 6.0 * s,
    },
];

/// Which asymptotic correction the extrapolation assumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionModel {
    /// Corrections in integer powers of `s`.
    Algebraic,
    /// Corrections in powers of `1 / ln(1/s)`.
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub q: f64,
    pub model: CorrectionModel,
    /// Disagreement of the extrapolation between two shifted windows.
    pub spread: f64,
    /// `(s_k, f'(s_k) F(s_k))` along `s_k = 0.1·2^{-k}`.
    pub sequence: Vec<(f64, f64)>,
}

/// Grid `s_k = S0·2^{-k}`, `k = 0..=K_MAX`.
const Q_S0: f64 = 0.1;
const Q_K_MAX: usize = 24;
const Q_SPREAD_TOL: f64 = 1e-3;

fn richardson_algebraic(seq: &[f64], k: usize) -> f64 {
    // two levels with ratio 2: removes O(s) and O(s²)
    (8.0 * seq[k] - 6.0 * seq[k - 1] + seq[k - 2]) / 3.0
}

fn neville_at_zero(h: [f64; 3], y: [f64; 3]) -> f64 {
    let mut total = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= h[j] / (h[j] - h[i]);
            }
        }
        total += w * y[i];
    }
    total
}

fn richardson_logarithmic(s: &[f64], seq: &[f64], k: usize) -> f64 {
    let idx = [k - 12, k - 6, k];
    let h = idx.map(|i| 1.0 / (E + 1.0 / s[i]).ln());
    let y = idx.map(|i| seq[i]);
    neville_at_zero(h, y)
}

fn estimate_q(nl: &Nonlinearity) -> Result<QEstimate> {
    let s: Vec<f64> = (0..=Q_K_MAX).map(|k| Q_S0 * 0.5f64.powi(k as i32)).collect();
    let seq = s
        .iter()
        .map(|&sk| nl.df_times_f_transform(sk))
        .collect::<Result<Vec<f64>>>()?;
    let k = Q_K_MAX;
    let alg = richardson_algebraic(&seq, k);
    let alg_spread = (alg - richardson_algebraic(&seq, k - 1)).abs();
    let log = richardson_logarithmic(&s, &seq, k);
    let log_spread = (log - richardson_logarithmic(&s, &seq, k - 1)).abs();
    let (q, model, spread) = if alg_spread <= log_spread {
        (alg, CorrectionModel::Algebraic, alg_spread)
    } else {
        (log, CorrectionModel::Logarithmic, log_spread)
    };
    let tol = Q_SPREAD_TOL * q.abs().max(1.0);
    if !(spread <= tol) {
        return Err(Error::NoConvergence { spread, tol });
    }
    Ok(QEstimate {
        q,
        model,
        spread,
        sequence: s.into_iter().zip(seq).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FujitaVerdict {
    Subcritical,
    Critical,
    Supercritical,
}

/// Position of `q` relative to the Fujita value `1 + N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FujitaClass {
    pub q: f64,
    pub n_dim: usize,
    pub verdict: FujitaVerdict,
}

pub const CRITICAL_TOL: f64 = 1e-9;
/// Slack below 1 accepted for numerically estimated exponents.
pub const Q_FLOOR_TOL: f64 = 1e-6;

pub fn fujita_classify(q: f64, n_dim: usize) -> Result<FujitaClass> {
    if !(q >= 1.0 - Q_FLOOR_TOL) {
        return Err(Error::InvalidQ { q });
    }
    if n_dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    let gap = q - (1.0 + n_dim as f64 / 2.0);
    let verdict = if gap.abs() <= CRITICAL_TOL {
        FujitaVerdict::Critical
    } else if gap < 0.0 {
        FujitaVerdict::Subcritical
    } else {
        FujitaVerdict::Supercritical
    };
    Ok(FujitaClass { q, n_dim, verdict })
}

/// Config-file description of a nonlinearity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power { p: f64 },
    ExpModel,
    ExpInverse,
    LogPower { p: f64, r: f64 },
    Custom { name: String },
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<Nonlinearity> {
        match self {
            NonlinearitySpec::Power { p } => Nonlinearity::power(*p),
            NonlinearitySpec::ExpModel => Ok(Nonlinearity::exp_model()),
            NonlinearitySpec::ExpInverse => Ok(Nonlinearity::exp_inverse()),
            NonlinearitySpec::LogPower { p, r } => Nonlinearity::log_power(*p, *r),
            NonlinearitySpec::Custom { name } => Nonlinearity::registry(name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<Nonlinearity> {
        vec![
            Nonlinearity::power(2.0).unwrap(),
            Nonlinearity::power(5.0).unwrap(),
            Nonlinearity::exp_inverse(),
            Nonlinearity::log_power(3.0, 1.0).unwrap(),
            Nonlinearity::log_power(2.0, 1.0).unwrap(),
        ]
    }

    #[test]
    fn power_transform_closed_form() {
        let nl = Nonlinearity::power(2.0).unwrap();
        assert!((nl.eval_f_transform(0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((nl.eval_f_inverse(2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_model_transform() {
        let nl = Nonlinearity::exp_model();
        let v = nl.eval_f_transform(1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-16);
        assert!((nl.eval_f_inverse(v).unwrap() - 1.0).abs() < 1e-15);
        // the model nonlinearity accepts negative arguments
        assert!((nl.eval_f_transform(-2.0).unwrap() - 2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_form_for_power() {
        for p in [1.5, 2.0, 3.0, 5.0] {
            let nl = Nonlinearity::power(p).unwrap();
            for s in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e4] {
                let exact = nl.ln_f_transform(s).unwrap();
                let quad = nl.ln_f_transform_quadrature(s).unwrap();
                assert!((exact - quad).abs() < 1e-12, "p={p} s={s}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn registry_cubic_matches_power() {
        let c = Nonlinearity::registry("cubic_numeric").unwrap();
        let p = Nonlinearity::power(3.0).unwrap();
        for s in [1e-4, 0.1, 3.0] {
            let a = c.eval_f_transform(s).unwrap();
            let b = p.eval_f_transform(s).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
            let inv = c.eval_f_inverse(b).unwrap();
            assert!((inv / s - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            Nonlinearity::registry("nope"),
            Err(Error::UnknownCustom(_))
        ));
    }

    #[test]
    fn exp_inverse_transform_exceeds_exponential_bound() {
        let nl = Nonlinearity::exp_inverse();
        let v = nl.eval_f_transform(0.1).unwrap();
        assert!(v > 0.01 * 10f64.exp(), "{v}");
    }

    #[test]
    fn exp_inverse_overflows_only_in_linear_space() {
        let nl = Nonlinearity::exp_inverse();
        assert!(matches!(nl.eval_f_transform(1e-4), Err(Error::Overflow { .. })));
        let ln = nl.ln_f_transform(1e-4).unwrap();
        // F(s) = s² e^{1/s} (1 + 2s + O(s²)) as s → 0
        let approx = 1e4 + 2.0 * 1e-4f64.ln() + 2e-4;
        assert!((ln - approx).abs() < 1e-6, "{ln} vs {approx}");
        let back = nl.f_inverse_ln(ln).unwrap();
        assert!((back / 1e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_floor_is_enforced() {
        let nl = Nonlinearity::exp_inverse();
        assert!(matches!(nl.ln_f_transform(1e-13), Err(Error::Domain { .. })));
        assert!(matches!(nl.eval_f_inverse(-1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn transform_is_decreasing_and_diverges_at_zero() {
        for nl in builtins() {
            let mut last = f64::NEG_INFINITY;
            for k in 1..=6 {
                let v = nl.ln_f_transform(10f64.powi(-k)).unwrap();
                assert!(v > last, "{} not increasing at k={k}", nl.label());
                last = v;
            }
            assert!(last > 10.0);
        }
    }

    #[test]
    fn derivative_identity() {
        for nl in builtins() {
            for s in [0.05, 0.2, 0.7, 2.0] {
                let h = 1e-5 * s;
                let fp = nl.eval_f_transform(s + h).unwrap();
                let fm = nl.eval_f_transform(s - h).unwrap();
                let deriv = (fp - fm) / (2.0 * h);
                let want = -1.0 / nl.f(s);
                assert!(
                    (deriv / want - 1.0).abs() < 1e-6,
                    "{} s={s}: {deriv} vs {want}",
                    nl.label()
                );
            }
        }
    }

    #[test]
    fn blend_is_c2_matched() {
        for nl in [Nonlinearity::exp_inverse(), Nonlinearity::log_power(3.0, 1.0).unwrap()] {
            let u = nl.formula_limit();
            let (a, b) = (u * (1.0 - 1e-12), u * (1.0 + 1e-12));
            assert!((nl.f(a) / nl.f(b) - 1.0).abs() < 1e-9);
            assert!((nl.df(a) / nl.df(b) - 1.0).abs() < 1e-9);
            assert!((nl.d2f(a) / nl.d2f(b) - 1.0).abs() < 1e-9);
            assert!((nl.ln_f(b) - nl.f(b).ln()).abs() < 1e-12);
            assert!(nl.ln_f(200.0).is_finite());
        }
    }

    #[test]
    fn invariants_hold_for_builtins() {
        for nl in builtins() {
            nl.check_invariants().unwrap();
        }
        Nonlinearity::exp_model().check_invariants().unwrap();
        Nonlinearity::registry("cubic_quartic").unwrap().check_invariants().unwrap();
    }

    #[test]
    fn log_power_derivatives_match_finite_differences() {
        let (p, r) = (3.0, 1.0);
        for u in [0.01, 0.1, 0.3] {
            let h = 1e-6 * u;
            let (_, d1, d2) = log_power_derivs(p, r, u);
            let fd1 = (log_power_derivs(p, r, u + h).0 - log_power_derivs(p, r, u - h).0) / (2.0 * h);
            let fd2 = (log_power_derivs(p, r, u + h).1 - log_power_derivs(p, r, u - h).1) / (2.0 * h);
            assert!((fd1 / d1 - 1.0).abs() < 1e-7);
            assert!((fd2 / d2 - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn fujita_examples() {
        assert_eq!(fujita_classify(1.2, 2).unwrap().verdict, FujitaVerdict::Subcritical);
        assert_eq!(fujita_classify(2.0, 2).unwrap().verdict, FujitaVerdict::Critical);
        assert_eq!(fujita_classify(3.0, 2).unwrap().verdict, FujitaVerdict::Supercritical);
        assert!(matches!(fujita_classify(0.5, 2), Err(Error::InvalidQ { .. })));
    }

    #[test]
    fn spec_builds() {
        let spec = NonlinearitySpec::LogPower { p: 3.0, r: 1.0 };
        assert!(matches!(spec.build().unwrap().kind(), Kind::LogPower { .. }));
        let bad = NonlinearitySpec::Power { p: 0.5 };
        assert!(bad.build().is_err());
    }
}
