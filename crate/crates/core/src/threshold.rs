//! Dichotomy experiments: canonical and application initial data, run
//! classification, amplitude bisection and the small-amplitude inequality
//! chains for the two application nonlinearities.

use std::f64::consts::E;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{
    evolve, heat_semigroup_sup, necessary_condition_scan, uniform_grid, BlowUpCause,
    EvolutionOutcome, RadialField, SolverConfig, Tail, Verdict,
};
use crate::nonlinearity::Nonlinearity;
use crate::numerics::{geomspace, roots::bisect};
use crate::quasi::LiftedSolution;

/// `u₀(r) = F⁻¹[γ⁻¹(r²+1)]` on `r_grid`, with the same formula as tail.
pub fn canonical_initial_data(f: &Nonlinearity, gamma: f64, n_dim: usize, r_grid: Vec<f64>) -> Result<RadialField> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let ln_gamma = gamma.ln();
    let values = r_grid
        .par_iter()
        .map(|&r| f.f_inverse_ln((r * r + 1.0).ln() - ln_gamma))
        .collect::<Result<Vec<f64>>>()?;
    let g = f.clone();
    let tail: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r: f64| {
        g.f_inverse_ln((r * r + 1.0).ln() - ln_gamma)
            .unwrap_or(f64::NAN)
    });
    RadialField::from_values(n_dim, r_grid, values, 0.0)
        .with_tail(Tail::Exact(tail))
        .mark_non_increasing()
}

/// The two application families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ApplicationCase {
    /// `u₀ = 1/log[c⁻¹(|x|²+1){log(|x|+e)}²+1]` for `f = e^{−1/u}`.
    ExpInv,
    /// `u₀ = c(|x|+1)^{−2/(p−1)}[log(|x|+e)]^{r/(p−1)}` for
    /// `f = u^p[log(e+1/u)]^{−r}`.
    LogPower { p: f64, r: f64 },
}

impl ApplicationCase {
    pub fn value(&self, c: f64, x: f64) -> f64 {
        match *self {
            ApplicationCase::ExpInv => {
                let l = (x + E).ln();
                1.0 / ((x * x + 1.0) * l * l / c + 1.0).ln()
            }
            ApplicationCase::LogPower { p, r } => {
                c * (x + 1.0).powf(-2.0 / (p - 1.0)) * (x + E).ln().powf(r / (p - 1.0))
            }
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        match *self {
            ApplicationCase::ExpInv => Ok(Nonlinearity::exp_inverse()),
            ApplicationCase::LogPower { p, r } => Nonlinearity::log_power(p, r),
        }
    }

    /// Warn when the log-power exponent lies outside `p > 1 + 2/N`, the range
    /// in which `q = p/(p−1)` is below `1 + N/2`.
    pub fn check_range(&self, n_dim: usize) -> bool {
        match *self {
            ApplicationCase::ExpInv => true,
            ApplicationCase::LogPower { p, .. } => {
                let ok = p > 1.0 + 2.0 / n_dim as f64;
                if !ok {
                    warn!("log-power case with p = {p} <= 1 + 2/N: q = p/(p-1) is not below 1 + N/2");
                }
                ok
            }
        }
    }
}

pub fn application_initial_data(case: ApplicationCase, c: f64, n_dim: usize, r_grid: Vec<f64>) -> Result<RadialField> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("c must be positive, got {c}")));
    }
    case.check_range(n_dim);
    let tail: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |x| case.value(c, x));
    RadialField::from_fn(n_dim, r_grid, 0.0, tail).mark_non_increasing()
}

/// Solver settings used for the dichotomy experiments: horizon 400 with up
/// to two ×4 extensions of undecided runs, `dr = 0.2`.
pub fn dichotomy_config() -> SolverConfig {
    SolverConfig {
        t_max: 400.0,
        dr: 0.2,
        max_extensions: 2,
        ..Default::default()
    }
}

/// Times probed by the necessary-condition scans.
pub fn scan_times(t_end: f64) -> Vec<f64> {
    geomspace(1e-3, t_end, 120)
}

/// Horizon of the pre-flight and final-state scans.
pub const SCAN_HORIZON: f64 = 1e4;

/// Field after an evolution, with the far tail advanced by the flat ODE
/// `F(u(r,T)) = F(u₀(r)) − T` (diffusion is negligible there).
fn final_field(f: &Nonlinearity, u0: &RadialField, run: &EvolutionOutcome) -> Option<RadialField> {
    let snap = run.snapshots.last()?;
    let t = snap.time;
    let g = f.clone();
    let start = u0.clone();
    let tail: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r: f64| {
        let u = start.value_at(r);
        let Ok(ln_f) = g.ln_f_transform(u) else {
            return f64::NAN;
        };
        let rest = 1.0 - t * (-ln_f).exp();
        if !(rest > 0.0) {
            return f64::NAN;
        }
        g.f_inverse_ln(ln_f + rest.ln()).unwrap_or(f64::NAN)
    });
    let mut field = RadialField::from_values(snap.n_dim, snap.r_grid.clone(), snap.values.clone(), 0.0)
        .with_tail(Tail::Exact(tail));
    // the sup sits at the origin only for non-increasing profiles
    field = field.mark_non_increasing().ok()?;
    Some(field)
}

/// Classify the run from `u₀`.
///
/// A violation of the necessary condition for `u₀` short-circuits to
/// BlowUp without evolving. Otherwise the solver runs and the necessary
/// condition is applied again to the final state; a violation there turns a
/// Global or Undecided result into BlowUp. A remaining Undecided result is
/// rerun with `T_max` quadrupled, at most `max_extensions` times. With `refinement_check` the verdict is
/// recomputed at `dr/2` and must agree.
pub fn classify(
    f: &Nonlinearity,
    u0: &RadialField,
    cfg: &SolverConfig,
    envelope: Option<&LiftedSolution>,
) -> Result<EvolutionOutcome> {
    let out = classify_once(f, u0, cfg, envelope)?;
    if cfg.refinement_check {
        let fine_cfg = SolverConfig {
            dr: 0.5 * cfg.dr,
            refinement_check: false,
            ..cfg.clone()
        };
        let fine = classify_once(f, u0, &fine_cfg, envelope)?;
        if fine.verdict.label() != out.verdict.label() {
            return Err(Error::GridTooCoarse {
                coarse: out.verdict.label().into(),
                fine: fine.verdict.label().into(),
            });
        }
    }
    Ok(out)
}

fn short_circuit(t_v: f64, u0: &RadialField) -> EvolutionOutcome {
    EvolutionOutcome {
        verdict: Verdict::BlowUp {
            t_estimate: t_v,
            cause: BlowUpCause::NecessaryCondition,
        },
        snapshots: vec![u0.clone()],
        sup_norm_history: vec![(0.0, u0.sup())],
        dt_stats: crate::heat::DtStats {
            accepted: 0,
            rejected: 0,
            min: 0.0,
            max: 0.0,
            mean: 0.0,
        },
        grid: crate::heat::GridSpec {
            dr: u0.r_grid.get(1).map_or(0.0, |r| r - u0.r_grid[0]),
            r_domain: u0.r_end(),
            points: u0.r_grid.len(),
        },
        clamped: 0,
        envelope_ratio: None,
    }
}

fn classify_once(
    f: &Nonlinearity,
    u0: &RadialField,
    cfg: &SolverConfig,
    envelope: Option<&LiftedSolution>,
) -> Result<EvolutionOutcome> {
    if u0.sup() <= 0.0 && f.vanishes_at_zero() {
        return evolve(f, u0, cfg, envelope);
    }
    if let Some(t_v) = necessary_condition_scan(f, u0, &scan_times(SCAN_HORIZON))? {
        return Ok(short_circuit(t_v, u0));
    }
    let mut run_cfg = cfg.clone();
    let mut extensions = 0;
    loop {
        let mut out = evolve(f, u0, &run_cfg, envelope)?;
        let t_reached = match out.verdict {
            Verdict::BlowUp { .. } => return Ok(out),
            Verdict::Global { t_reached } | Verdict::Undecided { t_reached, .. } => t_reached,
        };
        if let Some(field) = final_field(f, u0, &out) {
            match necessary_condition_scan(f, &field, &scan_times(SCAN_HORIZON)) {
                Ok(Some(t_v)) => {
                    out.verdict = Verdict::BlowUp {
                        t_estimate: t_reached + t_v,
                        cause: BlowUpCause::NecessaryCondition,
                    };
                    return Ok(out);
                }
                Ok(None) => {}
                Err(e) => warn!("final-state scan failed: {e}"),
            }
        }
        if out.verdict.is_global() || extensions == cfg.max_extensions {
            return Ok(out);
        }
        extensions += 1;
        run_cfg.t_max *= 4.0;
        if let Some(r) = cfg.r_domain {
            run_cfg.r_domain = Some(r * 2.0_f64.powi(extensions as i32));
        }
        info!("undecided at T = {t_reached}; extending to T = {}", run_cfg.t_max);
    }
}

/// One classified amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub gamma: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub final_sup: f64,
    pub steps: usize,
}

impl RunRecord {
    fn new(gamma: f64, out: &EvolutionOutcome) -> Self {
        Self {
            gamma,
            verdict: out.verdict.clone(),
            final_sup: out.final_sup(),
            steps: out.dt_stats.accepted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBracket {
    /// Largest amplitude classified Global.
    pub gamma_lo: f64,
    /// Smallest amplitude classified BlowUp.
    pub gamma_hi: f64,
    /// Every decided run, in the order performed.
    pub runs: Vec<RunRecord>,
    /// Undecided runs; excluded from the endpoints.
    pub undecided: Vec<RunRecord>,
}

impl ThresholdBracket {
    pub fn ratio(&self) -> f64 {
        self.gamma_hi / self.gamma_lo
    }

    pub fn all_records(&self) -> Vec<RunRecord> {
        let mut all = self.runs.clone();
        all.extend(self.undecided.iter().cloned());
        all
    }
}

/// Builds the initial data for an amplitude.
pub trait DataFamily: Sync {
    fn build(&self, amplitude: f64) -> Result<RadialField>;
}

/// `F⁻¹[γ⁻¹(r²+1)]` on the solver grid.
pub struct Canonical<'a> {
    pub f: &'a Nonlinearity,
    pub n_dim: usize,
    pub cfg: &'a SolverConfig,
}

impl DataFamily for Canonical<'_> {
    fn build(&self, gamma: f64) -> Result<RadialField> {
        let grid = uniform_grid(self.cfg.domain_radius(), self.cfg.dr);
        canonical_initial_data(self.f, gamma, self.n_dim, grid)
    }
}

/// Application data with amplitude `c`.
pub struct Application<'a> {
    pub case: ApplicationCase,
    pub n_dim: usize,
    pub cfg: &'a SolverConfig,
}

impl DataFamily for Application<'_> {
    fn build(&self, c: f64) -> Result<RadialField> {
        let grid = uniform_grid(self.cfg.domain_radius(), self.cfg.dr);
        application_initial_data(self.case, c, self.n_dim, grid)
    }
}

fn run_one<D: DataFamily>(f: &Nonlinearity, data: &D, gamma: f64, cfg: &SolverConfig) -> Result<RunRecord> {
    let u0 = data.build(gamma)?;
    let out = classify(f, &u0, cfg, None)?;
    info!("amplitude {gamma:.6e}: {}", out.verdict.label());
    Ok(RunRecord::new(gamma, &out))
}

/// Log-bisection between a Global amplitude `lo0` and a BlowUp amplitude
/// `hi0` until `hi/lo ≤ 1 + rel_width`.
///
/// An undecided midpoint is logged and the search continues below it, so
/// `gamma_lo` always remains a Global run; `gamma_hi` stays the smallest
/// BlowUp run seen.
pub fn bisect_amplitude<D: DataFamily>(
    f: &Nonlinearity,
    data: &D,
    lo0: f64,
    hi0: f64,
    cfg: &SolverConfig,
    rel_width: f64,
) -> Result<ThresholdBracket> {
    if !(lo0 > 0.0 && hi0 > lo0 && rel_width > 0.0) {
        return Err(Error::InvalidBracket(format!(
            "need 0 < lo < hi and rel_width > 0, got [{lo0}, {hi0}], {rel_width}"
        )));
    }
    let ends = [lo0, hi0]
        .par_iter()
        .map(|&g| run_one(f, data, g, cfg))
        .collect::<Result<Vec<_>>>()?;
    if !ends[0].verdict.is_global() || !ends[1].verdict.is_blow_up() {
        return Err(Error::InvalidBracket(format!(
            "lower end {lo0} is {}, upper end {hi0} is {}",
            ends[0].verdict.label(),
            ends[1].verdict.label()
        )));
    }
    let mut bracket = ThresholdBracket {
        gamma_lo: lo0,
        gamma_hi: hi0,
        runs: ends,
        undecided: Vec::new(),
    };
    let mut search_hi = hi0;
    while search_hi / bracket.gamma_lo > 1.0 + rel_width {
        let mid = (bracket.gamma_lo * search_hi).sqrt();
        let rec = run_one(f, data, mid, cfg)?;
        match rec.verdict {
            Verdict::Global { .. } => {
                bracket.gamma_lo = mid;
                bracket.runs.push(rec);
            }
            Verdict::BlowUp { .. } => {
                bracket.gamma_hi = mid;
                search_hi = mid;
                bracket.runs.push(rec);
            }
            Verdict::Undecided { .. } => {
                warn!("undecided run at amplitude {mid}; searching below it");
                search_hi = mid;
                bracket.undecided.push(rec);
            }
        }
    }
    Ok(bracket)
}

/// Bisection for the canonical data `F⁻¹[γ⁻¹(|x|²+1)]`.
pub fn bisect_gamma(
    f: &Nonlinearity,
    n_dim: usize,
    gamma_lo0: f64,
    gamma_hi0: f64,
    cfg: &SolverConfig,
    rel_width: f64,
) -> Result<ThresholdBracket> {
    let data = Canonical { f, n_dim, cfg };
    bisect_amplitude(f, &data, gamma_lo0, gamma_hi0, cfg, rel_width)
}

/// Largest number of ×4 expansion steps in each direction.
pub const MAX_EXPANSION_STEPS: usize = 12;

/// Find a Global/BlowUp pair by geometric expansion (×4) from `start`.
pub fn discover_bracket<D: DataFamily>(
    f: &Nonlinearity,
    data: &D,
    start: f64,
    cfg: &SolverConfig,
) -> Result<(f64, f64, Vec<RunRecord>)> {
    let mut log = Vec::new();
    let first = run_one(f, data, start, cfg)?;
    let going_down = !first.verdict.is_global();
    let mut last_global = first.verdict.is_global().then_some(start);
    let mut last_blow = first.verdict.is_blow_up().then_some(start);
    log.push(first);
    let mut g = start;
    for _ in 0..MAX_EXPANSION_STEPS {
        g = if going_down { g / 4.0 } else { g * 4.0 };
        let rec = run_one(f, data, g, cfg)?;
        let verdict = rec.verdict.clone();
        log.push(rec);
        match verdict {
            Verdict::Global { .. } if going_down => {
                if let Some(hi) = last_blow {
                    return Ok((g, hi, log));
                }
                last_global = Some(g);
            }
            Verdict::BlowUp { .. } if !going_down => {
                if let Some(lo) = last_global {
                    return Ok((lo, g, log));
                }
            }
            Verdict::BlowUp { .. } => last_blow = Some(g),
            Verdict::Global { .. } => last_global = Some(g),
            Verdict::Undecided { .. } => {}
        }
    }
    Err(Error::InvalidBracket(format!(
        "no Global/BlowUp pair within {MAX_EXPANSION_STEPS} expansion steps of {start}"
    )))
}

/// Classify a list of amplitudes concurrently; results sorted by amplitude.
pub fn sweep<D: DataFamily>(f: &Nonlinearity, data: &D, amplitudes: &[f64], cfg: &SolverConfig) -> Result<Vec<RunRecord>> {
    let mut out = amplitudes
        .par_iter()
        .map(|&g| run_one(f, data, g, cfg))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(out)
}

/// Pairs `(γ_a < γ_b)` with `γ_a` BlowUp and `γ_b` Global.
pub fn monotonicity_violations(records: &[RunRecord]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    let mut out = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        if !a.verdict.is_blow_up() {
            continue;
        }
        for b in &sorted[i + 1..] {
            if b.verdict.is_global() {
                out.push((a.gamma, b.gamma));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiminfReport {
    /// `min r²/F(u₀(r))` over the window.
    pub value: f64,
    /// The same over the window shifted by a factor two.
    pub shifted: f64,
    /// `|shifted − value| / value`.
    pub drift: f64,
}

/// `min_{r ∈ [r_a, r_b]} r²/F(u₀(r))` on 200 geometric samples.
pub fn liminf_ratio(f: &Nonlinearity, u0: &RadialField, window: [f64; 2]) -> Result<LiminfReport> {
    let [a, b] = window;
    if !(a > 0.0 && b > a) {
        return Err(Error::Config(format!("invalid window [{a}, {b}]")));
    }
    let min_over = |a: f64, b: f64| -> Result<f64> {
        let vals = geomspace(a, b, 200)
            .into_par_iter()
            .map(|r| Ok((2.0 * r.ln() - f.ln_f_transform(u0.value_at(r))?).exp()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    };
    let value = min_over(a, b)?;
    let shifted = min_over(2.0 * a, 2.0 * b)?;
    Ok(LiminfReport {
        value,
        shifted,
        drift: (shifted - value).abs() / value,
    })
}

/// Constants of the small-amplitude argument for the inverse-exponential case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpInvConstants {
    /// `F ≥ 1/f'` holds on the sampled `(0, s0]`.
    pub s0: f64,
    /// `1/log(1/c' + 1) < min{s0, 1}` and `c' < 1`.
    pub c_prime: f64,
    pub gamma: f64,
    /// Largest `c ≤ c'` with `c(4 + log(2/c))² ≤ γ`.
    pub c0: f64,
}

/// Largest `s` on a log-grid from `10⁻⁶` to `s_cap` such that `pred` holds
/// at every sample up to `s`.
fn valid_prefix<P: Fn(f64) -> Result<bool>>(s_cap: f64, pred: P) -> Result<Option<f64>> {
    let mut best = None;
    for s in geomspace(1e-6, s_cap, 400) {
        if !pred(s)? {
            break;
        }
        best = Some(s);
    }
    Ok(best)
}

pub fn exp_inverse_constants(f: &Nonlinearity, gamma: f64) -> Result<ExpInvConstants> {
    let s0 = valid_prefix(1.0, |s| Ok(f.ln_f_transform(s)? >= -f.ln_df(s)))?
        .ok_or_else(|| Error::Hypothesis("F >= 1/f' fails at the smallest sample".into()))?;
    let m = s0.min(1.0);
    let c_prime = (0.99 / ((1.0 / m).exp() - 1.0)).min(0.99);
    let phi = |c: f64| c * (4.0 + (2.0 / c).ln()).powi(2) - gamma;
    let c0 = if phi(c_prime) <= 0.0 {
        c_prime
    } else {
        bisect(phi, 1e-300, c_prime, 1e-16 * c_prime)
            .ok_or_else(|| Error::Hypothesis(format!("no c0 found for gamma = {gamma}")))?
    };
    // the bisection midpoint may sit on the wrong side by one step
    let c0 = if phi(c0) > 0.0 { c0 * (1.0 - 1e-12) } else { c0 };
    Ok(ExpInvConstants {
        s0,
        c_prime,
        gamma,
        c0,
    })
}

/// Constants of the small-amplitude argument for the log-power case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPowerConstants {
    pub p: f64,
    pub r: f64,
    /// `F(s) ≥ (3/4)(p/(p−1))/f'(s) ≥ s^{−(p−1)}[log(e+1/s)]^r/(2(p−1))` on `(0, s0]`.
    pub s0: f64,
    /// `‖u₀‖_∞ = c < s0` for `c < c'`.
    pub c_prime: f64,
    /// `inf (|x|+1)^{2/(p−1)}[log(|x|+e)]^{−r/(p−1)}(|x|+e)^{−1/(p−1)}`.
    pub m1: f64,
    pub gamma: f64,
    pub c0: f64,
}

fn m1_ratio(p: f64, r: f64, x: f64) -> f64 {
    let k = 1.0 / (p - 1.0);
    (x + 1.0).powf(2.0 * k) * (x + E).ln().powf(-r * k) * (x + E).powf(-k)
}

fn log_power_m1(p: f64, r: f64) -> f64 {
    let mut xs = vec![0.0];
    xs.extend(geomspace(1e-6, 1e8, 4000));
    let (mut best_x, mut best) = (0.0, f64::INFINITY);
    for &x in &xs {
        let v = m1_ratio(p, r, x);
        if v < best {
            best = v;
            best_x = x;
        }
    }
    // golden-section refinement around the best sample
    let (mut a, mut b) = ((best_x * 0.98).max(0.0), best_x * 1.02 + 1e-6);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if m1_ratio(p, r, x1) < m1_ratio(p, r, x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.min(m1_ratio(p, r, 0.5 * (a + b)))
}

pub fn log_power_constants(f: &Nonlinearity, p: f64, r: f64, gamma: f64) -> Result<LogPowerConstants> {
    let lower = |s: f64| -> f64 { -(p - 1.0) * s.ln() + r * (E + 1.0 / s).ln().ln() - (2.0 * (p - 1.0)).ln() };
    let s0 = valid_prefix(f.formula_limit().min(1.0), |s| {
        let ln_big_f = f.ln_f_transform(s)?;
        let mid = (0.75 * p / (p - 1.0)).ln() - f.ln_df(s);
        Ok(ln_big_f >= mid && mid >= lower(s))
    })?
    .ok_or_else(|| Error::Hypothesis("log-power lower bound fails at the smallest sample".into()))?;
    let c_prime = s0 * (1.0 - 1e-9);
    let m1 = log_power_m1(p, r);
    let c_gamma = (gamma / (2.0 * (p - 1.0).powf(r + 1.0))).powf(1.0 / (p - 1.0));
    let c0 = c_prime.min(m1 * (1.0 - 1e-12)).min(c_gamma);
    Ok(LogPowerConstants {
        p,
        r,
        s0,
        c_prime,
        m1,
        gamma,
        c0,
    })
}

/// Worst log-margin `min ln(lhs/rhs)` of one link of an inequality chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMargin {
    pub link: String,
    pub worst: f64,
    pub at_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub c: f64,
    pub links: Vec<LinkMargin>,
}

impl ChainReport {
    /// Every link holds up to `tol` in log-space.
    pub fn holds(&self, tol: f64) -> bool {
        self.links.iter().all(|l| l.worst >= -tol)
    }
}

fn chain_report(c: f64, names: &[&str], x_grid: &[f64], rows: Vec<Result<Vec<f64>>>) -> Result<ChainReport> {
    let mut links: Vec<LinkMargin> = names
        .windows(2)
        .map(|w| LinkMargin {
            link: format!("{} >= {}", w[0], w[1]),
            worst: f64::INFINITY,
            at_x: f64::NAN,
        })
        .collect();
    for (x, row) in x_grid.iter().zip(rows) {
        let row = row?;
        for (k, link) in links.iter_mut().enumerate() {
            let m = row[k] - row[k + 1];
            if m < link.worst {
                link.worst = m;
                link.at_x = *x;
            }
        }
    }
    Ok(ChainReport { c, links })
}

/// Evaluate the chain
/// `F(u₀) ≥ 1/f'(u₀) ≥ c⁻¹(|x|²+1)ℓ²/Λ² ≥ c⁻¹(|x|²+1)(ℓ/(log(2/c)+4ℓ))²
///  ≥ (|x|²+1)/(c(4+log(2/c))²) ≥ γ⁻¹(|x|²+1)`
/// with `ℓ = log(|x|+e)` and `Λ = log[c⁻¹(|x|²+1)ℓ²+1]`, in log-space.
pub fn exp_inverse_chain(f: &Nonlinearity, c: f64, gamma: f64, x_grid: &[f64]) -> Result<ChainReport> {
    let case = ApplicationCase::ExpInv;
    let names = ["F(u0)", "1/f'(u0)", "(|x|^2+1)l^2/(c L^2)", "(|x|^2+1)(l/(log(2/c)+4l))^2/c", "(|x|^2+1)/(c(4+log(2/c))^2)", "(|x|^2+1)/gamma"];
    let lc = (2.0 / c).ln();
    let rows = x_grid
        .par_iter()
        .map(|&x| {
            let u = case.value(c, x);
            let l = (x + E).ln();
            let big_l = ((x * x + 1.0) * l * l / c + 1.0).ln();
            let base = (x * x + 1.0).ln() - c.ln();
            Ok(vec![
                f.ln_f_transform(u)?,
                -f.ln_df(u),
                base + 2.0 * l.ln() - 2.0 * big_l.ln(),
                base + 2.0 * (l / (lc + 4.0 * l)).ln(),
                base - 2.0 * (4.0 + lc).ln(),
                (x * x + 1.0).ln() - gamma.ln(),
            ])
        })
        .collect();
    chain_report(c, &names, x_grid, rows)
}

/// Evaluate the log-power chain down to `γ⁻¹(|x|²+1)` in log-space.
pub fn log_power_chain(f: &Nonlinearity, consts: &LogPowerConstants, c: f64, x_grid: &[f64]) -> Result<ChainReport> {
    let (p, r) = (consts.p, consts.r);
    let case = ApplicationCase::LogPower { p, r };
    let names = ["F(u0)", "B(x)", "C(x; m1)", "(|x|^2+1)/(2(p-1)^(r+1)c^(p-1))", "(|x|^2+1)/gamma"];
    let k = 1.0 / (p - 1.0);
    let pre = -(2.0 * (p - 1.0)).ln() - (p - 1.0) * c.ln();
    let rows = x_grid
        .par_iter()
        .map(|&x| {
            let u = case.value(c, x);
            let l = (x + E).ln();
            let common = pre + 2.0 * (x + 1.0).ln() - r * l.ln();
            let inner_b = E + (x + 1.0).powf(2.0 * k) * l.powf(-r * k) / c;
            let inner_c = E + consts.m1 * (x + E).powf(k) / c;
            Ok(vec![
                f.ln_f_transform(u)?,
                common + r * inner_b.ln().ln(),
                common + r * inner_c.ln().ln(),
                pre - r * (p - 1.0).ln() + (x * x + 1.0).ln(),
                (x * x + 1.0).ln() - consts.gamma.ln(),
            ])
        })
        .collect();
    chain_report(c, &names, x_grid, rows)
}

/// Sup of `e^{tΔ}u₀` at a list of times, for reports.
pub fn semigroup_profile(u0: &RadialField, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    times
        .par_iter()
        .map(|&t| Ok((t, heat_semigroup_sup(u0, t)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_power_closed_form() {
        let p = 3.0;
        let f = Nonlinearity::power(p).unwrap();
        let gamma = 0.7;
        let grid = uniform_grid(5.0, 0.5);
        let u0 = canonical_initial_data(&f, gamma, 1, grid.clone()).unwrap();
        for (r, v) in grid.iter().zip(&u0.values) {
            let want = (1.0 / (p - 1.0)).powf(1.0 / (p - 1.0))
                * gamma.powf(1.0 / (p - 1.0))
                * (1.0 + r * r).powf(-1.0 / (p - 1.0));
            assert!((v / want - 1.0).abs() < 1e-13);
        }
        assert!(u0.non_increasing);
    }

    #[test]
    fn application_values_at_origin() {
        let grid = uniform_grid(1.0, 0.5);
        let a = application_initial_data(ApplicationCase::ExpInv, 1.0, 1, grid.clone()).unwrap();
        assert!((a.values[0] - 1.0 / 2f64.ln()).abs() < 1e-15);
        let b = application_initial_data(ApplicationCase::LogPower { p: 3.0, r: 1.0 }, 1.0, 2, grid).unwrap();
        assert!((b.values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monotonicity_violation_is_found() {
        let rec = |gamma: f64, global: bool| RunRecord {
            gamma,
            verdict: if global {
                Verdict::Global { t_reached: 1.0 }
            } else {
                Verdict::BlowUp {
                    t_estimate: 1.0,
                    cause: BlowUpCause::Ceiling,
                }
            },
            final_sup: 0.0,
            steps: 0,
        };
        let ok = [rec(1.0, true), rec(2.0, true), rec(3.0, false)];
        assert!(monotonicity_violations(&ok).is_empty());
        let bad = [rec(1.0, true), rec(2.0, false), rec(3.0, true)];
        assert_eq!(monotonicity_violations(&bad), vec![(2.0, 3.0)]);
    }

    #[test]
    fn m1_matches_origin_value_for_cubic_case() {
        // the infimum sits at the origin for (p, r) = (3, 1)
        let m1 = log_power_m1(3.0, 1.0);
        assert!((m1 - (-0.5f64).exp()).abs() < 1e-12, "{m1}");
    }

    #[test]
    fn liminf_of_canonical_power_data_tends_to_gamma() {
        let f = Nonlinearity::power(5.0).unwrap();
        let gamma = 0.3;
        let u0 = canonical_initial_data(&f, gamma, 1, uniform_grid(100.0, 1.0)).unwrap();
        let rep = liminf_ratio(&f, &u0, [10.0, 90.0]).unwrap();
        assert!((rep.value / gamma - 1.0).abs() < 0.02, "{rep:?}");
    }

    #[test]
    fn zero_data_is_global() {
        let f = Nonlinearity::power(5.0).unwrap();
        let cfg = SolverConfig {
            t_max: 5.0,
            dr: 0.5,
            ..Default::default()
        };
        let grid = uniform_grid(cfg.domain_radius(), cfg.dr);
        let n = grid.len();
        let u0 = RadialField::from_values(1, grid, vec![0.0; n], 0.0)
            .with_tail(Tail::Zero)
            .mark_non_increasing()
            .unwrap();
        let out = classify(&f, &u0, &cfg, None).unwrap();
        assert!(out.verdict.is_global());
        assert_eq!(out.final_sup(), 0.0);
    }
}
