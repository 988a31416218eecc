//! Radial semilinear heat flow `u_t = u_rr + (N−1)/r·u_r + f(u)`.
//!
//! Contains the linear semigroup at the origin, an IMEX evolution with
//! blow-up detection, the necessary-condition scan and the sandwich check
//! against a pair of lifted solutions.

use std::fmt;
use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Kind, Nonlinearity};
use crate::numerics::gamma_half;
use crate::numerics::quadrature::{integrate_with_breaks, QuadOptions};
use crate::numerics::tridiag;
use crate::quasi::LiftedSolution;

/// A radial function `r ↦ u(r)` shared between threads.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Behaviour of a field beyond the last grid point.
#[derive(Clone)]
pub enum Tail {
    /// The field is known in closed form everywhere.
    Exact(RadialFn),
    /// `u(r) ≈ amplitude·r^{−exponent}`.
    PowerLaw { amplitude: f64, exponent: f64 },
    Zero,
    Unknown,
}

impl fmt::Debug for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Exact(_) => write!(f, "Exact"),
            Tail::PowerLaw {
                amplitude,
                exponent,
            } => write!(f, "PowerLaw({amplitude}·r^-{exponent})"),
            Tail::Zero => write!(f, "Zero"),
            Tail::Unknown => write!(f, "Unknown"),
        }
    }
}

/// Radial grid function at a fixed time.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub n_dim: usize,
    pub r_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub time: f64,
    /// Set only after the values were checked to be non-increasing in `r`.
    pub non_increasing: bool,
    pub tail: Tail,
}

/// `r_i = i·dr` up to the first node at or beyond `r_max`.
pub fn uniform_grid(r_max: f64, dr: f64) -> Vec<f64> {
    let m = (r_max / dr).ceil() as usize;
    (0..=m).map(|i| i as f64 * dr).collect()
}

impl RadialField {
    pub fn from_values(n_dim: usize, r_grid: Vec<f64>, values: Vec<f64>, time: f64) -> Self {
        assert_eq!(r_grid.len(), values.len());
        Self {
            n_dim,
            r_grid,
            values,
            time,
            non_increasing: false,
            tail: Tail::Unknown,
        }
    }

    /// Sample `u` on the grid and keep it as the exact tail.
    pub fn from_fn(n_dim: usize, r_grid: Vec<f64>, time: f64, u: RadialFn) -> Self {
        let values = r_grid.iter().map(|&r| u(r)).collect();
        Self {
            n_dim,
            r_grid,
            values,
            time,
            non_increasing: false,
            tail: Tail::Exact(u),
        }
    }

    pub fn with_tail(mut self, tail: Tail) -> Self {
        self.tail = tail;
        self
    }

    /// Verify that the sampled values do not increase and set the tag.
    pub fn mark_non_increasing(mut self) -> Result<Self> {
        if let Some(i) = (1..self.values.len()).find(|&i| self.values[i] > self.values[i - 1]) {
            return Err(Error::Config(format!(
                "field increases between r = {} and r = {}",
                self.r_grid[i - 1],
                self.r_grid[i]
            )));
        }
        self.non_increasing = true;
        Ok(self)
    }

    pub fn r_end(&self) -> f64 {
        *self.r_grid.last().unwrap()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at radius `r`: cubic interpolation on the grid (even extension
    /// through `r = 0`), the tail model beyond it. `NaN` for an unknown tail.
    pub fn value_at(&self, r: f64) -> f64 {
        let r = r.abs();
        let n = self.r_grid.len();
        if r > self.r_end() {
            return match &self.tail {
                Tail::Exact(u) => u(r),
                Tail::PowerLaw {
                    amplitude,
                    exponent,
                } => amplitude * r.powf(-exponent),
                Tail::Zero => 0.0,
                Tail::Unknown => f64::NAN,
            };
        }
        if n < 4 {
            return crate::numerics::interp::linear(&self.r_grid, &self.values, r);
        }
        let i = crate::numerics::interp::locate(&self.r_grid, r);
        let start = i as isize - 1;
        let start = start.min(n as isize - 4);
        let node = |k: isize| -> (f64, f64) {
            if k < 0 {
                (-self.r_grid[(-k) as usize], self.values[(-k) as usize])
            } else {
                (self.r_grid[k as usize], self.values[k as usize])
            }
        };
        let pts: [(f64, f64); 4] = [node(start), node(start + 1), node(start + 2), node(start + 3)];
        let mut acc = 0.0;
        for j in 0..4 {
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (r - pts[m].0) / (pts[j].0 - pts[m].0);
                }
            }
            acc += w * pts[j].1;
        }
        acc
    }
}

/// Upper end of the Gaussian variable `z = r/(2√t)`.
fn z_cutoff(n_dim: usize) -> f64 {
    9.0 + (n_dim as f64).sqrt()
}

/// `e^{tΔ}u(0) = (2/Γ(N/2)) ∫₀^∞ e^{−z²} z^{N−1} u(2√t z) dz` for a radial `u`
/// given as a closure; `breaks_r` are radii where `u` may be non-smooth.
pub fn heat_semigroup_at_origin<U: Fn(f64) -> f64>(n_dim: usize, u: U, t: f64, breaks_r: &[f64]) -> f64 {
    let scale = 2.0 * t.sqrt();
    let zmax = z_cutoff(n_dim);
    let n1 = n_dim as i32 - 1;
    let mut breaks = vec![0.0];
    breaks.extend(
        breaks_r
            .iter()
            .map(|r| r / scale)
            .filter(|&z| z > 0.0 && z < zmax),
    );
    for z in [0.5, 1.0, 2.0, 4.0] {
        breaks.push(z);
    }
    breaks.push(zmax);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integral = integrate_with_breaks(
        |z| (-z * z).exp() * z.powi(n1) * u(scale * z),
        &breaks,
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        },
    );
    2.0 / gamma_half(n_dim) * integral.value
}

/// `‖e^{tΔ}u₀‖_∞`, attained at the origin for radially non-increasing data.
pub fn heat_semigroup_sup(u0: &RadialField, t: f64) -> Result<f64> {
    if !u0.non_increasing {
        return Err(Error::Config(
            "the semigroup supremum needs radially non-increasing data".into(),
        ));
    }
    if !(t > 0.0) {
        return Ok(u0.sup());
    }
    let n = u0.n_dim;
    let scale = 2.0 * t.sqrt();
    let z_end = u0.r_end() / scale;
    let zmax = z_cutoff(n);
    // one panel per grid cell keeps the piecewise cubic exact; thin out
    // cells far below the Gaussian scale
    let stride = (u0.r_grid.len() / 4000).max(1);
    let breaks: Vec<f64> = u0.r_grid.iter().step_by(stride).cloned().collect();
    if matches!(u0.tail, Tail::Unknown) && z_end < zmax {
        let inner = heat_semigroup_at_origin(n, |r| if r <= u0.r_end() { u0.value_at(r) } else { 0.0 }, t, &breaks);
        let weight_shape = heat_semigroup_at_origin(
            n,
            |r| if r > u0.r_end() { 1.0 } else { 0.0 },
            t,
            &[u0.r_end()],
        );
        let weight = weight_shape * u0.values.last().unwrap().abs();
        if weight > 1e-12 * inner.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::TailUnknown { weight });
        }
        return Ok(inner);
    }
    let mut with_end = breaks;
    with_end.push(u0.r_end());
    Ok(heat_semigroup_at_origin(n, |r| u0.value_at(r), t, &with_end))
}

/// First time in `t_grid` with `F(‖e^{tΔ}u₀‖_∞) < t`, if any.
///
/// Such a time certifies that no global solution exists for `u₀`.
pub fn necessary_condition_scan(f: &Nonlinearity, u0: &RadialField, t_grid: &[f64]) -> Result<Option<f64>> {
    let flags: Vec<Result<bool>> = t_grid
        .par_iter()
        .map(|&t| {
            let s = heat_semigroup_sup(u0, t)?;
            if !(s > f.domain_floor()) {
                return Ok(false);
            }
            Ok(f.ln_f_transform(s)? < t.ln())
        })
        .collect();
    for (t, flag) in t_grid.iter().zip(flags) {
        if flag? {
            return Ok(Some(*t));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `u_r(R) = 0`.
    Neumann,
    /// `u(R, t)` from the supplied envelope.
    Dirichlet,
}

/// Evolution parameters; serialized keys follow the config file names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "T_max")]
    pub t_max: f64,
    /// Outer radius; `10√(T_max+1)` when absent.
    #[serde(rename = "R_domain")]
    pub r_domain: Option<f64>,
    pub dr: f64,
    /// Blow-up ceiling; nonlinearity default when absent.
    #[serde(rename = "U_max")]
    pub u_max: Option<f64>,
    /// Smallest admissible step; `1e−12·T_max` when absent.
    pub dt_min: Option<f64>,
    pub boundary: BoundaryKind,
    pub rtol: f64,
    pub atol: f64,
    pub dt_initial: f64,
    /// Largest relative growth of `‖u‖_∞` allowed from the reaction in a step.
    pub reaction_fraction: f64,
    pub snapshot_times: Vec<f64>,
    /// Relative slack when comparing against a supersolution envelope.
    pub envelope_slack: f64,
    /// Rerun classification at `dr/2` and fail if the verdict changes.
    pub refinement_check: bool,
    /// How often an undecided run is repeated with `T_max` quadrupled.
    pub max_extensions: usize,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t_max: 50.0,
            r_domain: None,
            dr: 0.05,
            u_max: None,
            dt_min: None,
            boundary: BoundaryKind::Neumann,
            rtol: 1e-6,
            atol: 1e-12,
            dt_initial: 1e-4,
            reaction_fraction: 0.1,
            snapshot_times: Vec::new(),
            envelope_slack: 0.05,
            refinement_check: false,
            max_extensions: 2,
            max_steps: 2_000_000,
        }
    }
}

impl SolverConfig {
    pub fn domain_radius(&self) -> f64 {
        self.r_domain
            .unwrap_or_else(|| 10.0 * (self.t_max + 1.0).sqrt())
    }

    pub fn ceiling(&self, f: &Nonlinearity) -> f64 {
        self.u_max.unwrap_or_else(|| default_ceiling(f))
    }

    pub fn min_step(&self) -> f64 {
        self.dt_min.unwrap_or(1e-12 * self.t_max)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("T_max must be positive");
        }
        if !(self.dr > 0.0) {
            return bad("dr must be positive");
        }
        if !(self.domain_radius() >= 4.0 * self.dr) {
            return bad("R_domain must span at least four cells");
        }
        if !(self.rtol > 0.0 && self.atol >= 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.dt_initial > 0.0) {
            return bad("dt_initial must be positive");
        }
        if !(self.reaction_fraction > 0.0) {
            return bad("reaction_fraction must be positive");
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) {
                return bad("U_max must be positive");
            }
        }
        if self.snapshot_times.iter().any(|&t| !(t >= 0.0)) {
            return bad("snapshot times must be nonnegative");
        }
        Ok(())
    }
}

/// `10³` for the inverse-exponential case (whose formula part stays below
/// `1/e`), `10⁶` otherwise.
pub fn default_ceiling(f: &Nonlinearity) -> f64 {
    match f.kind() {
        Kind::ExpInverse => 1e3,
        _ => 1e6,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpCause {
    Ceiling,
    StepCollapse,
    NonFinite,
    NecessaryCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Global { t_reached: f64 },
    BlowUp { t_estimate: f64, cause: BlowUpCause },
    Undecided { t_reached: f64, reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Global { .. } => "global",
            Verdict::BlowUp { .. } => "blow_up",
            Verdict::Undecided { .. } => "undecided",
        }
    }

    pub fn is_global(&self) -> bool {
        matches!(self, Verdict::Global { .. })
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self, Verdict::BlowUp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dr: f64,
    pub r_domain: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionOutcome {
    pub verdict: Verdict,
    #[serde(skip)]
    pub snapshots: Vec<RadialField>,
    pub sup_norm_history: Vec<(f64, f64)>,
    pub dt_stats: DtStats,
    pub grid: GridSpec,
    /// Negative values clamped to zero after accepted steps.
    pub clamped: usize,
    /// Largest `u/envelope` seen at the checked times, when an envelope was given.
    pub envelope_ratio: Option<f64>,
}

impl EvolutionOutcome {
    pub fn snapshot_at(&self, t: f64) -> Option<&RadialField> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-9 * t.max(1.0))
    }

    pub fn final_sup(&self) -> f64 {
        self.sup_norm_history.last().map_or(f64::NAN, |p| p.1)
    }
}

/// Tolerated size of negative values before clamping is logged as suspicious.
const NEGATIVE_TOLERANCE: f64 = 1e-12;

struct Operator {
    lower: Vec<f64>,
    center: Vec<f64>,
    upper: Vec<f64>,
    dirichlet: bool,
}

impl Operator {
    fn new(n_dim: usize, r: &[f64], dr: f64, dirichlet: bool) -> Self {
        let m = r.len();
        let n1 = n_dim as f64 - 1.0;
        let inv = 1.0 / (dr * dr);
        let mut lower = vec![0.0; m];
        let mut center = vec![0.0; m];
        let mut upper = vec![0.0; m];
        // symmetry stencil Δu(0) ≈ 2N(u₁ − u₀)/Δr²
        center[0] = -2.0 * n_dim as f64 * inv;
        upper[0] = 2.0 * n_dim as f64 * inv;
        for i in 1..m - 1 {
            let adv = n1 / (2.0 * r[i] * dr);
            lower[i] = inv - adv;
            center[i] = -2.0 * inv;
            upper[i] = inv + adv;
        }
        // reflected ghost node for u_r(R) = 0
        lower[m - 1] = 2.0 * inv;
        center[m - 1] = -2.0 * inv;
        Self {
            lower,
            center,
            upper,
            dirichlet,
        }
    }

    /// One IMEX Euler step: `(I − dt L) u⁺ = u + dt f(u)`.
    fn step(&self, f: &dyn Fn(f64) -> f64, u: &[f64], dt: f64, boundary: f64, out: &mut [f64], work: &mut Work) {
        let m = u.len();
        for i in 0..m {
            work.rhs[i] = u[i] + dt * f(u[i]);
            work.lo[i] = -dt * self.lower[i];
            work.di[i] = 1.0 - dt * self.center[i];
            work.up[i] = -dt * self.upper[i];
        }
        if self.dirichlet {
            work.lo[m - 1] = 0.0;
            work.di[m - 1] = 1.0;
            work.rhs[m - 1] = boundary;
        }
        tridiag::solve(&work.lo, &work.di, &work.up, &work.rhs, out);
    }
}

struct Work {
    rhs: Vec<f64>,
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

impl Work {
    fn new(m: usize) -> Self {
        Self {
            rhs: vec![0.0; m],
            lo: vec![0.0; m],
            di: vec![0.0; m],
            up: vec![0.0; m],
        }
    }
}

/// `f` extended by zero below the domain floor when `f(0+) = 0`.
fn reaction(f: &Nonlinearity) -> impl Fn(f64) -> f64 + '_ {
    let floor = f.domain_floor();
    let vanishes = f.vanishes_at_zero();
    move |u: f64| {
        if vanishes && !(u > floor.max(0.0)) {
            0.0
        } else {
            f.f(u)
        }
    }
}

/// Largest `u/envelope` over the grid at time `t`.
fn envelope_ratio(env: &LiftedSolution, r: &[f64], u: &[f64], t: f64) -> Result<f64> {
    let ratios: Vec<Result<f64>> = r
        .par_iter()
        .zip(u.par_iter())
        .map(|(&x, &val)| Ok(val / env.eval(x, t)?))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for q in ratios {
        worst = worst.max(q?);
    }
    Ok(worst)
}

/// Evolve `u₀` on `[0, R_domain]` until `T_max`, blow-up detection, or a step
/// collapse.
///
/// Diffusion is implicit and the reaction explicit; every step is taken
/// once with `dt` and twice with `dt/2`, the difference controls `dt` and
/// the Richardson combination `2u_{dt/2} − u_dt` is kept. The step is also
/// capped so that the reaction changes `‖u‖_∞` by at most
/// `reaction_fraction`.
///
/// At `T_max` the run is Global when `‖u‖_∞` no longer grows and stays below
/// the envelope (with `envelope_slack`) if one is supplied; otherwise it is
/// Undecided.
pub fn evolve(
    f: &Nonlinearity,
    u0: &RadialField,
    cfg: &SolverConfig,
    envelope: Option<&LiftedSolution>,
) -> Result<EvolutionOutcome> {
    cfg.validate()?;
    if cfg.boundary == BoundaryKind::Dirichlet && envelope.is_none() {
        return Err(Error::Config(
            "Dirichlet boundary needs an envelope to supply boundary values".into(),
        ));
    }
    let n_dim = u0.n_dim;
    let r = uniform_grid(cfg.domain_radius(), cfg.dr);
    let m = r.len();
    let r_domain = r[m - 1];
    let mut u: Vec<f64> = r.iter().map(|&x| u0.value_at(x)).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!(
            "initial data is not finite on [0, {r_domain}]; extend its grid or give a tail model"
        )));
    }
    let rhs = reaction(f);
    let op = Operator::new(n_dim, &r, cfg.dr, cfg.boundary == BoundaryKind::Dirichlet);
    let boundary_at = |t: f64| -> Result<f64> {
        match (cfg.boundary, envelope) {
            (BoundaryKind::Dirichlet, Some(env)) => env.eval(r_domain, t),
            _ => Ok(0.0),
        }
    };
    let ceiling = cfg.ceiling(f);
    let dt_min = cfg.min_step();
    let mut stops: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&t| t > 0.0 && t < cfg.t_max)
        .collect();
    stops.push(cfg.t_max);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut clamped = 0;
    let mut clamp = |u: &mut [f64]| {
        for v in u.iter_mut() {
            if *v < 0.0 {
                if *v < -NEGATIVE_TOLERANCE {
                    debug!("clamping negative value {v}");
                }
                *v = 0.0;
                clamped += 1;
            }
        }
    };
    if f.vanishes_at_zero() {
        clamp(&mut u);
    }

    let mut snapshots = vec![RadialField::from_values(n_dim, r.clone(), u.clone(), 0.0)];
    let mut history = vec![(0.0, sup_norm(&u))];
    let mut env_ratio = None;
    let check_envelope = |u: &[f64], t: f64, env_ratio: &mut Option<f64>| -> Result<()> {
        if let Some(env) = envelope {
            let q = envelope_ratio(env, &r, u, t)?;
            *env_ratio = Some(env_ratio.map_or(q, |old: f64| old.max(q)));
        }
        Ok(())
    };
    check_envelope(&u, 0.0, &mut env_ratio)?;

    let mut t = 0.0;
    let mut dt = cfg.dt_initial.min(cfg.t_max);
    let mut stop_idx = 0;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let (mut dt_lo, mut dt_hi, mut dt_sum) = (f64::INFINITY, 0.0f64, 0.0);
    let mut work = Work::new(m);
    let (mut full, mut half, mut two_half) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);

    let stats = |accepted: usize, rejected: usize, lo: f64, hi: f64, sum: f64| DtStats {
        accepted,
        rejected,
        min: if accepted > 0 { lo } else { 0.0 },
        max: hi,
        mean: if accepted > 0 { sum / accepted as f64 } else { 0.0 },
    };
    let grid = GridSpec {
        dr: cfg.dr,
        r_domain,
        points: m,
    };

    let verdict = loop {
        if accepted + rejected >= cfg.max_steps {
            break Verdict::Undecided {
                t_reached: t,
                reason: format!("step budget of {} exhausted", cfg.max_steps),
            };
        }
        let target = stops[stop_idx];
        let sup = sup_norm(&u);
        let react = u.iter().map(|&v| rhs(v).abs()).fold(0.0, f64::max);
        let mut h = dt.min(target - t);
        if react > 0.0 {
            h = h.min(cfg.reaction_fraction * sup.abs().max(f64::MIN_POSITIVE) / react);
        }
        if h < dt_min && target - t > dt_min {
            break Verdict::BlowUp {
                t_estimate: t,
                cause: BlowUpCause::StepCollapse,
            };
        }
        op.step(&rhs, &u, h, boundary_at(t + h)?, &mut full, &mut work);
        op.step(&rhs, &u, 0.5 * h, boundary_at(t + 0.5 * h)?, &mut half, &mut work);
        op.step(&rhs, &half, 0.5 * h, boundary_at(t + h)?, &mut two_half, &mut work);
        let mut err: f64 = 0.0;
        for i in 0..m {
            let scale = cfg.atol + cfg.rtol * two_half[i].abs().max(u[i].abs());
            err = err.max((two_half[i] - full[i]).abs() / scale);
        }
        if !err.is_finite() {
            if h <= dt_min {
                break Verdict::BlowUp {
                    t_estimate: t,
                    cause: BlowUpCause::NonFinite,
                };
            }
            rejected += 1;
            dt = 0.2 * h;
            continue;
        }
        if err > 1.0 {
            rejected += 1;
            dt = h * (0.9 / err.sqrt()).max(0.2);
            continue;
        }
        for i in 0..m {
            u[i] = 2.0 * two_half[i] - full[i];
        }
        if f.vanishes_at_zero() {
            clamp(&mut u);
        }
        t = if target - (t + h) <= 1e-12 * target.max(1.0) {
            target
        } else {
            t + h
        };
        accepted += 1;
        dt_lo = dt_lo.min(h);
        dt_hi = dt_hi.max(h);
        dt_sum += h;
        let growth = if err > 0.0 { 0.9 / err.sqrt() } else { 4.0 };
        // keep the proposal when the step was cut only to land on a stop
        dt = dt.max(h) * growth.clamp(0.2, 4.0);
        let sup = sup_norm(&u);
        history.push((t, sup));
        if !sup.is_finite() {
            break Verdict::BlowUp {
                t_estimate: t,
                cause: BlowUpCause::NonFinite,
            };
        }
        if sup > ceiling {
            break Verdict::BlowUp {
                t_estimate: t,
                cause: BlowUpCause::Ceiling,
            };
        }
        if t == target {
            snapshots.push(RadialField::from_values(n_dim, r.clone(), u.clone(), t));
            check_envelope(&u, t, &mut env_ratio)?;
            stop_idx += 1;
            if stop_idx == stops.len() {
                break final_verdict(&history, t, env_ratio, cfg.envelope_slack);
            }
        }
    };
    if clamped > 0 {
        debug!("clamped {clamped} negative values");
    }
    Ok(EvolutionOutcome {
        verdict,
        snapshots,
        sup_norm_history: history,
        dt_stats: stats(accepted, rejected, dt_lo, dt_hi, dt_sum),
        grid,
        clamped,
        envelope_ratio: env_ratio,
    })
}

fn sup_norm(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |a: f64, &b| a.max(b.abs()))
}

/// Verdict at `T_max`: the supremum must not be growing over the last tenth
/// of the run, and must respect the envelope when one was checked.
fn final_verdict(history: &[(f64, f64)], t: f64, env_ratio: Option<f64>, slack: f64) -> Verdict {
    if let Some(q) = env_ratio {
        if q > 1.0 + slack {
            return Verdict::Undecided {
                t_reached: t,
                reason: format!("solution exceeds the supersolution envelope by a factor {q}"),
            };
        }
    }
    let t_ref = 0.9 * t;
    let idx = history.partition_point(|p| p.0 < t_ref).min(history.len() - 1);
    let (earlier, last) = (history[idx].1, history.last().unwrap().1);
    if last > earlier * (1.0 + 1e-9) {
        return Verdict::Undecided {
            t_reached: t,
            reason: format!("sup norm still growing at T_max ({earlier} -> {last})"),
        };
    }
    Verdict::Global { t_reached: t }
}

/// Worst margins of one snapshot in the sandwich check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMargins {
    pub t: f64,
    /// `min ln[(t+1)F(W_*(y)) / F(u)]`; nonnegative when `u ≥ u_β`.
    pub lower: f64,
    /// `min ln[F(u) / ((t+1)F(W*(y)))]`; nonnegative when `u ≤ u_α`.
    pub upper: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub tol: f64,
    pub snapshots: Vec<SnapshotMargins>,
    pub worst_lower: f64,
    pub worst_upper: f64,
}

/// Check `|y|²/F(W_*(y)) ≤ |x|²/F(u(x,t)) ≤ |y|²/F(W*(y))`, `y = x/√(t+1)`,
/// at every snapshot of a global run, allowing relative slack `tol`.
///
/// With `F(W(y)) = G(v(y))` the check is done on `ln F`, so it is also
/// meaningful at `x = 0`.
pub fn verify_sandwich(
    f: &Nonlinearity,
    run: &EvolutionOutcome,
    lower: &LiftedSolution,
    upper: &LiftedSolution,
    tol: f64,
) -> Result<SandwichReport> {
    if !run.verdict.is_global() {
        return Err(Error::Config(format!(
            "sandwich check needs a global run, got {}",
            run.verdict.label()
        )));
    }
    if lower.n_dim() != upper.n_dim() {
        return Err(Error::Config("sandwich bounds differ in dimension".into()));
    }
    let slack = (1.0 + tol).ln();
    let mut snapshots = Vec::new();
    for snap in &run.snapshots {
        let t = snap.time;
        let shift = (t + 1.0).ln();
        let r_lim = lower.profile.r_end().min(upper.profile.r_end());
        let rows: Vec<Result<Option<(f64, f64, f64)>>> = snap
            .r_grid
            .par_iter()
            .zip(snap.values.par_iter())
            .map(|(&x, &u)| {
                let y = x / (t + 1.0).sqrt();
                if y > r_lim || !(u > f.domain_floor()) {
                    return Ok(None);
                }
                let ln_fu = f.ln_f_transform(u)?;
                let ln_low = shift + lower.g.ln_big_g(lower.profile.value(y)?);
                let ln_up = shift + upper.g.ln_big_g(upper.profile.value(y)?);
                Ok(Some((x, ln_low - ln_fu, ln_fu - ln_up)))
            })
            .collect();
        let mut margins = SnapshotMargins {
            t,
            lower: f64::INFINITY,
            upper: f64::INFINITY,
            points: 0,
        };
        for row in rows {
            let Some((x, lo, up)) = row? else { continue };
            if lo < -slack {
                return Err(Error::SandwichViolated {
                    x,
                    t,
                    detail: format!("u below the subsolution bound (log margin {lo})"),
                });
            }
            if up < -slack {
                return Err(Error::SandwichViolated {
                    x,
                    t,
                    detail: format!("u above the supersolution bound (log margin {up})"),
                });
            }
            margins.lower = margins.lower.min(lo);
            margins.upper = margins.upper.min(up);
            margins.points += 1;
        }
        if margins.points == 0 {
            warn!("snapshot at t = {t} has no point inside both profile grids");
        }
        snapshots.push(margins);
    }
    let worst_lower = snapshots.iter().map(|s| s.lower).fold(f64::INFINITY, f64::min);
    let worst_upper = snapshots.iter().map(|s| s.upper).fold(f64::INFINITY, f64::min);
    Ok(SandwichReport {
        tol,
        snapshots,
        worst_lower,
        worst_upper,
    })
}
