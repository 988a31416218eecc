use log::warn;
use serde::Serialize;
use serde_json::json;

use qss_core::heat::{
    necessary_condition_scan, uniform_grid, verify_sandwich, BoundaryKind, DtStats, GridSpec, RadialField,
    SandwichReport, SolverConfig, Verdict,
};
use qss_core::nonlinearity::{fujita_classify, FujitaClass, NonlinearitySpec};
use qss_core::numerics::{geomspace, linspace};
use qss_core::profile::{estimate_ell, find_alpha_star, solve_profile, AlphaStar, ProfileModel, SelfSimilarProfile};
use qss_core::quasi::{
    build_subsolution, build_supersolution, fit_beta_below, gamma_star, residual_triple, verify_residual, w_from_v,
    Comparison, LiftedSolution, ResidualGrid, ResidualReport, Residuals, SuperSubConfig,
};
use qss_core::threshold::{
    application_initial_data, bisect_amplitude, canonical_initial_data, classify, dichotomy_config,
    discover_bracket, exp_inverse_chain, exp_inverse_constants, liminf_ratio, log_power_chain, log_power_constants,
    monotonicity_violations, scan_times, semigroup_profile, Application, ApplicationCase, Canonical, ChainReport,
    DataFamily, LiminfReport, RunRecord, ThresholdBracket, SCAN_HORIZON,
};
use qss_core::Nonlinearity;

use crate::config::{self, config_error, RunConfig, FORMAT_VERSION};
use crate::output::{num, plot_script, Artifacts, Csv, Plot};
use crate::{CaseArg, Common, NonlinearityArgs, ProfileKindArg};

type Res = anyhow::Result<()>;

fn run_config(
    command: &'static str,
    nonlinearity: Option<NonlinearitySpec>,
    n_dim: Option<usize>,
    solver: Option<SolverConfig>,
    params: serde_json::Value,
) -> RunConfig {
    RunConfig {
        format_version: FORMAT_VERSION,
        command,
        nonlinearity,
        n_dim,
        solver,
        params,
    }
}

fn case_from(arg: CaseArg, f: &NonlinearityArgs) -> anyhow::Result<ApplicationCase> {
    Ok(match arg {
        CaseArg::ExpInv => ApplicationCase::ExpInv,
        CaseArg::LogPower => ApplicationCase::LogPower {
            p: f.p.ok_or_else(|| config_error("--p is required for --case log-power"))?,
            r: f.r.ok_or_else(|| config_error("--r is required for --case log-power"))?,
        },
    })
}

fn case_spec(case: ApplicationCase) -> NonlinearitySpec {
    match case {
        ApplicationCase::ExpInv => NonlinearitySpec::ExpInverse,
        ApplicationCase::LogPower { p, r } => NonlinearitySpec::LogPower { p, r },
    }
}

fn case_nonlinearity(case: ApplicationCase, n_dim: usize) -> anyhow::Result<Nonlinearity> {
    if !case.check_range(n_dim) {
        warn!("{case:?} with N = {n_dim}: p <= 1 + 2/N, so q is not below 1 + N/2");
    }
    case.nonlinearity().map_err(|e| config_error(e.to_string()))
}

fn positive(name: &str, v: f64) -> anyhow::Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(config_error(format!("--{name} must be positive, got {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- q-estimate

#[derive(Serialize)]
struct QResult {
    nonlinearity: String,
    q: f64,
    correction_model: qss_core::nonlinearity::CorrectionModel,
    spread: f64,
    fujita: Option<FujitaClass>,
    sequence: Vec<(f64, f64)>,
}

pub fn q_estimate(fa: &NonlinearityArgs, n: Option<usize>, common: &Common) -> Res {
    let file = config::load(common.config.as_deref())?;
    file.reject_solver_keys("q-estimate")?;
    let n_dim = n.or(file.n_dim);
    let spec = config::nonlinearity_spec(fa)?;
    let f = config::build_nonlinearity(&spec)?;
    let est = f.estimate_q()?;
    let fujita = n_dim.map(|n| fujita_classify(est.q, n)).transpose()?;

    let cfg = run_config("q_estimate", Some(spec), n_dim, None, json!({}));
    let mut csv = Csv::new(&[("nonlinearity", f.label())], &["s", "dfF"]);
    for (s, v) in &est.sequence {
        csv.row(&[*s, *v]);
    }
    let result = QResult {
        nonlinearity: f.label(),
        q: est.q,
        correction_model: est.model,
        spread: est.spread,
        fujita,
        sequence: est.sequence.clone(),
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "exponent q = lim f'(s)F(s) as s -> 0, compared with 1 + N/2", &result)?;
    out.add("sequence.csv", csv.finish());
    out.add(
        "plot.py",
        plot_script(&[Plot::new("sequence.csv", "s", &["dfF"], "f'(s)F(s)").log(true, false)]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- profile

pub struct ProfileArgs {
    pub kind: ProfileKindArg,
    pub p: f64,
    pub n: Option<usize>,
    pub alpha: f64,
    pub r_max: f64,
    pub tol: f64,
    pub alpha_star: bool,
    pub alpha_max: f64,
}

/// Relative width of the α_* bracket.
const ALPHA_STAR_TOL: f64 = 1e-8;
/// Relative tolerance on ℓ between the two fit windows.
const ELL_TOL: f64 = 1e-8;

#[derive(Serialize)]
struct ProfileResult {
    model: ProfileModel,
    alpha: f64,
    r_end: f64,
    points: usize,
    positive_on_grid: bool,
    crossing: Option<f64>,
    ell: Option<f64>,
    max_local_error: f64,
    alpha_star: Option<AlphaStar>,
}

/// Solve on `[0, r_max]`; while a positive profile's ℓ fit has not settled,
/// retry with `r_max` doubled, up to four times the request.
fn profile_with_ell(model: ProfileModel, alpha: f64, r_max: f64, tol: f64) -> anyhow::Result<(SelfSimilarProfile, Option<f64>)> {
    let mut r = r_max;
    loop {
        let prof = solve_profile(model, alpha, r, tol)?;
        if !prof.positive_on_grid {
            return Ok((prof, None));
        }
        match estimate_ell(&prof, ELL_TOL) {
            Ok(ell) => return Ok((prof, Some(ell))),
            Err(qss_core::Error::NotConverged { .. }) if r < 4.0 * r_max => r *= 2.0,
            Err(e) => return Err(e.into()),
        }
    }
}

pub fn profile(a: ProfileArgs, common: &Common) -> Res {
    let file = config::load(common.config.as_deref())?;
    file.reject_solver_keys("profile")?;
    let n_dim = file.dimension(a.n, 1)?;
    positive("r-max", a.r_max)?;
    positive("tol", a.tol)?;
    let model = match a.kind {
        ProfileKindArg::Power => ProfileModel::power(a.p, n_dim),
        ProfileKindArg::Exp => ProfileModel::exp(n_dim),
    }
    .map_err(|e| config_error(e.to_string()))?;

    let (prof, ell) = profile_with_ell(model, a.alpha, a.r_max, a.tol)?;
    let alpha_star = if a.alpha_star { Some(find_alpha_star(model, a.alpha_max, ALPHA_STAR_TOL)?) } else { None };

    let params = json!({
        "kind": model.kind,
        "alpha": a.alpha,
        "r_max": a.r_max,
        "tol": a.tol,
        "ell_tol": ELL_TOL,
        "alpha_star": a.alpha_star.then_some(json!({ "alpha_max": a.alpha_max, "tol": ALPHA_STAR_TOL })),
    });
    let cfg = run_config("profile", None, Some(n_dim), None, params);
    let model_label = match model.kind {
        qss_core::profile::ProfileKind::Power { p } => format!("power(p={p})"),
        qss_core::profile::ProfileKind::Exp => "exp".to_string(),
    };
    let mut csv = Csv::new(
        &[
            ("model", model_label),
            ("n_dim", n_dim.to_string()),
            ("alpha", num(a.alpha)),
            ("tol", num(a.tol)),
        ],
        &["r", "v", "dv", "tracked"],
    );
    for ((r, v), dv) in prof.r_grid.iter().zip(&prof.v).zip(&prof.dv) {
        csv.row(&[*r, *v, *dv, model.tracked(*r, *v)]);
    }
    let result = ProfileResult {
        model,
        alpha: a.alpha,
        r_end: prof.r_end(),
        points: prof.r_grid.len(),
        positive_on_grid: prof.positive_on_grid,
        crossing: prof.crossing,
        ell,
        max_local_error: prof.max_local_error,
        alpha_star,
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "radial self-similar profile equation and its decay limit", &result)?;
    out.add("profile.csv", csv.finish());
    out.add(
        "plot.py",
        plot_script(&[
            Plot::new("profile.csv", "r", &["v", "dv"], "profile"),
            Plot::new("profile.csv", "r", &["tracked"], "decay quantity").log(true, false),
        ]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- evolve

#[derive(Serialize)]
struct EvolveResult {
    data: &'static str,
    amplitude: f64,
    initial_sup: f64,
    #[serde(flatten)]
    verdict: Verdict,
    final_sup: f64,
    grid: GridSpec,
    dt_stats: DtStats,
    clamped: usize,
    envelope_ratio: Option<f64>,
    snapshot_times: Vec<f64>,
}

fn snapshot_rows(csv: &mut Csv, snaps: &[RadialField]) {
    for s in snaps {
        for (r, u) in s.r_grid.iter().zip(&s.values) {
            csv.row(&[s.time, *r, *u]);
        }
    }
}

fn supersolution(f: &Nonlinearity, n_dim: usize) -> anyhow::Result<(SuperSubConfig, LiftedSolution)> {
    let sc = SuperSubConfig::auto(f, n_dim)?;
    let upper = build_supersolution(f, &sc)?;
    Ok((sc, upper))
}

pub fn evolve(
    fa: &NonlinearityArgs,
    n: Option<usize>,
    gamma: Option<f64>,
    case: Option<(CaseArg, f64)>,
    envelope: bool,
    common: &Common,
) -> Res {
    let file = config::load(common.config.as_deref())?;
    let n_dim = file.dimension(n, 1)?;
    let mut solver = file.solver_over(&SolverConfig::default())?;
    if solver.snapshot_times.is_empty() {
        solver.snapshot_times = linspace(0.0, solver.t_max, 5);
    }
    if solver.boundary == BoundaryKind::Dirichlet && !envelope {
        return Err(config_error("boundary = dirichlet needs --envelope"));
    }
    let grid = uniform_grid(solver.domain_radius(), solver.dr);
    let (data, amplitude, spec, f, u0, params) = match (gamma, case) {
        (Some(g), None) => {
            positive("gamma", g)?;
            let spec = config::nonlinearity_spec(fa)?;
            let f = config::build_nonlinearity(&spec)?;
            let u0 = canonical_initial_data(&f, g, n_dim, grid)?;
            ("canonical", g, spec, f, u0, json!({ "gamma": g, "envelope": envelope }))
        }
        (None, Some((arg, c))) => {
            positive("c", c)?;
            let case = case_from(arg, fa)?;
            let f = case_nonlinearity(case, n_dim)?;
            let u0 = application_initial_data(case, c, n_dim, grid)?;
            ("application", c, case_spec(case), f, u0, json!({ "case": case, "c": c, "envelope": envelope }))
        }
        _ => return Err(config_error("give either --gamma or --case with --c")),
    };
    let upper = if envelope { Some(supersolution(&f, n_dim)?.1) } else { None };
    let run = classify(&f, &u0, &solver, upper.as_ref())?;

    let cfg = run_config("evolve", Some(spec), Some(n_dim), Some(solver), params);
    let mut snaps = Csv::new(&[("nonlinearity", f.label())], &["t", "r", "u"]);
    snapshot_rows(&mut snaps, &run.snapshots);
    let mut sup = Csv::new(&[("nonlinearity", f.label())], &["t", "sup"]);
    for (t, s) in &run.sup_norm_history {
        sup.row(&[*t, *s]);
    }
    let result = EvolveResult {
        data,
        amplitude,
        initial_sup: u0.sup(),
        verdict: run.verdict.clone(),
        final_sup: run.final_sup(),
        grid: run.grid,
        dt_stats: run.dt_stats,
        clamped: run.clamped,
        envelope_ratio: run.envelope_ratio,
        snapshot_times: run.snapshots.iter().map(|s| s.time).collect(),
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "radial evolution of u_t = Δu + f(u): global existence or blow-up", &result)?;
    out.add("snapshots.csv", snaps.finish());
    out.add("sup_history.csv", sup.finish());
    out.add(
        "plot.py",
        plot_script(&[
            Plot::new("snapshots.csv", "r", &["u"], "snapshots").group("t"),
            Plot::new("sup_history.csv", "t", &["sup"], "sup norm").log(false, true),
        ]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- threshold

#[derive(Serialize)]
struct ThresholdResult {
    data: &'static str,
    gamma_lo: f64,
    gamma_hi: f64,
    ratio: f64,
    discovery: Vec<RunRecord>,
    bracket: ThresholdBracket,
    monotonicity_violations: Vec<(f64, f64)>,
}

fn verdict_cells(r: &RunRecord) -> [String; 3] {
    match &r.verdict {
        Verdict::Global { t_reached } => ["global".into(), num(*t_reached), String::new()],
        Verdict::BlowUp { t_estimate, cause } => [
            "blow_up".into(),
            num(*t_estimate),
            serde_json::to_value(cause).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
        ],
        Verdict::Undecided { t_reached, .. } => ["undecided".into(), num(*t_reached), String::new()],
    }
}

fn bracket_run<D: DataFamily>(
    f: &Nonlinearity,
    data: &D,
    start: Option<(f64, f64)>,
    solver: &SolverConfig,
    rel_width: f64,
) -> anyhow::Result<(Vec<RunRecord>, ThresholdBracket)> {
    let (lo, hi, discovery) = match start {
        Some((lo, hi)) => (lo, hi, Vec::new()),
        None => discover_bracket(f, data, 1.0, solver)?,
    };
    let b = bisect_amplitude(f, data, lo, hi, solver, rel_width)?;
    Ok((discovery, b))
}

pub fn threshold(
    fa: &NonlinearityArgs,
    n: Option<usize>,
    case: Option<CaseArg>,
    rel_width: f64,
    start: Option<(f64, f64)>,
    common: &Common,
) -> Res {
    let file = config::load(common.config.as_deref())?;
    let n_dim = file.dimension(n, 1)?;
    let solver = file.solver_over(&dichotomy_config())?;
    positive("rel-width", rel_width)?;
    if let Some((lo, hi)) = start {
        positive("lo", lo)?;
        if !(hi > lo) {
            return Err(config_error(format!("--hi {hi} must exceed --lo {lo}")));
        }
    }
    let (data, spec, f, app) = match case {
        Some(arg) => {
            let case = case_from(arg, fa)?;
            let f = case_nonlinearity(case, n_dim)?;
            ("application", case_spec(case), f, Some(case))
        }
        None => {
            let spec = config::nonlinearity_spec(fa)?;
            let f = config::build_nonlinearity(&spec)?;
            ("canonical", spec, f, None)
        }
    };
    let (discovery, bracket) = match app {
        Some(case) => bracket_run(&f, &Application { case, n_dim, cfg: &solver }, start, &solver, rel_width)?,
        None => bracket_run(&f, &Canonical { f: &f, n_dim, cfg: &solver }, start, &solver, rel_width)?,
    };
    let mut all = discovery.clone();
    all.extend(bracket.all_records());

    let params = json!({
        "case": app,
        "rel_width": rel_width,
        "start": start.map(|(lo, hi)| [lo, hi]),
    });
    let cfg = run_config("threshold", Some(spec), Some(n_dim), Some(solver), params);
    let mut csv = Csv::new(
        &[("nonlinearity", f.label()), ("data", data.to_string())],
        &["phase", "amplitude", "verdict", "t", "cause", "final_sup", "steps"],
    );
    let phases = [
        ("discovery", &discovery),
        ("bisection", &bracket.runs),
        ("undecided", &bracket.undecided),
    ];
    for (phase, runs) in phases {
        for r in runs.iter() {
            let [v, t, cause] = verdict_cells(r);
            csv.row_str(&[
                phase.to_string(),
                num(r.gamma),
                v,
                t,
                cause,
                num(r.final_sup),
                r.steps.to_string(),
            ]);
        }
    }
    let result = ThresholdResult {
        data,
        gamma_lo: bracket.gamma_lo,
        gamma_hi: bracket.gamma_hi,
        ratio: bracket.ratio(),
        monotonicity_violations: monotonicity_violations(&all),
        discovery,
        bracket,
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "critical amplitude between global existence and blow-up", &result)?;
    out.add("runs.csv", csv.finish());
    out.add(
        "plot.py",
        plot_script(&[Plot::new("runs.csv", "amplitude", &["final_sup"], "final sup by amplitude")
            .group("verdict")
            .log(true, true)
            .points()]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- verify-identity

/// Smooth radial test function `c + a·e^{-b r²}(1 + e r²)` sampled at `(r, t)`.
#[derive(Debug, Clone, Copy, Serialize)]
struct TestFunction {
    c: f64,
    a: f64,
    b: f64,
    e: f64,
    r: f64,
    t: f64,
}

impl TestFunction {
    fn eval(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.c + self.a * (-self.b * r2).exp() * (1.0 + self.e * r2)
    }

    /// Member `k` of a Weyl sequence; deterministic and evenly spread.
    fn weyl(k: usize, c_range: (f64, f64)) -> Self {
        const STEPS: [f64; 6] = [
            std::f64::consts::SQRT_2,
            1.732_050_807_568_877_2,
            2.236_067_977_499_79,
            2.645_751_311_064_590_6,
            3.316_624_790_355_4,
            3.605_551_275_463_989,
        ];
        let u = STEPS.map(|s| (k as f64 * s).fract());
        let lerp = |x: f64, (a, b): (f64, f64)| a + x * (b - a);
        Self {
            c: lerp(u[0], c_range),
            a: lerp(u[1], (0.05, 0.4)),
            b: lerp(u[2], (0.3, 1.5)),
            e: lerp(u[3], (0.0, 0.5)),
            r: lerp(u[4], (0.3, 2.0)),
            t: lerp(u[5], (0.2, 2.0)),
        }
    }
}

fn parse_comparison(s: &str) -> anyhow::Result<Comparison> {
    if s == "exp" {
        return Ok(Comparison::Exp);
    }
    let p = s
        .strip_prefix("power:")
        .and_then(|p| p.parse::<f64>().ok())
        .ok_or_else(|| config_error(format!("--g must be power:<p> or exp, got {s:?}")))?;
    if !(p > 1.0) {
        return Err(config_error(format!("comparison exponent must exceed 1, got {p}")));
    }
    Ok(Comparison::Power { p })
}

/// Arguments of `w` and `u` on every stencil point of the check, or `None`
/// when one of them cannot be evaluated.
fn stencil_args(f: &Nonlinearity, g: &Comparison, tf: &TestFunction, h: f64) -> Option<Vec<f64>> {
    let mut out = Vec::new();
    for dr in [-h, 0.0, h] {
        out.push(w_from_v(f, g, tf.eval(tf.r + dr)).ok()?);
    }
    let x = tf.r * (tf.t + 1.0).sqrt();
    for (dx, dt) in [(-h, 0.0), (0.0, 0.0), (h, 0.0), (0.0, -h), (0.0, h)] {
        let tt = tf.t + dt;
        let v = tf.eval((x + dx) / (tt + 1.0).sqrt());
        out.push(f.f_inverse_ln((tt + 1.0).ln() + g.ln_big_g(v)).ok()?);
    }
    Some(out)
}

#[derive(Serialize)]
struct IdentityCase {
    function: TestFunction,
    residuals: Residuals,
    gap_h: f64,
    gap_half_h: f64,
    order: f64,
}

#[derive(Serialize)]
struct IdentityResult {
    nonlinearity: String,
    comparison: Comparison,
    skipped: usize,
    min_order: f64,
    cases: Vec<IdentityCase>,
}

pub fn verify_identity(fa: &NonlinearityArgs, g: &str, n: Option<usize>, count: usize, h: f64, common: &Common) -> Res {
    let file = config::load(common.config.as_deref())?;
    file.reject_solver_keys("verify-identity")?;
    let n_dim = file.dimension(n, 1)?;
    positive("h", h)?;
    if count == 0 {
        return Err(config_error("--count must be positive"));
    }
    let spec = config::nonlinearity_spec(fa)?;
    let f = config::build_nonlinearity(&spec)?;
    let g = parse_comparison(g)?;
    let c_range = match g {
        Comparison::Power { .. } => (0.4, 1.0),
        Comparison::Exp => (-3.5, -1.5),
    };
    // stencils must stay on one side of the blend point, where f is only C²
    let limit = f.formula_limit();
    let (mut cases, mut skipped, mut k) = (Vec::new(), 0, 0);
    while cases.len() < count {
        k += 1;
        if k > 100 * count {
            return Err(config_error(format!(
                "only {} of {count} test functions are admissible for this pair",
                cases.len()
            )));
        }
        let tf = TestFunction::weyl(k, c_range);
        let ok = stencil_args(&f, &g, &tf, h)
            .is_some_and(|v| v.iter().all(|&s| s < limit) || v.iter().all(|&s| s > limit));
        if !ok {
            skipped += 1;
            continue;
        }
        let res = |h: f64| residual_triple(&f, &g, |r| tf.eval(r), n_dim, tf.r, tf.t, h);
        let (r1, r2) = (res(h)?, res(0.5 * h)?);
        let (gap_h, gap_half_h) = (r1.max_gap(), r2.max_gap());
        cases.push(IdentityCase {
            function: tf,
            residuals: r1,
            gap_h,
            gap_half_h,
            order: (gap_h / gap_half_h).log2(),
        });
    }
    let params = json!({ "comparison": g, "count": count, "h": h, "c_range": c_range });
    let cfg = run_config("verify_identity", Some(spec), Some(n_dim), None, params);
    let mut csv = Csv::new(
        &[("nonlinearity", f.label()), ("h", num(h))],
        &["k", "c", "a", "b", "e", "r", "t", "u_form", "w_form", "v_form", "gap_h", "gap_half_h", "order"],
    );
    for (i, c) in cases.iter().enumerate() {
        let t = &c.function;
        let r = &c.residuals;
        csv.row(&[
            i as f64, t.c, t.a, t.b, t.e, t.r, t.t, r.u_form, r.w_form, r.v_form, c.gap_h, c.gap_half_h, c.order,
        ]);
    }
    let result = IdentityResult {
        nonlinearity: f.label(),
        comparison: g,
        skipped,
        min_order: cases.iter().map(|c| c.order).fold(f64::INFINITY, f64::min),
        cases,
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "agreement of the u-, w- and v-forms of the transformation identity", &result)?;
    out.add("identity.csv", csv.finish());
    out.add(
        "plot.py",
        plot_script(&[Plot::new("identity.csv", "k", &["gap_h", "gap_half_h"], "largest gap").log(false, true).points()]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- sandwich

/// One lifted comparison solution with its PDE residual.
#[derive(Serialize)]
struct Construction {
    comparison: Comparison,
    /// `q*` for the supersolution, `q_*` for the subsolution.
    q_bound: f64,
    /// Profile start value `α` or `β_q`.
    start: f64,
    /// Smallness threshold the lift stays below.
    s_star: f64,
    sup: f64,
    residual: ResidualReport,
}

fn construction(ls: &LiftedSolution, q_bound: f64, s_star: f64, grid: &ResidualGrid) -> anyhow::Result<Construction> {
    Ok(Construction {
        comparison: ls.g,
        q_bound,
        start: ls.profile.alpha,
        s_star,
        sup: ls.sup()?,
        residual: verify_residual(ls, grid)?,
    })
}

#[derive(Serialize)]
struct SandwichResult {
    q: f64,
    gamma_star: f64,
    gamma: f64,
    upper: Construction,
    lower: Construction,
    residual_grid: ResidualGrid,
    #[serde(flatten)]
    verdict: Verdict,
    margins: SandwichReport,
}

pub fn sandwich(fa: &NonlinearityArgs, n: Option<usize>, fraction: f64, times: &[f64], tol: f64, common: &Common) -> Res {
    let file = config::load(common.config.as_deref())?;
    let n_dim = file.dimension(n, 1)?;
    positive("gamma-fraction", fraction)?;
    positive("tol", tol)?;
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(config_error("--times must be nonnegative"));
    }
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    if !(t_end > 0.0) {
        return Err(config_error("--times needs a positive entry"));
    }
    let base = SolverConfig {
        t_max: t_end,
        snapshot_times: times.to_vec(),
        boundary: BoundaryKind::Dirichlet,
        ..Default::default()
    };
    let solver = file.solver_over(&base)?;
    let spec = config::nonlinearity_spec(fa)?;
    let f = config::build_nonlinearity(&spec)?;

    let (sc, upper) = supersolution(&f, n_dim)?;
    let g_star = gamma_star(&upper);
    let gamma = fraction * g_star;
    let low_cfg = fit_beta_below(&f, &sc, gamma)?;
    let lower = build_subsolution(&f, &low_cfg)?;
    let u0 = canonical_initial_data(&f, gamma, n_dim, uniform_grid(solver.domain_radius(), solver.dr))?;
    let run = classify(&f, &u0, &solver, Some(&upper))?;
    if !run.verdict.is_global() {
        return Err(qss_core::Error::Hypothesis(format!(
            "run at gamma = {gamma:e} is {}; the sandwich check needs a global run",
            run.verdict.label()
        ))
        .into());
    }
    let rep = verify_sandwich(&f, &run, &lower, &upper, tol)?;

    let params = json!({ "gamma_fraction": fraction, "times": times, "tol": tol });
    let cfg = run_config("sandwich", Some(spec), Some(n_dim), Some(solver), params);
    let mut snaps = Csv::new(&[("nonlinearity", f.label())], &["t", "r", "u", "lower", "upper"]);
    for s in &run.snapshots {
        for (r, u) in s.r_grid.iter().zip(&s.values) {
            let lo = lower.eval(*r, s.time).unwrap_or(f64::NAN);
            let hi = upper.eval(*r, s.time).unwrap_or(f64::NAN);
            snaps.row(&[s.time, *r, *u, lo, hi]);
        }
    }
    let mut margins = Csv::new(&[], &["t", "lower", "upper"]);
    for m in &rep.snapshots {
        margins.row(&[m.t, m.lower, m.upper]);
    }
    let residual_grid = ResidualGrid::default();
    let result = SandwichResult {
        q: sc.q,
        gamma_star: g_star,
        gamma,
        upper: construction(&upper, sc.q_upper, sc.s_upper, &residual_grid)?,
        lower: construction(&lower, low_cfg.q_lower, low_cfg.s_lower, &residual_grid)?,
        residual_grid,
        verdict: run.verdict.clone(),
        margins: rep,
    };
    let mut out = Artifacts::default();
    out.report(&cfg, "small data between the quasi self-similar sub- and supersolution", &result)?;
    out.add("snapshots.csv", snaps.finish());
    out.add("margins.csv", margins.finish());
    out.add(
        "plot.py",
        plot_script(&[
            Plot::new("snapshots.csv", "r", &["u", "lower", "upper"], "solution and bounds").group("t"),
            Plot::new("margins.csv", "t", &["lower", "upper"], "log margins").points(),
        ]),
    );
    out.write_to(&common.out)
}

// ---------------------------------------------------------------- app-case

#[derive(Serialize)]
#[serde(untagged)]
enum Constants {
    ExpInv(qss_core::threshold::ExpInvConstants),
    LogPower(qss_core::threshold::LogPowerConstants),
}

#[derive(Serialize)]
struct Amplitude {
    c: f64,
    liminf: LiminfReport,
    /// Lower bound on the liminf of `|x|²/F(u₀)`.
    liminf_bound: f64,
    necessary_violation_t: Option<f64>,
}

#[derive(Serialize)]
struct AppResult {
    case: ApplicationCase,
    gamma_star: f64,
    constants: Constants,
    chain_at_c0: ChainReport,
    chain_holds: bool,
    amplitudes: Vec<Amplitude>,
}

/// Log-space slack accepted in the chain check.
const CHAIN_TOL: f64 = 1e-12;

pub fn app_case(arg: CaseArg, p: f64, r: f64, n: Option<usize>, cs: &[f64], r_domain: f64, common: &Common) -> Res {
    let file = config::load(common.config.as_deref())?;
    file.reject_solver_keys("app-case")?;
    let case = match arg {
        CaseArg::ExpInv => ApplicationCase::ExpInv,
        CaseArg::LogPower => ApplicationCase::LogPower { p, r },
    };
    let n_dim = file.dimension(n, if arg == CaseArg::ExpInv { 1 } else { 2 })?;
    positive("r-domain", r_domain)?;
    for &c in cs {
        positive("c", c)?;
    }
    let f = case_nonlinearity(case, n_dim)?;
    let (_, upper) = supersolution(&f, n_dim)?;
    let g_star = gamma_star(&upper);

    let mut xs = vec![0.0];
    xs.extend(geomspace(1e-3, 1e4, 400));
    let (constants, chain) = match case {
        ApplicationCase::ExpInv => {
            let k = exp_inverse_constants(&f, g_star)?;
            (Constants::ExpInv(k), exp_inverse_chain(&f, k.c0, g_star, &xs)?)
        }
        ApplicationCase::LogPower { p, r } => {
            let k = log_power_constants(&f, p, r, g_star)?;
            (Constants::LogPower(k), log_power_chain(&f, &k, k.c0, &xs)?)
        }
    };

    let grid = uniform_grid(r_domain, 1.0);
    let times = scan_times(SCAN_HORIZON);
    let mut ratio_csv = Csv::new(&[("case", format!("{case:?}")), ("n_dim", n_dim.to_string())], &["c", "r", "ratio"]);
    let mut heat_csv = Csv::new(&[("case", format!("{case:?}")), ("n_dim", n_dim.to_string())], &["c", "t", "sup", "ln_F_sup"]);
    let mut amplitudes = Vec::new();
    for &c in cs {
        let u0 = application_initial_data(case, c, n_dim, grid.clone())?;
        let liminf = liminf_ratio(&f, &u0, [0.5 * r_domain, 0.9 * r_domain])?;
        let liminf_bound = match case {
            ApplicationCase::ExpInv => c / 2.0,
            ApplicationCase::LogPower { p, r } => ((p - 1.0) / 2.0).powf(r + 1.0) * c.powf(p - 1.0),
        };
        for x in geomspace(1.0, 0.9 * r_domain, 200) {
            let ratio = (2.0 * x.ln() - f.ln_f_transform(u0.value_at(x))?).exp();
            ratio_csv.row(&[c, x, ratio]);
        }
        for (t, s) in semigroup_profile(&u0, &times)? {
            heat_csv.row(&[c, t, s, f.ln_f_transform(s)?]);
        }
        amplitudes.push(Amplitude {
            c,
            liminf,
            liminf_bound,
            necessary_violation_t: necessary_condition_scan(&f, &u0, &times)?,
        });
    }
    let params = json!({ "case": case, "c": cs, "r_domain": r_domain, "chain_tol": CHAIN_TOL });
    let cfg = run_config("app_case", Some(case_spec(case)), Some(n_dim), None, params);
    let result = AppResult {
        case,
        gamma_star: g_star,
        constants,
        chain_holds: chain.holds(CHAIN_TOL),
        chain_at_c0: chain,
        amplitudes,
    };
    let mut out = Artifacts::default();
    out.report(
        &cfg,
        "application data: small-amplitude inequality chain, tail ratio and the necessary condition",
        &result,
    )?;
    out.add("tail_ratio.csv", ratio_csv.finish());
    out.add("heat_sup.csv", heat_csv.finish());
    out.add(
        "plot.py",
        plot_script(&[
            Plot::new("tail_ratio.csv", "r", &["ratio"], "|x|^2 / F(u0)").group("c").log(true, true),
            Plot::new("heat_sup.csv", "t", &["ln_F_sup"], "ln F(sup e^{tΔ}u0)").group("c").log(true, false),
        ]),
    );
    out.write_to(&common.out)
}
