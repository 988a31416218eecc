use qss_core::heat::{uniform_grid, BlowUpCause, SolverConfig, Verdict};
use qss_core::numerics::geomspace;
use qss_core::quasi::{build_supersolution, gamma_star, SuperSubConfig};
use qss_core::threshold::*;
use qss_core::Nonlinearity;

fn power5_data(gamma: f64, cfg: &SolverConfig) -> qss_core::heat::RadialField {
    let f = Nonlinearity::power(5.0).unwrap();
    canonical_initial_data(&f, gamma, 1, uniform_grid(cfg.domain_radius(), cfg.dr)).unwrap()
}

#[test]
fn tiny_gamma_is_global() {
    let f = Nonlinearity::power(5.0).unwrap();
    let cfg = SolverConfig { t_max: 50.0, dr: 0.2, ..Default::default() };
    let out = classify(&f, &power5_data(1e-3, &cfg), &cfg, None).unwrap();
    assert!(out.verdict.is_global(), "{:?}", out.verdict);
}

#[test]
fn huge_gamma_short_circuits() {
    let f = Nonlinearity::power(5.0).unwrap();
    let cfg = SolverConfig { t_max: 50.0, dr: 0.2, ..Default::default() };
    let out = classify(&f, &power5_data(1e3, &cfg), &cfg, None).unwrap();
    match out.verdict {
        Verdict::BlowUp { cause, .. } => assert_eq!(cause, BlowUpCause::NecessaryCondition),
        v => panic!("{v:?}"),
    }
    assert_eq!(out.dt_stats.accepted, 0);
}

#[test]
fn misclassified_endpoints_are_rejected() {
    let f = Nonlinearity::power(5.0).unwrap();
    let cfg = dichotomy_config();
    let err = bisect_gamma(&f, 1, 0.3, 1.0, &cfg, 0.1).unwrap_err();
    assert!(matches!(err, qss_core::Error::InvalidBracket(_)));
}

#[test]
fn power5_bisection_is_reproducible() {
    let f = Nonlinearity::power(5.0).unwrap();
    let cfg = dichotomy_config();
    let b = bisect_gamma(&f, 1, 0.05, 0.3, &cfg, 0.1).unwrap();
    assert!(b.ratio() <= 1.1);
    assert!(b.runs.len() - 2 <= 8);
    let again = sweep(&f, &Canonical { f: &f, n_dim: 1, cfg: &cfg }, &[b.gamma_lo, b.gamma_hi], &cfg).unwrap();
    assert!(again[0].verdict.is_global());
    assert!(again[1].verdict.is_blow_up());
    assert!(monotonicity_violations(&b.runs).is_empty());
}

#[test]
fn log_power_application_bracket_is_frozen() {
    // golden endpoints from the full pipeline with dichotomy_config()
    let case = ApplicationCase::LogPower { p: 3.0, r: 1.0 };
    let f = case.nonlinearity().unwrap();
    let cfg = dichotomy_config();
    let data = Application { case, n_dim: 2, cfg: &cfg };
    let (lo, hi, _) = discover_bracket(&f, &data, 1.0, &cfg).unwrap();
    assert_eq!((lo, hi), (0.25, 1.0));
    let b = bisect_amplitude(&f, &data, lo, hi, &cfg, 0.1).unwrap();
    assert!((b.gamma_lo / 0.594_603_557_501_360_5 - 1.0).abs() < 1e-12, "{}", b.gamma_lo);
    assert!((b.gamma_hi / 0.648_419_777_325_504_8 - 1.0).abs() < 1e-12, "{}", b.gamma_hi);
}

#[test]
fn exp_inverse_chain_breaks_above_c0() {
    let f = Nonlinearity::exp_inverse();
    let sc = SuperSubConfig::auto(&f, 1).unwrap();
    let gamma = gamma_star(&build_supersolution(&f, &sc).unwrap());
    let k = exp_inverse_constants(&f, gamma).unwrap();
    let xs = geomspace(1e-3, 1e4, 200);
    assert!(exp_inverse_chain(&f, k.c0, gamma, &xs).unwrap().holds(1e-12));
    let over = exp_inverse_chain(&f, 1.5 * k.c0, gamma, &xs).unwrap();
    assert!(!over.holds(1e-12));
    // only the final comparison with γ may fail
    assert!(over.links[..over.links.len() - 1].iter().all(|l| l.worst >= -1e-12));
}

#[test]
fn log_power_constants_for_cubic_case() {
    let f = Nonlinearity::log_power(3.0, 1.0).unwrap();
    let k = log_power_constants(&f, 3.0, 1.0, 0.05).unwrap();
    assert!((k.m1 - (-0.5f64).exp()).abs() < 1e-12);
    // c0 from the γ constraint: (γ/(2·2²))^{1/2}
    assert!((k.c0 - (0.05f64 / 8.0).sqrt()).abs() < 1e-15);
    let xs = geomspace(1e-3, 1e4, 200);
    assert!(log_power_chain(&f, &k, k.c0, &xs).unwrap().holds(1e-12));
}
