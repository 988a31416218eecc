use thiserror::Error;

/// Failures reported by the numerical routines of this crate.
///
/// Every variant carries enough context to locate the failing evaluation;
/// nothing is silently clamped or guessed.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("argument {s} is below the domain floor {floor}")]
    Domain { s: f64, floor: f64 },

    #[error("tail integral of 1/f diverges beyond s = {s_cut} (local power-law exponent {exponent})")]
    NonIntegrableTail { s_cut: f64, exponent: f64 },

    #[error("transform value F({s}) is not representable in f64 (ln F = {ln_value})")]
    Overflow { s: f64, ln_value: f64 },

    #[error("no bracket found for F(s) = exp({ln_sigma}) in s within [{s_min}, {s_max}]")]
    BracketFailure { ln_sigma: f64, s_min: f64, s_max: f64 },

    #[error("sequence did not converge: spread {spread} exceeds tolerance {tol}")]
    NoConvergence { spread: f64, tol: f64 },

    #[error("exponent q = {q} is below 1")]
    InvalidQ { q: f64 },

    #[error("integrator could not meet tolerance at r = {r} (step {step})")]
    StepFailure { r: f64, step: f64 },

    #[error("asymptotic limit not converged: window disagreement {spread} exceeds {tol} at r_max = {r_max}")]
    NotConverged { spread: f64, tol: f64, r_max: f64 },

    #[error("radius {r} lies outside the profile grid [0, {r_max}]")]
    OutOfGrid { r: f64, r_max: f64 },

    #[error("f(W)F(W) underflows at W = {w}")]
    SingularPoint { w: f64 },

    #[error("smallness violated: sup {sup} exceeds threshold {threshold}")]
    SmallnessViolated { sup: f64, threshold: f64 },

    #[error("initial data carries no decay model and the truncated tail weight {weight} is not negligible")]
    TailUnknown { weight: f64 },

    #[error("grid refinement changed the verdict from {coarse} to {fine}")]
    GridTooCoarse { coarse: String, fine: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sandwich bound violated at x = {x}, t = {t}: {detail}")]
    SandwichViolated { x: f64, t: f64, detail: String },

    #[error("bracket endpoints misclassified: {0}")]
    InvalidBracket(String),

    #[error("supremum grows under refinement: {coarse} -> {fine}")]
    Unbounded { coarse: f64, fine: f64 },

    #[error("unknown custom nonlinearity {0:?}")]
    UnknownCustom(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
