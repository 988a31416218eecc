//! `qss`: command-line driver for the quasi self-similar toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qss", version, about = "Quasi self-similar solutions of u_t = Δu + f(u)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON config file (solver keys plus optional n_dim).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, default_value = "qss-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct NonlinearityArgs {
    /// power, exp_model, exp_inverse, log_power or a registry name.
    #[arg(long = "f", default_value = "power")]
    pub kind: String,
    /// Exponent p for power and log_power.
    #[arg(long)]
    pub p: Option<f64>,
    /// Log exponent r for log_power.
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseArg {
    ExpInv,
    LogPower,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKindArg {
    Power,
    Exp,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate q = lim f'(s)F(s) as s → 0 and classify against 1 + N/2.
    QEstimate {
        #[command(flatten)]
        f: NonlinearityArgs,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Solve a self-similar profile and extract its decay limit ℓ.
    Profile {
        #[arg(long, value_enum, default_value = "power")]
        kind: ProfileKindArg,
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        alpha: f64,
        /// Outer radius; doubled up to four times while ℓ has not settled.
        #[arg(long, default_value_t = 200.0)]
        r_max: f64,
        /// Relative tolerance of the ODE integrator.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Also bracket the largest α with a positive profile.
        #[arg(long)]
        alpha_star: bool,
        #[arg(long, default_value_t = 10.0)]
        alpha_max: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Evolve canonical or application initial data.
    Evolve {
        #[command(flatten)]
        f: NonlinearityArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Amplitude of the canonical data F⁻¹[γ⁻¹(r²+1)].
        #[arg(long, conflicts_with = "case")]
        gamma: Option<f64>,
        /// Application data family; the nonlinearity follows from it.
        #[arg(long, value_enum, requires = "c")]
        case: Option<CaseArg>,
        #[arg(long)]
        c: Option<f64>,
        /// Compare against the supersolution lift; with boundary = dirichlet it also gives the boundary values.
        #[arg(long)]
        envelope: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Bracket the critical amplitude between global and blow-up runs.
    Threshold {
        #[command(flatten)]
        f: NonlinearityArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
        #[arg(long, default_value_t = 0.1)]
        rel_width: f64,
        /// Global end of the starting bracket; discovered from 1 when absent.
        #[arg(long, requires = "hi")]
        lo: Option<f64>,
        #[arg(long, requires = "lo")]
        hi: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the three forms of the transformation identity on smooth test functions.
    VerifyIdentity {
        #[command(flatten)]
        f: NonlinearityArgs,
        /// Comparison nonlinearity: power:<p> or exp.
        #[arg(long, default_value = "power:3")]
        g: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 1e-2)]
        h: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run small-amplitude data and check it stays between the sub- and supersolution.
    Sandwich {
        #[command(flatten)]
        f: NonlinearityArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Amplitude as a fraction of the supersolution constant γ*.
        #[arg(long, default_value_t = 0.5)]
        gamma_fraction: f64,
        #[arg(long, value_delimiter = ',', default_value = "0,1,5,20")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Small-amplitude constants, inequality chains and tail ratios of the application data.
    AppCase {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        n: Option<usize>,
        /// Amplitudes for the tail ratio and the necessary-condition scan.
        #[arg(long, value_delimiter = ',', default_value = "1,10")]
        c: Vec<f64>,
        /// Radius of the grid used for the tail ratio.
        #[arg(long, default_value_t = 2000.0)]
        r_domain: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::QEstimate { f, n, common } => commands::q_estimate(&f, n, &common),
        Command::Profile { kind, p, n, alpha, r_max, tol, alpha_star, alpha_max, common } => {
            commands::profile(commands::ProfileArgs { kind, p, n, alpha, r_max, tol, alpha_star, alpha_max }, &common)
        }
        Command::Evolve { f, n, gamma, case, c, envelope, common } => {
            commands::evolve(&f, n, gamma, case.zip(c), envelope, &common)
        }
        Command::Threshold { f, n, case, rel_width, lo, hi, common } => {
            commands::threshold(&f, n, case, rel_width, lo.zip(hi), &common)
        }
        Command::VerifyIdentity { f, g, n, count, h, common } => {
            commands::verify_identity(&f, &g, n, count, h, &common)
        }
        Command::Sandwich { f, n, gamma_fraction, times, tol, common } => {
            commands::sandwich(&f, n, gamma_fraction, &times, tol, &common)
        }
        Command::AppCase { case, p, r, n, c, r_domain, common } => {
            commands::app_case(case, p, r, n, &c, r_domain, &common)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = output::classify_error(&e);
            eprintln!("{}", output::error_json(kind, &e));
            ExitCode::from(code)
        }
    }
}
