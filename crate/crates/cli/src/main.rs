//! `hopf-dbc`: Hopf bifurcation toolkit for diffusion with a dynamic
//! boundary condition.

mod commands;
mod config;
mod error;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hopf_dbc::FarBc;

use config::{RunConfig, StabilityMethod};
use error::CliError;

/// Hopf bifurcation analysis, branch continuation, stability, and
/// time-domain simulation for u_t = u_xx - sigma^2 u on x > 0 with
/// d/dt u(0) = f(u(0), d_n u(0), mu).
///
/// Settings come from an optional JSON config (--config); flags override
/// single fields. `--dump-config` prints the effective config with every
/// default filled in.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 assumption-check failure.
#[derive(Debug, Parser)]
#[command(name = "hopf-dbc", version, about, long_about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Common options")]
struct Common {
    /// JSON run config; fields absent from it take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Linear decay rate alpha of the kinetics [default: 1].
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Quadratic coefficient beta [default: 1].
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Cubic coefficient gamma [default: 0].
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Bulk degradation sigma [default: 0].
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Fourier grid size, a power of two [default: 256].
    #[arg(long = "n", global = true)]
    grid_n: Option<usize>,
    /// Seed of the simulation perturbation [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Main output file [default: stdout].
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate the Hopf point and check the bifurcation assumptions (JSON).
    Hopf,
    /// Second-order expansion coefficients and criticality (JSON).
    Expand,
    /// Continue the periodic-orbit branch from the Hopf point (branch CSV).
    Continue(ContinueArgs),
    /// Annotate a branch CSV with stability labels and exponents.
    Stability(StabilityArgs),
    /// Time-domain simulation of the coupled system (trajectory CSV).
    Simulate(SimulateArgs),
    /// Bulk field of a branch point or of the trivial state (field CSV).
    Reconstruct(ReconstructArgs),
    /// Closed-form and fitted mu2 over a gamma range (CSV).
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ContinueArgs {
    /// Total branch points, seeds included [default: 2000].
    #[arg(long)]
    max_points: Option<usize>,
    /// Largest arclength step [default: 0.1].
    #[arg(long)]
    ds_max: Option<f64>,
    /// Initial arclength step [default: 0.005].
    #[arg(long)]
    ds0: Option<f64>,
    /// Frequency at which the branch is flagged homoclinic [default: 0.001].
    #[arg(long)]
    omega_min: Option<f64>,
    /// Amplitude of the first seed orbit [default: 0.01].
    #[arg(long)]
    r0: Option<f64>,
    /// Amplitude of the second seed orbit [default: 0.02].
    #[arg(long)]
    r1: Option<f64>,
    /// Write the boundary profiles of all points here.
    #[arg(long, value_name = "FILE")]
    profiles: Option<PathBuf>,
    /// Write a (mu, r) diagram with the asymptotic parabola here.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    /// Branch CSV to annotate.
    #[arg(long, value_name = "FILE")]
    branch: Option<PathBuf>,
    /// Profile sidecar of the branch (needed for numeric Floquet).
    #[arg(long, value_name = "FILE")]
    profiles: Option<PathBuf>,
    /// Classification method [default: closed-form].
    #[arg(long, value_enum)]
    method: Option<StabilityMethod>,
    /// Closed form only up to this amplitude, before r first decreases [default: 0.1].
    #[arg(long)]
    closed_form_r_max: Option<f64>,
    /// Retained Floquet modes on each side [default: 64].
    #[arg(long)]
    truncation: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FarBcArg {
    DirichletZero,
    NeumannZero,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Bifurcation parameter [default: 0.05].
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Time horizon T [default: 200].
    #[arg(long)]
    horizon: Option<f64>,
    /// Truncation depth L [default: 60].
    #[arg(long)]
    depth: Option<f64>,
    /// Spatial step [default: 0.05].
    #[arg(long)]
    dx: Option<f64>,
    /// Time step [default: 0.01].
    #[arg(long)]
    dt: Option<f64>,
    /// Condition at x = L [default: dirichlet-zero].
    #[arg(long, value_enum)]
    far_bc: Option<FarBcArg>,
    /// Initial boundary value; the bulk starts as amplitude * e^{-x} [default: 0.05].
    #[arg(long, allow_negative_numbers = true)]
    init_amplitude: Option<f64>,
    /// Size of the seeded uniform perturbation of the initial bulk [default: 0].
    #[arg(long)]
    init_noise: Option<f64>,
    /// Write a JSON summary (frequency and amplitude) here.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    /// Branch point index; without it the trivial state is reconstructed.
    #[arg(long)]
    index: Option<usize>,
    /// Parameter of the trivial state [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Branch CSV holding the point (with --profiles); otherwise the branch is recomputed.
    #[arg(long, value_name = "FILE")]
    branch: Option<PathBuf>,
    /// Profile sidecar of the branch.
    #[arg(long, value_name = "FILE")]
    profiles: Option<PathBuf>,
    /// Largest depth [default: 30].
    #[arg(long)]
    x_max: Option<f64>,
    /// Number of depths [default: 121].
    #[arg(long)]
    x_points: Option<usize>,
    /// Write a JSON summary (far-field fit) here.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Lower end of the gamma range [default: -0.1].
    #[arg(long, allow_negative_numbers = true)]
    gamma_min: Option<f64>,
    /// Upper end of the gamma range [default: 0.05].
    #[arg(long, allow_negative_numbers = true)]
    gamma_max: Option<f64>,
    /// Number of gamma values [default: 16].
    #[arg(long)]
    points: Option<usize>,
    /// Branch points per fitted branch [default: 40].
    #[arg(long)]
    max_points: Option<usize>,
    /// Worker threads, 0 for all cores [default: 0].
    #[arg(long)]
    threads: Option<usize>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.kinetics.alpha, c.alpha);
    set(&mut cfg.kinetics.beta, c.beta);
    set(&mut cfg.kinetics.gamma, c.gamma);
    set(&mut cfg.sigma, c.sigma);
    set(&mut cfg.grid_n, c.grid_n);
    set(&mut cfg.seed, c.seed);
    if c.out.is_some() {
        cfg.output.out = c.out.clone();
    }
    match &cli.command {
        Command::Hopf | Command::Expand => {}
        Command::Continue(a) => {
            let s = &mut cfg.continuation;
            set(&mut s.max_points, a.max_points);
            set(&mut s.ds_max, a.ds_max);
            set(&mut s.ds0, a.ds0);
            set(&mut s.omega_min, a.omega_min);
            set(&mut cfg.seeds.r0, a.r0);
            set(&mut cfg.seeds.r1, a.r1);
            if a.ds_max.is_some() && a.ds0.is_none() {
                s.ds0 = s.ds0.min(s.ds_max);
            }
            if a.profiles.is_some() {
                cfg.output.profiles = a.profiles.clone();
            }
            if a.svg.is_some() {
                cfg.output.svg = a.svg.clone();
            }
        }
        Command::Stability(a) => {
            let s = &mut cfg.stability;
            set(&mut s.method, a.method);
            set(&mut s.closed_form_r_max, a.closed_form_r_max);
            set(&mut s.floquet.truncation, a.truncation);
            if a.branch.is_some() {
                cfg.output.branch = a.branch.clone();
            }
            if a.profiles.is_some() {
                cfg.output.profiles = a.profiles.clone();
            }
        }
        Command::Simulate(a) => {
            let s = &mut cfg.simulate;
            set(&mut s.mu, a.mu);
            set(&mut s.settings.horizon, a.horizon);
            set(&mut s.settings.depth, a.depth);
            set(&mut s.settings.dx, a.dx);
            set(&mut s.settings.dt, a.dt);
            set(&mut s.init_amplitude, a.init_amplitude);
            set(&mut s.init_noise, a.init_noise);
            if let Some(bc) = a.far_bc {
                s.settings.far_bc = match bc {
                    FarBcArg::DirichletZero => FarBc::DirichletZero,
                    FarBcArg::NeumannZero => FarBc::NeumannZero,
                };
            }
            if a.summary.is_some() {
                cfg.output.summary = a.summary.clone();
            }
        }
        Command::Reconstruct(a) => {
            let s = &mut cfg.reconstruct;
            if a.index.is_some() {
                s.index = a.index;
            }
            set(&mut s.mu, a.mu);
            set(&mut s.x_max, a.x_max);
            set(&mut s.x_points, a.x_points);
            if a.branch.is_some() {
                cfg.output.branch = a.branch.clone();
            }
            if a.profiles.is_some() {
                cfg.output.profiles = a.profiles.clone();
            }
            if a.summary.is_some() {
                cfg.output.summary = a.summary.clone();
            }
        }
        Command::Sweep(a) => {
            let s = &mut cfg.sweep;
            set(&mut s.gamma_min, a.gamma_min);
            set(&mut s.gamma_max, a.gamma_max);
            set(&mut s.points, a.points);
            set(&mut s.max_points, a.max_points);
            set(&mut s.threads, a.threads);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    let cfg = effective_config(cli)?;
    if cli.common.dump_config {
        let text = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
        println!("{text}");
        return Ok(0);
    }
    match &cli.command {
        Command::Hopf => commands::hopf(&cfg),
        Command::Expand => commands::expand(&cfg),
        Command::Continue(_) => commands::cont(&cfg),
        Command::Stability(_) => commands::stability(&cfg),
        Command::Simulate(_) => commands::simulate_cmd(&cfg),
        Command::Reconstruct(_) => commands::reconstruct_cmd(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let doc = serde_json::json!({
                "schema": io::SCHEMA_VERSION,
                "error": { "kind": e.kind(), "exit_code": e.exit_code(), "message": e.to_string() },
            });
            eprintln!("{doc}");
            ExitCode::from(e.exit_code())
        }
    }
}
