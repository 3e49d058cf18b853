//! `stuforge` command-line front end.
//!
//! Every run prints its resolved configuration next to the report. JSON is
//! the default output; CSV is available where a report is tabular.
//!
//! Exit status: 0 pass, 1 verified negative result, 2 failed verification,
//! 64 usage error.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Default tolerance on marginal deviations and cross-checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Parser, Serialize)]
#[command(name = "stuforge", version, about = "Symmetric thermalising unitaries and correlation bounds")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct GlobalOpts {
    /// Output format.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Tolerance for verification checks.
    #[arg(long, env = "STUFORGE_TOL", global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Keep energies as given instead of rescaling to units of `E_1`.
    #[arg(long, global = true)]
    pub raw_units: bool,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 2024)]
    pub seed: u64,
    /// Worker threads for independent grid cells.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Thermal distribution and decomposition of a spectrum.
    Spectra(SpectraArgs),
    /// Build and verify an STU.
    #[command(subcommand)]
    Stu(StuCommand),
    /// Vertices of the reachable-marginal polytope.
    Polytope(PolytopeArgs),
    /// Optimal correlation bounds.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Finite-copies protocol.
    #[command(subcommand)]
    Copies(CopiesCommand),
    /// Brute-force checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Grid checks of the supporting inequalities.
    #[command(subcommand)]
    Lemmas(LemmasCommand),
}

#[derive(Debug, Args, Serialize)]
pub struct SpectraArgs {
    /// Comma-separated ascending levels starting at 0.
    #[arg(long)]
    pub energies: String,
    /// Inverse temperature; `inf` for the ground state.
    #[arg(long)]
    pub beta: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct StuArgs {
    #[arg(long)]
    pub energies: String,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub beta_prime: String,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StuCommand {
    /// Majorised-marginals method (`d = 3`).
    Majorised(MajorisedArgs),
    /// Norm-passing method.
    Norm(NormArgs),
    /// Geometric method (`d <= 4`; `d = 5` runs the region check).
    Geometric(StuArgs),
    /// Same as the top-level `polytope` command.
    Polytope(PolytopeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MajorisedArgs {
    #[arg(long, required_unless_present = "counterexample_d4")]
    pub energies: Option<String>,
    #[arg(long, required_unless_present = "counterexample_d4")]
    pub beta: Option<String>,
    /// Thermal target.
    #[arg(long, conflicts_with = "target")]
    pub beta_prime: Option<String>,
    /// Arbitrary target distribution majorised by `p(β)`.
    #[arg(long)]
    pub target: Option<String>,
    /// Certify the `d = 4` counterexamples instead.
    #[arg(long, conflicts_with_all = ["energies", "beta", "beta_prime", "target"])]
    pub counterexample_d4: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct NormArgs {
    #[arg(long, required_unless_present = "scan")]
    pub energies: Option<String>,
    #[arg(long, required_unless_present = "scan")]
    pub beta: Option<String>,
    #[arg(long, required_unless_present = "scan")]
    pub beta_prime: Option<String>,
    /// Evaluate the conditions without building.
    #[arg(long)]
    pub check_only: bool,
    /// Scan this many random spectra over the standard grid (CSV).
    #[arg(long, conflicts_with_all = ["energies", "beta", "beta_prime"])]
    pub scan: Option<usize>,
    /// Dimension of the scanned spectra.
    #[arg(long, default_value_t = 4, requires = "scan")]
    pub dim: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct PolytopeArgs {
    #[arg(long)]
    pub energies: String,
    #[arg(long)]
    pub beta: String,
    /// Write one CSV row per vertex.
    #[arg(long)]
    pub emit_vertices: bool,
    /// Reduced-coordinate point to certify against the hull.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Allow enumerations above the default limit.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundsCommand {
    /// Largest `ΔI` per invested energy `ΔE`.
    Curve(CurveArgs),
    /// Asymmetric pure-state optimum.
    Asym(AsymArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub energies: String,
    #[arg(long)]
    pub beta: String,
    /// Number of budgets from zero to full heating.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AsymArgs {
    #[arg(long)]
    pub energies_a: String,
    #[arg(long)]
    pub energies_b: String,
    /// Energy budget `c`.
    #[arg(long)]
    pub budget: f64,
    /// Random pure states to compare against the optimum.
    #[arg(long, default_value_t = 0)]
    pub oracle_samples: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopiesCommand {
    /// Exact simulation of the pairing protocol.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Copies per side.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub energies: String,
    #[arg(long)]
    pub beta: String,
    /// Per-round targets `β_1,...,β_n`.
    #[arg(long, required_unless_present = "beta_final")]
    pub schedule: Option<String>,
    /// Geometric schedule ending at this inverse temperature.
    #[arg(long, conflicts_with = "schedule")]
    pub beta_final: Option<f64>,
    #[arg(long, default_value = "geometric")]
    pub method: String,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCommand {
    /// Random symmetric block unitaries certified inside the polytope.
    Sample(SampleArgs),
    /// Every applicable construction on the same target.
    Cross(StuArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub energies: String,
    #[arg(long)]
    pub beta: String,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmasCommand {
    /// Every grid check.
    CheckAll(LemmaArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct LemmaArgs {
    /// Random spectra per class.
    #[arg(long, default_value_t = 50)]
    pub per_class: usize,
}

/// Outcome category, mapped to the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Negative,
    Failed,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Negative => 1,
            Status::Failed => 2,
        }
    }
}

/// Exit status for usage errors.
pub const USAGE: u8 = 64;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if !(cli.global.tol > 0.0 && cli.global.tol.is_finite()) {
        eprintln!("error: tolerance must be positive and finite, got {}", cli.global.tol);
        return ExitCode::from(USAGE);
    }
    match commands::run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE)
        }
    }
}
