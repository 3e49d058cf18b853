//! Dispatch of parsed commands to the library.

use std::io::{self, Write};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use stuforge::block_unitary::{assemble_and_apply, partial_trace_marginals, thermal_decomposition, verify_stu, StuReport, STU_CSV_HEADER};
use stuforge::bounds::{
    asym_pure_optimum, curve_shape_violations, full_budget_grid, max_correlation_curve, oracle_domination,
    AsymmetricProblem, CURVE_CSV_HEADER,
};
use stuforge::copies::{geometric_schedule, simulate_copies, StepMethod};
use stuforge::lemmas::{lemma_grid, random_spectrum, BETAS, RATIOS};
use stuforge::oracle::{cross_method_check, sample_reachable};
use stuforge::spectra::{entropy, thermal_probs, thermal_vector, EnergySpectrum, InverseTemperature};
use stuforge::stu_geometric::{build_stu_geometric, d5_region_check, hull_membership, to_coords, vertex_set};
use stuforge::stu_majorised::{counterexamples_d4, reach_majorised_marginal_d3, build_stu_majorised};
use stuforge::stu_norm::{build_stu_norm, check_conditions};
use stuforge::{Error, Result};

use crate::{
    AsymArgs, BoundsCommand, Cli, Command, CopiesCommand, CurveArgs, Format, LemmasCommand, MajorisedArgs, NormArgs,
    OracleCommand, PolytopeArgs, SampleArgs, SimulateArgs, SpectraArgs, Status, StuArgs, StuCommand,
};

/// Header of the norm-condition scan.
pub const SCAN_CSV_HEADER: &str = "seed,energies,beta,beta_prime,cond_i,cond_ii_strong,cond_ii_weak";

/// Errors that end a run without a report.
pub enum Failure {
    Usage(String),
}

type Outcome = std::result::Result<Status, Failure>;

/// Library errors caused by the inputs rather than by the mathematics.
fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidSpectrum(_)
            | Error::InvalidBeta(_)
            | Error::InvalidArgument(_)
            | Error::InvalidBudget(_)
            | Error::LengthMismatch(..)
            | Error::SumMismatch(..)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedDimension(_)
            | Error::TooLarge { .. }
            | Error::DimensionBudgetExceeded { .. }
            | Error::OutOfRange { .. }
    )
}

/// Library errors that establish a negative answer.
fn is_negative(e: &Error) -> bool {
    matches!(
        e,
        Error::ConditionsNotMet(_)
            | Error::NotMajorised
            | Error::SignCheckFailure(_)
            | Error::StepUnbuildable { .. }
    )
}

/// Writes to stdout, ignoring a closed pipe.
fn out(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn tol(&self) -> f64 {
        self.cli.global.tol
    }

    fn spectrum(&self, literal: &str) -> std::result::Result<EnergySpectrum, Failure> {
        EnergySpectrum::parse(literal, !self.cli.global.raw_units).map_err(|e| Failure::Usage(e.to_string()))
    }

    /// Requested format, or the first allowed one.
    fn format(&self, allowed: &[Format]) -> std::result::Result<Format, Failure> {
        let f = self.cli.global.format.unwrap_or(allowed[0]);
        if !allowed.contains(&f) {
            let name = if f == Format::Csv { "CSV" } else { "JSON" };
            return Err(Failure::Usage(format!("{name} output is not available for this command")));
        }
        Ok(f)
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(self.cli).expect("configuration serialises")
    }

    fn emit_json(&self, status: Status, report: impl Serialize) -> Outcome {
        let doc = json!({ "config": self.config_json(), "status": status, "report": report });
        out(&serde_json::to_string_pretty(&doc).expect("report serialises"));
        Ok(status)
    }

    fn emit_csv(&self, status: Status, header: &str, rows: &[String]) -> Outcome {
        let status_name = serde_json::to_value(status).expect("status serialises");
        let mut text = format!("# config: {}\n# status: {}\n{header}", self.config_json(), status_name.as_str().unwrap_or(""));
        for r in rows {
            text.push('\n');
            text.push_str(r);
        }
        out(&text);
        Ok(status)
    }

    /// Reports a library error with the matching status, or turns it into a
    /// usage failure.
    fn library_error(&self, e: Error) -> Outcome {
        if is_usage(&e) {
            return Err(Failure::Usage(e.to_string()));
        }
        let status = if is_negative(&e) { Status::Negative } else { Status::Failed };
        eprintln!("{e}");
        let doc = json!({ "config": self.config_json(), "status": status, "error": e.to_string() });
        out(&serde_json::to_string_pretty(&doc).expect("report serialises"));
        Ok(status)
    }
}

fn beta(s: &str) -> std::result::Result<InverseTemperature, Failure> {
    s.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn floats(s: &str, what: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("cannot parse {what} entry {t:?}"))))
        .collect()
}

fn stu_status(r: &StuReport) -> Status {
    if r.pass {
        Status::Pass
    } else {
        Status::Failed
    }
}

/// Runs the parsed command and prints its report.
pub fn run(cli: &Cli) -> Outcome {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Spectra(a) => spectra(&ctx, a),
        Command::Stu(StuCommand::Majorised(a)) => majorised(&ctx, a),
        Command::Stu(StuCommand::Norm(a)) => norm(&ctx, a),
        Command::Stu(StuCommand::Geometric(a)) => geometric(&ctx, a),
        Command::Stu(StuCommand::Polytope(a)) | Command::Polytope(a) => polytope(&ctx, a),
        Command::Bounds(BoundsCommand::Curve(a)) => curve(&ctx, a),
        Command::Bounds(BoundsCommand::Asym(a)) => asym(&ctx, a),
        Command::Copies(CopiesCommand::Simulate(a)) => simulate(&ctx, a),
        Command::Oracle(OracleCommand::Sample(a)) => sample(&ctx, a),
        Command::Oracle(OracleCommand::Cross(a)) => cross(&ctx, a),
        Command::Lemmas(LemmasCommand::CheckAll(a)) => {
            ctx.format(&[Format::Json])?;
            match lemma_grid(cli.global.seed, a.per_class) {
                Ok(r) => {
                    let status = if r.total_violations() == 0 { Status::Pass } else { Status::Negative };
                    ctx.emit_json(status, &r)
                }
                Err(e) => ctx.library_error(e),
            }
        }
    }
}

fn spectra(ctx: &Ctx, a: &SpectraArgs) -> Outcome {
    ctx.format(&[Format::Json])?;
    let s = ctx.spectrum(&a.energies)?;
    let thermal = match &a.beta {
        None => None,
        Some(b) => {
            let b = beta(b)?;
            let t = thermal_vector(&s, b);
            let dec = match thermal_decomposition(&s, b) {
                Ok(d) => d,
                Err(e) => return ctx.library_error(e),
            };
            let energy: f64 = t.probs.iter().zip(s.energies()).map(|(p, e)| p * e).sum();
            Some(json!({
                "beta": b,
                "probs": t.probs,
                "partition_function": t.partition_function(),
                "energy": energy,
                "entropy": entropy(&t.probs),
                "reduced_coords": to_coords(&t.probs),
                "decomposition": dec,
            }))
        }
    };
    ctx.emit_json(
        Status::Pass,
        json!({
            "spectrum": s,
            "dim": s.dim(),
            "gaps": s.gaps(),
            "decreasing_gaps": s.has_decreasing_gaps(),
            "ground_degeneracy": s.ground_degeneracy(),
            "mean_energy": s.mean_energy(),
            "thermal": thermal,
        }),
    )
}

fn emit_stu(ctx: &Ctx, r: Result<StuReport>) -> Outcome {
    let fmt = ctx.format(&[Format::Json, Format::Csv])?;
    match r {
        Ok(r) if fmt == Format::Csv => ctx.emit_csv(stu_status(&r), STU_CSV_HEADER, &[r.csv_row()]),
        Ok(r) => ctx.emit_json(stu_status(&r), &r),
        Err(e) => ctx.library_error(e),
    }
}

fn majorised(ctx: &Ctx, a: &MajorisedArgs) -> Outcome {
    if a.counterexample_d4 {
        ctx.format(&[Format::Json])?;
        let r = counterexamples_d4();
        let status = if r.confirmed { Status::Pass } else { Status::Failed };
        return ctx.emit_json(status, &r);
    }
    let s = ctx.spectrum(a.energies.as_deref().unwrap_or_default())?;
    let b = beta(a.beta.as_deref().unwrap_or_default())?;
    match (&a.beta_prime, &a.target) {
        (Some(bp), None) => {
            let bp = beta(bp)?;
            emit_stu(ctx, build_stu_majorised(&s, b, bp).and_then(|u| verify_stu(&u, &s, b, bp, ctx.tol())))
        }
        (None, Some(t)) => {
            ctx.format(&[Format::Json])?;
            let target = floats(t, "target")?;
            let r = reach_majorised_marginal_d3(&s, b, &target).and_then(|u| {
                let (ra, rb) = partial_trace_marginals(&assemble_and_apply(&u, &s, b)?);
                let ma: Vec<f64> = ra.diagonal().iter().copied().collect();
                let mb: Vec<f64> = rb.diagonal().iter().copied().collect();
                let dev = |m: &[f64]| m.iter().zip(&target).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                Ok((dev(&ma).max(dev(&mb)), ma, mb))
            });
            match r {
                Ok((deviation, ma, mb)) => {
                    let status = if deviation <= ctx.tol() { Status::Pass } else { Status::Failed };
                    ctx.emit_json(
                        status,
                        json!({ "target": target, "marginal_a": ma, "marginal_b": mb, "deviation": deviation }),
                    )
                }
                Err(e) => ctx.library_error(e),
            }
        }
        _ => Err(Failure::Usage("exactly one of --beta-prime or --target is required".into())),
    }
}

fn norm(ctx: &Ctx, a: &NormArgs) -> Outcome {
    if let Some(count) = a.scan {
        return norm_scan(ctx, count, a.dim);
    }
    let s = ctx.spectrum(a.energies.as_deref().unwrap_or_default())?;
    let b = beta(a.beta.as_deref().unwrap_or_default())?;
    let bp = beta(a.beta_prime.as_deref().unwrap_or_default())?;
    if a.check_only {
        ctx.format(&[Format::Json])?;
        return match check_conditions(&s, b, bp) {
            Ok(c) => {
                let status = if c.cond_i && c.cond_ii_strong { Status::Pass } else { Status::Negative };
                ctx.emit_json(status, &c)
            }
            Err(e) => ctx.library_error(e),
        };
    }
    emit_stu(ctx, build_stu_norm(&s, b, bp).and_then(|u| verify_stu(&u, &s, b, bp, ctx.tol())))
}

/// One CSV row per `(spectrum seed, β, β′)`; spectra are split across workers
/// and rows are written in seed order.
fn norm_scan(ctx: &Ctx, count: usize, dim: usize) -> Outcome {
    ctx.format(&[Format::Csv])?;
    if !(2..=8).contains(&dim) {
        return Err(Failure::Usage(format!("--dim must be between 2 and 8, got {dim}")));
    }
    let base = ctx.cli.global.seed;
    let jobs = ctx.cli.global.jobs.max(1);
    let cell = |k: usize| -> Result<Vec<String>> {
        let seed = base.wrapping_add(k as u64);
        let s = random_spectrum(&mut ChaCha8Rng::seed_from_u64(seed), dim, 0.1, 5.0);
        let mut rows = Vec::new();
        for &b in &BETAS {
            for &r in &RATIOS {
                let (bt, bp) = (InverseTemperature::Finite(b), InverseTemperature::Finite(r * b));
                let c = check_conditions(&s, bt, bp)?;
                rows.push(format!(
                    "{seed},\"{s}\",{bt},{bp},{},{},{}",
                    c.cond_i, c.cond_ii_strong, c.cond_ii_weak
                ));
            }
        }
        Ok(rows)
    };
    let chunks: Vec<Result<Vec<String>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let cell = &cell;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for k in (w..count).step_by(jobs) {
                        out.push((k, cell(k)));
                    }
                    out
                })
            })
            .collect();
        let mut all: Vec<(usize, Result<Vec<String>>)> =
            handles.into_iter().flat_map(|h| h.join().expect("scan worker")).collect();
        all.sort_by_key(|(k, _)| *k);
        all.into_iter().map(|(_, r)| r).collect()
    });
    let mut rows = Vec::new();
    for c in chunks {
        match c {
            Ok(r) => rows.extend(r),
            Err(e) => return ctx.library_error(e),
        }
    }
    ctx.emit_csv(Status::Pass, SCAN_CSV_HEADER, &rows)
}

fn geometric(ctx: &Ctx, a: &StuArgs) -> Outcome {
    let s = ctx.spectrum(&a.energies)?;
    let (b, bp) = (beta(&a.beta)?, beta(&a.beta_prime)?);
    if s.dim() == 5 {
        ctx.format(&[Format::Json])?;
        return match d5_region_check(&s, b, Some(bp)) {
            Ok(r) => {
                let status = match &r.stu {
                    Some(stu) if stu.pass && stu.deviation() <= ctx.tol() => Status::Pass,
                    Some(_) => Status::Failed,
                    None => Status::Negative,
                };
                ctx.emit_json(status, &r)
            }
            Err(e) => ctx.library_error(e),
        };
    }
    emit_stu(ctx, build_stu_geometric(&s, b, bp).and_then(|u| verify_stu(&u, &s, b, bp, ctx.tol())))
}

fn polytope(ctx: &Ctx, a: &PolytopeArgs) -> Outcome {
    let s = ctx.spectrum(&a.energies)?;
    let b = beta(&a.beta)?;
    let set = match vertex_set(&s, b, a.force) {
        Ok(v) => v,
        Err(e) => return ctx.library_error(e),
    };
    if a.emit_vertices {
        ctx.format(&[Format::Csv])?;
        let csv = set.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default().to_string();
        let rows: Vec<String> = lines.map(str::to_string).collect();
        return ctx.emit_csv(Status::Pass, &header, &rows);
    }
    ctx.format(&[Format::Json])?;
    let membership = match &a.point {
        None => None,
        Some(p) => match hull_membership(&floats(p, "point")?, &set) {
            Ok(c) => Some(c),
            Err(e) => return ctx.library_error(e),
        },
    };
    let status = match &membership {
        Some(c) if !c.feasible => Status::Negative,
        _ => Status::Pass,
    };
    ctx.emit_json(
        status,
        json!({
            "d": set.d,
            "nominal_count": set.nominal_count,
            "vertex_count": set.points.len(),
            "thermal_coords": to_coords(&thermal_probs(&s, b)),
            "membership": membership,
        }),
    )
}

fn curve(ctx: &Ctx, a: &CurveArgs) -> Outcome {
    let fmt = ctx.format(&[Format::Csv, Format::Json])?;
    let s = ctx.spectrum(&a.energies)?;
    let b = beta(&a.beta)?;
    if a.grid < 2 {
        return Err(Failure::Usage("--grid needs at least 2 points".into()));
    }
    let pts = match max_correlation_curve(&s, b, &full_budget_grid(&s, b, a.grid)) {
        Ok(p) => p,
        Err(e) => return ctx.library_error(e),
    };
    let (slope, curvature) = curve_shape_violations(&pts);
    let status = if slope <= ctx.tol() && curvature <= ctx.tol() { Status::Pass } else { Status::Failed };
    match fmt {
        Format::Csv => ctx.emit_csv(status, CURVE_CSV_HEADER, &pts.iter().map(|p| p.csv_row()).collect::<Vec<_>>()),
        Format::Json => ctx.emit_json(
            status,
            json!({ "points": pts, "monotonicity_violation": slope, "concavity_violation": curvature }),
        ),
    }
}

fn asym(ctx: &Ctx, a: &AsymArgs) -> Outcome {
    ctx.format(&[Format::Json])?;
    let problem = AsymmetricProblem {
        spectrum_a: ctx.spectrum(&a.energies_a)?,
        spectrum_b: ctx.spectrum(&a.energies_b)?,
        energy_budget: a.budget,
    };
    let sol = match asym_pure_optimum(&problem) {
        Ok(s) => s,
        Err(e) => return ctx.library_error(e),
    };
    let oracle = if a.oracle_samples > 0 {
        match oracle_domination(&problem, a.oracle_samples, ctx.cli.global.seed) {
            Ok(r) => Some(r),
            Err(e) => return ctx.library_error(e),
        }
    } else {
        None
    };
    let identity_ok = (sol.mutual_information - sol.mutual_information_closed).abs() <= ctx.tol();
    let dominated = oracle.as_ref().map_or(true, |o| o.max_excess <= ctx.tol());
    let status = if identity_ok && dominated { Status::Pass } else { Status::Failed };
    ctx.emit_json(status, json!({ "solution": sol, "oracle": oracle }))
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Outcome {
    ctx.format(&[Format::Json])?;
    let s = ctx.spectrum(&a.energies)?;
    let b = beta(&a.beta)?;
    let method: StepMethod = a.method.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let schedule = match (&a.schedule, a.beta_final) {
        (Some(list), _) => list.split(',').map(beta).collect::<std::result::Result<Vec<_>, _>>()?,
        (None, Some(bf)) => match b {
            InverseTemperature::Finite(b0) => geometric_schedule(b0, bf, a.n),
            InverseTemperature::Infinite => {
                return Err(Failure::Usage("--beta-final needs a finite --beta; pass --schedule instead".into()))
            }
        },
        (None, None) => unreachable!("clap requires one of the two"),
    };
    if schedule.len() != a.n {
        return Err(Failure::Usage(format!("--n is {} but the schedule has {} rounds", a.n, schedule.len())));
    }
    match simulate_copies(&s, b, &schedule, method, ctx.tol()) {
        Ok(t) => {
            let status = if t.pass { Status::Pass } else { Status::Negative };
            ctx.emit_json(status, &t)
        }
        Err(e) => ctx.library_error(e),
    }
}

fn sample(ctx: &Ctx, a: &SampleArgs) -> Outcome {
    ctx.format(&[Format::Json])?;
    let s = ctx.spectrum(&a.energies)?;
    let b = beta(&a.beta)?;
    match sample_reachable(&s, b, a.count, ctx.cli.global.seed) {
        Ok(r) => {
            let status = if r.escapes == 0 && r.max_asymmetry <= ctx.tol() { Status::Pass } else { Status::Failed };
            ctx.emit_json(status, &r)
        }
        Err(e) => ctx.library_error(e),
    }
}

fn cross(ctx: &Ctx, a: &StuArgs) -> Outcome {
    ctx.format(&[Format::Json])?;
    let s = ctx.spectrum(&a.energies)?;
    let (b, bp) = (beta(&a.beta)?, beta(&a.beta_prime)?);
    match cross_method_check(&s, b, bp, ctx.tol()) {
        Ok(r) => {
            let status = if r.agree && r.passing > 0 { Status::Pass } else { Status::Failed };
            ctx.emit_json(status, &r)
        }
        Err(e) => ctx.library_error(e),
    }
}
