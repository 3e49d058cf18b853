//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs to completion and exits 0 so the rest of the workspace tests still
//! run; set `STUFORGE_ACCEPTANCE_STRICT=1` to exit 1 when any line fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stuforge::block_unitary::{verify_stu, BlockUnitary, StuReport};
use stuforge::bounds::{asym_pure_optimum, max_correlation_point, oracle_domination, AsymmetricProblem};
use stuforge::copies::{geometric_schedule, pairing_schedule, simulate_copies, StepMethod};
use stuforge::lemmas::{decreasing_gap_spectrum, increasing_gap_spectrum, lemma_grid};
use stuforge::oracle::sample_reachable;
use stuforge::spectra::{EnergySpectrum, InverseTemperature};
use stuforge::stu_geometric::{build_stu_geometric, convexity_certify, d5_region_check};
use stuforge::stu_majorised::{build_stu_majorised, counterexamples_d4};
use stuforge::stu_norm::{build_stu_norm, check_conditions};
use stuforge::Result;

const STU_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn fin(b: f64) -> InverseTemperature {
    InverseTemperature::Finite(b)
}

fn spec(e: &[f64]) -> EnergySpectrum {
    EnergySpectrum::new(e.to_vec()).expect("valid spectrum")
}

fn beta_cases() -> Vec<(InverseTemperature, InverseTemperature)> {
    [0.2, 1.0, 5.0]
        .iter()
        .flat_map(|&b| [0.0, 0.5 * b, 0.9 * b].map(|bp| (fin(b), fin(bp))))
        .collect()
}

type Builder = fn(&EnergySpectrum, InverseTemperature, InverseTemperature) -> Result<BlockUnitary>;

/// Built STUs, failures and slowest case for one protocol.
#[derive(Default)]
struct StuSweep {
    reports: Vec<(EnergySpectrum, StuReport)>,
    failures: Vec<String>,
    worst_deviation: f64,
    slowest: Duration,
}

impl StuSweep {
    fn run(&mut self, name: &str, build: Builder, s: &EnergySpectrum, b: InverseTemperature, bp: InverseTemperature) {
        let start = Instant::now();
        let out = build(s, b, bp).and_then(|u| verify_stu(&u, s, b, bp, STU_TOL));
        self.slowest = self.slowest.max(start.elapsed());
        match out {
            Ok(r) if r.pass && r.deviation() <= STU_TOL => {
                self.worst_deviation = self.worst_deviation.max(r.deviation());
                self.reports.push((s.clone(), r));
            }
            Ok(r) => self.failures.push(format!("{name} E=({s}) {b}->{bp}: deviation {:e}", r.deviation())),
            Err(e) => self.failures.push(format!("{name} E=({s}) {b}->{bp}: {e}")),
        }
    }

    fn outcome(&self, limit: Duration) -> Outcome {
        let pass = self.failures.is_empty() && self.slowest < limit;
        let mut detail = format!(
            "{} STUs verified, worst deviation {:.2e}, slowest {:.3}s",
            self.reports.len(),
            self.worst_deviation,
            self.slowest.as_secs_f64()
        );
        if let Some(f) = self.failures.first() {
            detail.push_str(&format!("; {} failures, first: {f}", self.failures.len()));
        }
        Outcome { pass, detail }
    }
}

fn criterion_1(rng: &mut ChaCha8Rng) -> (Outcome, StuSweep) {
    let mut sweep = StuSweep::default();
    for _ in 0..100 {
        let s = spec(&[0.0, 1.0, rng.gen_range(1.0..=10.0)]);
        for (b, bp) in beta_cases() {
            sweep.run("majorised", build_stu_majorised, &s, b, bp);
            sweep.run("norm", build_stu_norm, &s, b, bp);
            sweep.run("geometric", build_stu_geometric, &s, b, bp);
        }
    }
    (sweep.outcome(Duration::from_secs(1)), sweep)
}

fn criterion_2(rng: &mut ChaCha8Rng) -> (Outcome, StuSweep) {
    let mut sweep = StuSweep::default();
    for k in 0..100 {
        // Every third spectrum has strictly increasing gaps.
        let s = if k % 3 == 0 {
            let g2 = rng.gen_range(1.1..=3.0);
            spec(&[0.0, 1.0, 1.0 + g2, 1.0 + g2 + g2 * rng.gen_range(1.1..=4.0)])
        } else {
            let mut e = vec![0.0, 1.0];
            for _ in 0..2 {
                e.push(e.last().unwrap() + rng.gen_range(0.1..=5.0));
            }
            spec(&e)
        };
        for (b, bp) in beta_cases() {
            sweep.run("geometric", build_stu_geometric, &s, b, bp);
        }
    }
    (sweep.outcome(Duration::from_secs(5)), sweep)
}

fn criterion_3(rng: &mut ChaCha8Rng) -> Result<(Outcome, StuSweep)> {
    let mut sweep = StuSweep::default();
    for _ in 0..100 {
        let s = decreasing_gap_spectrum(rng);
        for (b, bp) in beta_cases() {
            sweep.run("norm", build_stu_norm, &s, b, bp);
        }
    }
    let mut refused = 0;
    let mut cases = 0;
    for _ in 0..100 {
        let s = increasing_gap_spectrum(rng);
        for (b, bp) in beta_cases() {
            cases += 1;
            if !check_conditions(&s, b, bp)?.cond_ii_strong {
                refused += 1;
            }
        }
    }
    let mut out = sweep.outcome(Duration::from_secs(5));
    out.pass &= refused >= 1;
    out.detail.push_str(&format!("; increasing gaps with E_3 >= 10: strong condition false in {refused}/{cases}"));
    Ok((out, sweep))
}

fn criterion_4() -> Outcome {
    let r = counterexamples_d4();
    let pass = r.claim_matrix.gap > 1e-6
        && r.claim_vector.gap > 1e-6
        && r.control_identity.feasible
        && r.control_cycle.feasible
        && r.confirmed;
    Outcome {
        pass,
        detail: format!(
            "gaps: matrix {:.3e}, vector {:.3e}; controls identity {:.1e}, cycle {:.1e}",
            r.claim_matrix.gap, r.claim_vector.gap, r.control_identity.gap, r.control_cycle.gap
        ),
    }
}

fn criterion_5() -> Result<Outcome> {
    let r = lemma_grid(5, 50)?;
    let parts: Vec<String> = r.checks.iter().map(|c| format!("{}: {}/{}", c.name, c.violations, c.points)).collect();
    Ok(Outcome {
        pass: r.total_violations() == 0 && r.total_points() >= 10_000,
        detail: format!("{} points, {} violations [{}]", r.total_points(), r.total_violations(), parts.join("; ")),
    })
}

fn criterion_6(rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let betas = [0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 4.0, 7.0, 10.0];
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut spectra = 0;
    let mut mismatches: Vec<String> = Vec::new();
    for _ in 0..1000 {
        for d in [3, 4] {
            let mut e = vec![0.0, 1.0];
            while e.len() < d {
                e.push(e.last().unwrap() + rng.gen_range(0.05..=5.0));
            }
            let r = convexity_certify(&spec(&e), &betas)?;
            spectra += 1;
            worst = worst.max(r.max_rel_error);
            violations += r.sign_violations;
            for m in r.closed_form_mismatches {
                let tagged = format!("d={d} {m}");
                if !mismatches.contains(&tagged) {
                    mismatches.push(tagged);
                }
            }
        }
    }
    Ok(Outcome {
        pass: worst <= 1e-6 && violations == 0,
        detail: format!(
            "{spectra} spectra x {} betas: worst relative derivative error {worst:.2e}, sign violations {violations}; printed closed forms differing from direct evaluation (informational): [{}]",
            betas.len(),
            mismatches.join(", ")
        ),
    })
}

fn criterion_7(sweeps: &[&StuSweep]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for sweep in sweeps {
        for (s, r) in &sweep.reports {
            let pt = max_correlation_point(s, r.beta, r.delta_e.max(0.0))?;
            worst = worst.max((pt.delta_i - r.delta_i).abs());
            count += 1;
        }
    }
    Ok(Outcome { pass: count > 0 && worst <= 1e-9, detail: format!("{count} STUs, worst |dI - dI*| {worst:.2e}") })
}

fn criterion_8() -> Result<Outcome> {
    let configs: [(&[f64], &[f64]); 3] =
        [(&[0.0, 1.0], &[0.0, 1.3]), (&[0.0, 1.0], &[0.0, 1.0, 2.0]), (&[0.0, 0.7, 1.9], &[0.0, 1.0, 1.5, 3.2])];
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_identity: f64 = 0.0;
    let mut samples = 0;
    for (k, (a, b)) in configs.iter().enumerate() {
        for (j, c) in [0.05, 0.3, 0.8, 1.5, 4.0].iter().enumerate() {
            let problem = AsymmetricProblem { spectrum_a: spec(a), spectrum_b: spec(b), energy_budget: *c };
            let sol = asym_pure_optimum(&problem)?;
            worst_identity = worst_identity.max((sol.mutual_information - sol.mutual_information_closed).abs());
            let r = oracle_domination(&problem, 10_000, (100 * k + j) as u64)?;
            worst_excess = worst_excess.max(r.max_excess);
            samples += r.samples;
        }
    }
    Ok(Outcome {
        pass: worst_excess <= 1e-9 && worst_identity <= 1e-9,
        detail: format!(
            "{samples} random states: worst excess over optimum {worst_excess:.3e}; closed-form identity worst {worst_identity:.2e}"
        ),
    })
}

fn criterion_9() -> Result<Outcome> {
    let pairing_ok = (1..=64).all(|n| pairing_schedule(n).is_valid());
    let qubits = simulate_copies(&spec(&[0.0, 1.0]), fin(2.0), &geometric_schedule(2.0, 0.5, 3), StepMethod::Geometric, 1e-9)?;
    let qutrits =
        simulate_copies(&spec(&[0.0, 1.0, 2.0]), fin(1.5), &geometric_schedule(1.5, 0.6, 2), StepMethod::Geometric, 1e-9)?;
    let describe = |t: &stuforge::copies::ProtocolTrace| {
        t.rounds
            .iter()
            .map(|r| {
                format!(
                    "round {} marginal {:.1e} next-pair product {}",
                    r.round + 1,
                    r.marginal_deviation,
                    r.next_pair_product_deviation.map_or("-".into(), |v| format!("{v:.1e}"))
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(Outcome {
        pass: pairing_ok && qubits.pass && qutrits.pass,
        detail: format!(
            "pairing n<=64 {}; d=2 n=3 {} [{}]; d=3 n=2 {} [{}]",
            if pairing_ok { "ok" } else { "broken" },
            if qubits.pass { "pass" } else { "fail" },
            describe(&qubits),
            if qutrits.pass { "pass" } else { "fail" },
            describe(&qutrits)
        ),
    })
}

fn criterion_10() -> Result<Outcome> {
    let configs: [(&[f64], f64); 4] =
        [(&[0.0, 1.0, 2.0], 1.0), (&[0.0, 1.0, 4.0], 0.4), (&[0.0, 1.0, 2.0, 3.5], 1.0), (&[0.0, 1.0, 1.5, 4.0], 0.6)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (e, b)) in configs.iter().enumerate() {
        let r = sample_reachable(&spec(e), fin(*b), 10_000, 7 + k as u64)?;
        pass &= r.escapes == 0 && r.max_asymmetry <= 1e-12;
        parts.push(format!("E=({}) beta={b} escapes {}/{} max gap {:.1e}", spec(e), r.escapes, r.count, r.max_gap));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn criterion_11() -> Result<Outcome> {
    let resolved_cases: [&[f64]; 3] = [&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 1.9, 2.7, 3.4], &[0.0, 1.0, 1.8, 2.4, 2.8]];
    let mut verified = 0;
    let mut failures = Vec::new();
    for e in resolved_cases {
        for b in [1.0, 2.0, 5.0] {
            let r = d5_region_check(&spec(e), fin(b), None)?;
            match &r.stu {
                Some(stu) if r.conditions.all() && r.resolved && stu.pass && stu.deviation() <= STU_TOL => verified += 1,
                _ => failures.push(format!("E=({}) beta={b}: {:?}", spec(e), r.failures)),
            }
        }
    }
    let mut unresolved = Vec::new();
    for b in [0.05, 0.1, 0.3] {
        let r = d5_region_check(&spec(&[0.0, 1.0, 2.0, 3.0, 4.0]), fin(b), None)?;
        if !r.resolved {
            unresolved.push(b.to_string());
        }
    }
    Ok(Outcome {
        pass: failures.is_empty() && !unresolved.is_empty(),
        detail: format!(
            "{verified}/9 region checks pass with verified STUs{}; unresolved for E=(0,1,2,3,4) at beta in [{}]",
            failures.first().map_or(String::new(), |f| format!(", first failure {f}")),
            unresolved.join(", ")
        ),
    })
}

fn report(n: usize, title: &str, out: Result<Outcome>, failed: &mut usize) {
    let out = out.unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
    if !out.pass {
        *failed += 1;
    }
    println!("{} criterion {n:>2}: {title} ({})", if out.pass { "PASS" } else { "FAIL" }, out.detail);
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failed = 0;
    let (o1, s1) = criterion_1(&mut rng);
    report(1, "STU existence d=3, all three constructions", Ok(o1), &mut failed);
    let (o2, s2) = criterion_2(&mut rng);
    report(2, "STU existence d=4, geometric", Ok(o2), &mut failed);
    let c3 = criterion_3(&mut rng);
    let s3 = match c3 {
        Ok((o3, s3)) => {
            report(3, "STU existence d=4 decreasing gaps, norm passing", Ok(o3), &mut failed);
            s3
        }
        Err(e) => {
            report(3, "STU existence d=4 decreasing gaps, norm passing", Err(e), &mut failed);
            StuSweep::default()
        }
    };
    report(4, "companion counterexamples in d=4", Ok(criterion_4()), &mut failed);
    report(5, "lemma grid suite", criterion_5(), &mut failed);
    report(6, "convexity certification", criterion_6(&mut rng), &mut failed);
    report(7, "constructed STUs lie on the optimal curve", criterion_7(&[&s1, &s2, &s3]), &mut failed);
    report(8, "asymmetric pure-state optimum dominates random states", criterion_8(), &mut failed);
    report(9, "finite-copies protocol", criterion_9(), &mut failed);
    report(10, "random block unitaries stay inside the polytope", criterion_10(), &mut failed);
    report(11, "five-level region check", criterion_11(), &mut failed);
    println!("acceptance: {} of 11 criteria pass", 11 - failed);
    if failed > 0 && std::env::var("STUFORGE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
