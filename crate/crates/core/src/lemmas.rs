//! Grid checks of the norm and coefficient facts the constructions rely on.
//!
//! Each check runs over seeded random spectra and a grid of `(β, β′)` pairs
//! with `β′ <= β` and counts violations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::majorize::ROUNDING_GUARD;
use crate::spectra::{EnergySpectrum, InverseTemperature};
use crate::stu_geometric::curve_coefficients;
use crate::stu_norm::check_conditions;

/// Tolerance on the coefficient sum.
pub const SUM_TOL: f64 = 1e-10;

/// Inverse temperatures of the grid.
pub const BETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
/// `β′ / β` ratios of the grid.
pub const RATIOS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.95];

/// Outcome of one grid check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub points: usize,
    pub violations: usize,
    /// First violating case, if any.
    pub example: Option<String>,
}

impl LemmaCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), points: 0, violations: 0, example: None }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.points += 1;
        if !ok {
            self.violations += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }
}

/// All grid checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaGridReport {
    pub seed: u64,
    pub spectra_per_class: usize,
    pub checks: Vec<LemmaCheck>,
    /// Increasing gaps with a large top level, where the strong condition is
    /// expected to fail in some cases.
    pub failure_regime: LemmaCheck,
}

impl LemmaGridReport {
    pub fn total_points(&self) -> usize {
        self.checks.iter().map(|c| c.points).sum()
    }

    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// `E_0 = 0`, `E_1 = 1`, then gaps drawn from `[lo, hi]`.
pub fn random_spectrum<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> EnergySpectrum {
    let mut e = vec![0.0, 1.0];
    while e.len() < d {
        let last = *e.last().unwrap();
        e.push(last + rng.gen_range(lo..=hi));
    }
    e.truncate(d);
    EnergySpectrum::new(e).expect("increasing energies")
}

/// `d = 4` with gaps `1 >= δ_2 >= δ_3`.
pub fn decreasing_gap_spectrum<R: Rng>(rng: &mut R) -> EnergySpectrum {
    let g2: f64 = rng.gen_range(0.05..=1.0);
    let g3: f64 = rng.gen_range(0.05..=1.0) * g2;
    EnergySpectrum::new(vec![0.0, 1.0, 1.0 + g2, 1.0 + g2 + g3]).expect("increasing energies")
}

/// `d = 4` with increasing gaps and `E_3 >= 10`.
pub fn increasing_gap_spectrum<R: Rng>(rng: &mut R) -> EnergySpectrum {
    let g2: f64 = rng.gen_range(1.0..=3.0);
    let e3: f64 = rng.gen_range(10.0..=60.0);
    EnergySpectrum::new(vec![0.0, 1.0, 1.0 + g2, e3.max(1.0 + 2.0 * g2)]).expect("increasing energies")
}

fn grid() -> impl Iterator<Item = (InverseTemperature, InverseTemperature)> {
    BETAS.iter().flat_map(|&b| {
        RATIOS.iter().map(move |&r| (InverseTemperature::Finite(b), InverseTemperature::Finite(r * b)))
    })
}

fn describe(s: &EnergySpectrum, b: InverseTemperature, bp: InverseTemperature) -> String {
    format!("E=({s}) beta={b} beta_prime={bp}")
}

/// Runs every grid check.
pub fn lemma_grid(seed: u64, spectra_per_class: usize) -> Result<LemmaGridReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norms = LemmaCheck::new("norm monotonicity and normalised majorisation (d = 2..6)");
    let mut coeffs = LemmaCheck::new("curve coefficients nonnegative with unit sum (d = 2..6)");
    let mut d3 = LemmaCheck::new("strong norm-passing conditions (d = 3)");
    let mut d4 = LemmaCheck::new("strong norm-passing conditions (d = 4, decreasing gaps)");
    let mut regime = LemmaCheck::new("strong conditions with increasing gaps and E_3 >= 10 (d = 4)");
    for d in 2..=6 {
        for _ in 0..spectra_per_class {
            let s = random_spectrum(&mut rng, d, 0.1, 5.0);
            for (b, bp) in grid() {
                let c = check_conditions(&s, b, bp)?;
                norms.record(c.cond_i, || describe(&s, b, bp));
                let k = curve_coefficients(&s, b, bp)?;
                let ok = k.a.iter().all(|&a| a >= -ROUNDING_GUARD) && (k.a.iter().sum::<f64>() - 1.0).abs() <= SUM_TOL;
                coeffs.record(ok, || describe(&s, b, bp));
                if d == 3 {
                    d3.record(c.cond_i && c.cond_ii_strong, || describe(&s, b, bp));
                }
            }
        }
    }
    for _ in 0..spectra_per_class {
        let s = decreasing_gap_spectrum(&mut rng);
        for (b, bp) in grid() {
            let c = check_conditions(&s, b, bp)?;
            d4.record(c.cond_i && c.cond_ii_strong, || describe(&s, b, bp));
        }
        let s = increasing_gap_spectrum(&mut rng);
        for (b, bp) in grid() {
            let c = check_conditions(&s, b, bp)?;
            regime.record(c.cond_ii_strong, || describe(&s, b, bp));
        }
    }
    Ok(LemmaGridReport { seed, spectra_per_class, checks: vec![norms, coeffs, d3, d4], failure_regime: regime })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_clean() {
        let r = lemma_grid(11, 3).unwrap();
        for c in &r.checks {
            assert_eq!(c.violations, 0, "{c:?}");
        }
        assert!(r.total_points() >= 3 * 25 * 10);
    }
}
