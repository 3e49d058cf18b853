//! Optimal correlation against invested energy.
//!
//! For two copies of `τ(β)` and an energy budget `ΔE`, the largest mutual
//! information any global unitary can create is reached by the product of
//! thermal states that saturates the budget. For a product of two ground
//! states and a budget `c` the optimum is a pure state whose Schmidt
//! coefficients are thermal for the summed spectrum `Ẽ_i = E^A_i + E^B_i`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{beta_for_energy, entropy, thermal_energy, thermal_probs, EnergySpectrum, InverseTemperature};

/// One point of the optimal trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta_e: f64,
    pub delta_i: f64,
    pub beta_bar: InverseTemperature,
}

/// Header for [`CurvePoint`] rows.
pub const CURVE_CSV_HEADER: &str = "delta_E,delta_I,beta_bar";

impl CurvePoint {
    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.delta_e, self.delta_i, self.beta_bar)
    }
}

/// Largest `ΔI` reachable from `τ(β) ⊗ τ(β)` with total invested energy `ΔE`.
///
/// Each side ends at `τ(β̄)` with `E(β̄) = E(β) + ΔE/2`; budgets beyond the
/// maximally mixed state clamp to `β̄ = 0`.
pub fn max_correlation_point(spectrum: &EnergySpectrum, beta: InverseTemperature, delta_e: f64) -> Result<CurvePoint> {
    if !(delta_e >= 0.0) {
        return Err(Error::InvalidBudget(delta_e));
    }
    let p = thermal_probs(spectrum, beta);
    let e0: f64 = p.iter().zip(spectrum.energies()).map(|(a, b)| a * b).sum();
    let s0 = entropy(&p);
    let target = e0 + delta_e / 2.0;
    let beta_bar = if delta_e == 0.0 {
        beta
    } else if target >= spectrum.mean_energy() {
        InverseTemperature::ZERO
    } else {
        beta_for_energy(spectrum, target)?
    };
    let s = entropy(&thermal_probs(spectrum, beta_bar));
    Ok(CurvePoint { delta_e, delta_i: 2.0 * (s - s0), beta_bar })
}

/// [`max_correlation_point`] over a grid of budgets.
pub fn max_correlation_curve(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    delta_e_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    delta_e_grid.iter().map(|&de| max_correlation_point(spectrum, beta, de)).collect()
}

/// Evenly spaced budgets from zero to the budget that reaches `β̄ = 0`.
pub fn full_budget_grid(spectrum: &EnergySpectrum, beta: InverseTemperature, points: usize) -> Vec<f64> {
    let e0 = match beta {
        InverseTemperature::Finite(b) => thermal_energy(spectrum, b),
        InverseTemperature::Infinite => spectrum.energies()[0],
    };
    let full = 2.0 * (spectrum.mean_energy() - e0);
    let n = points.max(2) - 1;
    (0..=n).map(|k| full * k as f64 / n as f64).collect()
}

/// Worst violations of monotonicity and concavity of `ΔI*(ΔE)` on a curve,
/// as `(max drop, max convex kink)`; both nonpositive for a valid curve.
pub fn curve_shape_violations(curve: &[CurvePoint]) -> (f64, f64) {
    let mut drop: f64 = f64::NEG_INFINITY;
    let mut kink: f64 = f64::NEG_INFINITY;
    for w in curve.windows(2) {
        drop = drop.max(w[0].delta_i - w[1].delta_i);
    }
    for w in curve.windows(3) {
        let s1 = (w[1].delta_i - w[0].delta_i) / (w[1].delta_e - w[0].delta_e);
        let s2 = (w[2].delta_i - w[1].delta_i) / (w[2].delta_e - w[1].delta_e);
        kink = kink.max(s2 - s1);
    }
    (drop, kink)
}

/// Two local Hamiltonians starting in their ground states, and a budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricProblem {
    pub spectrum_a: EnergySpectrum,
    pub spectrum_b: EnergySpectrum,
    pub energy_budget: f64,
}

/// Optimal pure state `sum_i sqrt(p_i) |i⟩|i⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricSolution {
    pub beta_of_c: InverseTemperature,
    pub schmidt_probs: Vec<f64>,
    /// `Ẽ_i = (E^A_i − E^A_0) + (E^B_i − E^B_0)`.
    pub effective_spectrum: Vec<f64>,
    /// `2 S(p)`.
    pub mutual_information: f64,
    /// `2 β c + 2 ln Z̃`, evaluated independently.
    pub mutual_information_closed: f64,
    /// `sum_i p_i Ẽ_i`.
    pub energy: f64,
    /// Energy equals the budget (false on the unconstrained branch).
    pub saturated: bool,
}

/// Maximal mutual information from a product of ground states with energy
/// at most `c`.
pub fn asym_pure_optimum(problem: &AsymmetricProblem) -> Result<AsymmetricSolution> {
    let c = problem.energy_budget;
    if !(c >= 0.0) {
        return Err(Error::InvalidBudget(c));
    }
    let (ea, eb) = (problem.spectrum_a.energies(), problem.spectrum_b.energies());
    let d = ea.len().min(eb.len());
    let effective: Vec<f64> = (0..d).map(|i| (ea[i] - ea[0]) + (eb[i] - eb[0])).collect();
    let tilde = EnergySpectrum::raw(effective.clone())?;
    let mean = tilde.mean_energy();
    let beta = if c >= mean {
        InverseTemperature::ZERO
    } else if c == 0.0 {
        InverseTemperature::Infinite
    } else {
        beta_for_energy(&tilde, c)?
    };
    let p = thermal_probs(&tilde, beta);
    let energy: f64 = p.iter().zip(&effective).map(|(a, b)| a * b).sum();
    let closed = match beta {
        InverseTemperature::Finite(b) => {
            let z: f64 = effective.iter().map(|e| (-b * e).exp()).sum();
            2.0 * b * energy + 2.0 * z.ln()
        }
        InverseTemperature::Infinite => 2.0 * (tilde.ground_degeneracy() as f64).ln(),
    };
    Ok(AsymmetricSolution {
        beta_of_c: beta,
        mutual_information: 2.0 * entropy(&p),
        mutual_information_closed: closed,
        saturated: c < mean,
        energy,
        schmidt_probs: p,
        effective_spectrum: effective,
    })
}

/// `|S_A' − S_B'| <= S_A + S_B`: whether final marginal entropies are
/// compatible with a global unitary on a state with the given initial ones.
pub fn subadditivity_check(s_a: f64, s_b: f64, s_a_final: f64, s_b_final: f64) -> bool {
    (s_a_final - s_b_final).abs() <= s_a + s_b + 1e-12
}

/// Random pure states below the budget compared against the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub samples: usize,
    pub seed: u64,
    pub optimum: f64,
    /// Largest `S_A + S_B` over the samples.
    pub best_sample: f64,
    /// `best_sample − optimum`.
    pub max_excess: f64,
    /// `S_A + S_B` and energy of the optimal state built explicitly.
    pub witness_value: f64,
    pub witness_energy: f64,
}

/// Entanglement entropy `S_A = S_B` of a real pure state on `d_A ⊗ d_B`.
pub fn pure_state_entropy(psi: &[f64], da: usize, db: usize) -> f64 {
    let m = DMatrix::from_row_slice(da, db, psi);
    let rho = &m * m.transpose();
    let eig = rho.symmetric_eigenvalues();
    entropy(eig.as_slice())
}

/// Samples `O |0,0⟩` for seeded random orthogonal `O`, pulled toward the
/// ground state until the energy is a random fraction of the budget, and
/// records the largest `S_A + S_B`.
pub fn oracle_domination(problem: &AsymmetricProblem, samples: usize, seed: u64) -> Result<DominationReport> {
    let sol = asym_pure_optimum(problem)?;
    let (ea, eb) = (problem.spectrum_a.energies(), problem.spectrum_b.energies());
    let (da, db) = (ea.len(), eb.len());
    let h: Vec<f64> = (0..da * db).map(|k| (ea[k / db] - ea[0]) + (eb[k % db] - eb[0])).collect();
    let c = problem.energy_budget;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(0.0, 1.0);
    let mut best = 0.0f64;
    for _ in 0..samples {
        // Column of a Haar orthogonal matrix, split into ground and excited parts.
        let g: Vec<f64> = (0..da * db).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = g[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let w: Vec<f64> = g[1..].iter().map(|x| x / norm).collect();
        let e_w: f64 = w.iter().zip(&h[1..]).map(|(a, e)| a * a * e).sum();
        let frac: f64 = unit.sample(&mut rng);
        let sin2 = if e_w > 0.0 { (frac * c / e_w).min(1.0) } else { frac };
        let (s, co) = (sin2.sqrt(), (1.0 - sin2).sqrt());
        let mut psi = vec![co];
        psi.extend(w.iter().map(|x| s * x));
        best = best.max(2.0 * pure_state_entropy(&psi, da, db));
    }
    let mut witness = vec![0.0; da * db];
    for (i, p) in sol.schmidt_probs.iter().enumerate() {
        witness[i * db + i] = p.sqrt();
    }
    let witness_energy = witness.iter().zip(&h).map(|(a, e)| a * a * e).sum();
    Ok(DominationReport {
        samples,
        seed,
        optimum: sol.mutual_information,
        best_sample: best,
        max_excess: best - sol.mutual_information,
        witness_value: 2.0 * pure_state_entropy(&witness, da, db),
        witness_energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    fn problem(a: &[f64], b: &[f64], c: f64) -> AsymmetricProblem {
        AsymmetricProblem { spectrum_a: spec(a), spectrum_b: spec(b), energy_budget: c }
    }

    #[test]
    fn curve_endpoints() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let b = InverseTemperature::Finite(1.0);
        let zero = max_correlation_point(&s, b, 0.0).unwrap();
        assert_eq!(zero.delta_i, 0.0);
        assert_eq!(zero.beta_bar, b);
        let grid = full_budget_grid(&s, b, 11);
        let full = max_correlation_point(&s, b, grid[10] * 1.5).unwrap();
        let s0 = entropy(&thermal_probs(&s, b));
        assert_eq!(full.beta_bar, InverseTemperature::ZERO);
        assert!((full.delta_i - 2.0 * (3f64.ln() - s0)).abs() < 1e-14);
    }

    #[test]
    fn curve_point_inverts_energy() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let pt = max_correlation_point(&s, InverseTemperature::Finite(1.0), 0.3).unwrap();
        let bb = pt.beta_bar.value();
        let e1 = thermal_energy(&s, 1.0);
        assert!((thermal_energy(&s, bb) - e1 - 0.15).abs() < 1e-12);
        assert!(bb < 1.0 && pt.delta_i > 0.0);
        let curve = max_correlation_curve(&s, InverseTemperature::Finite(1.0), &full_budget_grid(&s, InverseTemperature::Finite(1.0), 40)).unwrap();
        let (drop, kink) = curve_shape_violations(&curve);
        assert!(drop < 0.0 && kink <= 1e-12);
    }

    #[test]
    fn asymmetric_examples() {
        let zero = asym_pure_optimum(&problem(&[0.0, 1.0], &[0.0, 1.0, 2.0], 0.0)).unwrap();
        assert_eq!(zero.beta_of_c, InverseTemperature::Infinite);
        assert_eq!(zero.mutual_information, 0.0);

        let two = asym_pure_optimum(&problem(&[0.0, 1.0], &[0.0, 1.0, 2.0], 0.5)).unwrap();
        assert_eq!(two.effective_spectrum, vec![0.0, 2.0]);
        assert!((two.beta_of_c.value() - 3f64.ln() / 2.0).abs() < 1e-12);
        let expect = 2.0 * entropy(&[0.75, 0.25]);
        assert!((two.mutual_information - expect).abs() < 1e-12);
        assert!((two.mutual_information_closed - expect).abs() < 1e-9);

        let uni = asym_pure_optimum(&problem(&[0.0, 1.0, 3.0], &[0.0, 2.0, 2.5], 10.0)).unwrap();
        assert_eq!(uni.beta_of_c, InverseTemperature::ZERO);
        assert!((uni.mutual_information - 2.0 * 3f64.ln()).abs() < 1e-14);
        assert!(matches!(asym_pure_optimum(&problem(&[0.0, 1.0], &[0.0, 1.0], -1.0)), Err(Error::InvalidBudget(_))));
    }

    #[test]
    fn subadditivity_examples() {
        assert!(subadditivity_check(0.3, 0.3, 0.9, 0.9));
        assert!(!subadditivity_check(0.0, 0.0, 0.2, 0.1));
        assert!(!subadditivity_check(0.5, 0.7, 1.4, 0.1));
    }

    #[test]
    fn random_states_dominated() {
        let r = oracle_domination(&problem(&[0.0, 1.0], &[0.0, 1.0, 2.0], 0.8), 2000, 3).unwrap();
        assert!(r.max_excess <= 1e-9, "{r:?}");
        assert!((r.witness_value - r.optimum).abs() < 1e-12);
        assert!((r.witness_energy - 0.8).abs() < 1e-9);
    }
}
