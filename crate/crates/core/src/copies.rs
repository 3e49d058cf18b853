//! Round-robin protocol on `n` copies of each system.
//!
//! Round `j` applies one STU to every pair `(A_i, B_{(i+j) mod n})`, so each
//! `A` meets each `B` exactly once. The state of all `2n` parties is evolved
//! exactly and every round is checked against thermal marginals and against
//! the next round's pairs being uncorrelated.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{beta_for_energy, entropy, thermal_probs, EnergySpectrum, InverseTemperature};
use crate::stu_geometric::build_stu_geometric;
use crate::stu_majorised::build_stu_majorised;
use crate::stu_norm::build_stu_norm;

/// Largest total dimension `d^{2n}` simulated exactly.
pub const EXACT_DIM_LIMIT: usize = 1024;

/// Which pairs interact in each round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingSchedule {
    pub n: usize,
    /// `rounds[j]` lists `(i, k)` meaning `A_i` with `B_k`.
    pub rounds: Vec<Vec<(usize, usize)>>,
}

impl PairingSchedule {
    /// Every round is a perfect matching and no pair repeats.
    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.n * self.n];
        for round in &self.rounds {
            let mut a_used = vec![false; self.n];
            let mut b_used = vec![false; self.n];
            for &(i, k) in round {
                if i >= self.n || k >= self.n || a_used[i] || b_used[k] || seen[i * self.n + k] {
                    return false;
                }
                a_used[i] = true;
                b_used[k] = true;
                seen[i * self.n + k] = true;
            }
            if round.len() != self.n {
                return false;
            }
        }
        self.rounds.len() == self.n && seen.iter().all(|&s| s)
    }
}

/// `A_i` meets `B_{(i+j) mod n}` in round `j`.
pub fn pairing_schedule(n: usize) -> PairingSchedule {
    let rounds = (0..n).map(|j| (0..n).map(|i| (i, (i + j) % n)).collect()).collect();
    PairingSchedule { n, rounds }
}

/// Construction used for each per-round STU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMethod {
    Geometric,
    Norm,
    Majorised,
}

impl FromStr for StepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "norm" => Ok(Self::Norm),
            "majorised" | "majorized" => Ok(Self::Majorised),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Checks after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub beta_from: InverseTemperature,
    pub beta_to: InverseTemperature,
    /// Inverse temperature matching each party's energy, `A_0..A_{n-1}, B_0..B_{n-1}`.
    pub effective_beta: Vec<Option<InverseTemperature>>,
    /// Largest entry of `ρ_X − τ(β_to)` over all parties.
    pub marginal_deviation: f64,
    /// Largest entry of `ρ_{AB} − ρ_A ⊗ ρ_B` over the next round's pairs.
    pub next_pair_product_deviation: Option<f64>,
    /// Global von Neumann entropy.
    pub global_entropy: f64,
    pub pass: bool,
}

/// Full run of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub n: usize,
    pub method: StepMethod,
    pub beta: InverseTemperature,
    pub schedule: Vec<InverseTemperature>,
    pub exact: bool,
    pub tolerance: f64,
    pub initial_entropy: f64,
    pub rounds: Vec<RoundTrace>,
    /// Largest change of the global entropy across rounds.
    pub entropy_drift: f64,
    pub pass: bool,
}

/// Dense state of `sites` qudits, site 0 most significant.
struct MultiState {
    d: usize,
    sites: usize,
    rho: DMatrix<f64>,
}

impl MultiState {
    fn product(p: &[f64], sites: usize) -> Self {
        let d = p.len();
        let dim = d.pow(sites as u32);
        let diag: Vec<f64> = (0..dim)
            .map(|idx| (0..sites).map(|s| p[(idx / d.pow((sites - 1 - s) as u32)) % d]).product())
            .collect();
        Self { d, sites, rho: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) }
    }

    fn stride(&self, s: usize) -> usize {
        self.d.pow((self.sites - 1 - s) as u32)
    }

    fn digit(&self, idx: usize, s: usize) -> usize {
        (idx / self.stride(s)) % self.d
    }

    /// `M ↦ U M` with `U` acting on sites `(s1, s2)` in the basis `a d + b`.
    fn left_apply(&self, u: &DMatrix<f64>, m: &DMatrix<f64>, s1: usize, s2: usize) -> DMatrix<f64> {
        let (d, dim) = (self.d, m.nrows());
        let (t1, t2) = (self.stride(s1), self.stride(s2));
        let mut out = DMatrix::zeros(dim, m.ncols());
        for row in 0..dim {
            let (a, b) = (self.digit(row, s1), self.digit(row, s2));
            let base = row - a * t1 - b * t2;
            for a2 in 0..d {
                for b2 in 0..d {
                    let w = u[(a * d + b, a2 * d + b2)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = base + a2 * t1 + b2 * t2;
                    for col in 0..m.ncols() {
                        out[(row, col)] += w * m[(src, col)];
                    }
                }
            }
        }
        out
    }

    fn apply_pair(&mut self, u: &DMatrix<f64>, s1: usize, s2: usize) {
        let half = self.left_apply(u, &self.rho, s1, s2);
        self.rho = self.left_apply(u, &half.transpose(), s1, s2);
    }

    /// Reduced state on the listed sites, in the order given.
    fn reduced(&self, keep: &[usize]) -> DMatrix<f64> {
        let d = self.d;
        let k = d.pow(keep.len() as u32);
        let mut out = DMatrix::zeros(k, k);
        let dim = self.rho.nrows();
        let local = |idx: usize| keep.iter().fold(0, |acc, &s| acc * d + self.digit(idx, s));
        let strip = |idx: usize| keep.iter().fold(idx, |acc, &s| acc - self.digit(idx, s) * self.stride(s));
        for i in 0..dim {
            for j in 0..dim {
                if strip(i) == strip(j) {
                    out[(local(i), local(j))] += self.rho[(i, j)];
                }
            }
        }
        out
    }

    fn entropy(&self) -> f64 {
        entropy(self.rho.clone().symmetric_eigenvalues().as_slice())
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn build_step(
    method: StepMethod,
    spectrum: &EnergySpectrum,
    from: InverseTemperature,
    to: InverseTemperature,
) -> Result<DMatrix<f64>> {
    let blocks = match method {
        StepMethod::Geometric => build_stu_geometric(spectrum, from, to),
        StepMethod::Norm => build_stu_norm(spectrum, from, to),
        StepMethod::Majorised => build_stu_majorised(spectrum, from, to),
    }?;
    Ok(blocks.dense())
}

/// Runs the protocol with per-round targets `schedule = (β_1, ..., β_n)`.
pub fn simulate_copies(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    schedule: &[InverseTemperature],
    method: StepMethod,
    tol: f64,
) -> Result<ProtocolTrace> {
    let n = schedule.len();
    if n == 0 {
        return Err(Error::InvalidArgument("schedule must have at least one round".into()));
    }
    let d = spectrum.dim();
    let dim = d.checked_pow(2 * n as u32).unwrap_or(usize::MAX);
    if dim > EXACT_DIM_LIMIT {
        return Err(Error::DimensionBudgetExceeded { dim, limit: EXACT_DIM_LIMIT });
    }
    let pairing = pairing_schedule(n);
    let mut state = MultiState::product(&thermal_probs(spectrum, beta), 2 * n);
    let initial_entropy = state.entropy();
    let mut rounds = Vec::new();
    let mut from = beta;
    for (j, &to) in schedule.iter().enumerate() {
        let u = build_step(method, spectrum, from, to)
            .map_err(|e| Error::StepUnbuildable { round: j, reason: e.to_string() })?;
        for &(i, k) in &pairing.rounds[j] {
            state.apply_pair(&u, i, n + k);
        }
        let target = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(thermal_probs(spectrum, to)));
        let mut marginal_deviation: f64 = 0.0;
        let mut effective_beta = Vec::with_capacity(2 * n);
        for s in 0..2 * n {
            let r = state.reduced(&[s]);
            marginal_deviation = marginal_deviation.max(max_abs(&(&r - &target)));
            let e: f64 = (0..d).map(|a| r[(a, a)] * spectrum.energies()[a]).sum();
            effective_beta.push(beta_for_energy(spectrum, e).ok());
        }
        let next_pair_product_deviation = pairing.rounds.get(j + 1).map(|next| {
            next.iter()
                .map(|&(i, k)| {
                    let pair = state.reduced(&[i, n + k]);
                    let prod = state.reduced(&[i]).kronecker(&state.reduced(&[n + k]));
                    max_abs(&(pair - prod))
                })
                .fold(0.0, f64::max)
        });
        let global_entropy = state.entropy();
        let pass = marginal_deviation <= tol && next_pair_product_deviation.map_or(true, |v| v <= tol);
        rounds.push(RoundTrace {
            round: j,
            beta_from: from,
            beta_to: to,
            effective_beta,
            marginal_deviation,
            next_pair_product_deviation,
            global_entropy,
            pass,
        });
        from = to;
    }
    let entropy_drift = rounds.iter().map(|r| (r.global_entropy - initial_entropy).abs()).fold(0.0, f64::max);
    let pass = rounds.iter().all(|r| r.pass) && entropy_drift <= tol;
    Ok(ProtocolTrace {
        n,
        method,
        beta,
        schedule: schedule.to_vec(),
        exact: true,
        tolerance: tol,
        initial_entropy,
        rounds,
        entropy_drift,
        pass,
    })
}

/// `n` targets interpolating `β` to `β_final` geometrically (linearly when
/// `β_final = 0`).
pub fn geometric_schedule(beta: f64, beta_final: f64, n: usize) -> Vec<InverseTemperature> {
    (1..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            let b = if beta_final > 0.0 { beta * (beta_final / beta).powf(t) } else { beta * (1.0 - t) };
            InverseTemperature::Finite(b)
        })
        .collect()
}
