//! Majorised-marginals construction in `d = 3` and the `d = 4`
//! counterexamples to its generalisation.
//!
//! In `d = 3` every doubly stochastic `M` has a doubly stochastic companion
//! `M̃` with `M (1 + Π) = (1 + Π) M̃`. Choosing `M_q = M` and `M_{r_1} = M̃`
//! then moves the marginal to `M p`, so any `x ≺ p` is reachable.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block_unitary::{thermal_decomposition, BlockUnitary, SymmetricTransform};
use crate::error::{Error, Result};
use crate::lcs::CyclicPermutation;
use crate::lp::{phase1, Phase1Outcome};
use crate::majorize::{
    birkhoff_decompose, hlp_construct, majorizes, permutation_matrix, DoublyStochasticMatrix,
    CONSTRUCTION_TOL,
};
use crate::spectra::{thermal_probs, EnergySpectrum, InverseTemperature};

/// The six `3 × 3` permutations in the order `Π⁽¹⁾..Π⁽⁶⁾` used by the
/// companion rule, as images `P e_j = e_{perm[j]}`.
///
/// `Π⁽¹⁾, Π⁽³⁾, Π⁽⁵⁾` are `1, Π², Π`; the others are transpositions.
pub const PERMS_D3: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [2, 0, 1], [2, 1, 0], [1, 2, 0], [1, 0, 2]];

/// Index into [`PERMS_D3`] that the companion rule sends permutation `i` to.
///
/// Cyclic permutations commute with `1 + Π` and map to themselves; a
/// transposition `τ` maps to `Π⁻¹ τ`.
pub const COMPANION_D3: [usize; 6] = [0, 3, 2, 5, 4, 1];

/// Index of a permutation in [`PERMS_D3`].
pub fn perm_index_d3(perm: &[usize]) -> Option<usize> {
    PERMS_D3.iter().position(|p| p[..] == *perm)
}

/// Companion `M̃` of a `3 × 3` doubly stochastic matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionResult {
    pub m_tilde: DoublyStochasticMatrix,
    /// `‖M (1 + Π) − (1 + Π) M̃‖∞`.
    pub residual: f64,
    /// Birkhoff weights `α_1..α_6` of `M` on [`PERMS_D3`].
    pub alphas: [f64; 6],
}

/// `‖M (1 + Π^k) − (1 + Π^k) M̃‖∞`.
pub fn companion_residual(m: &DMatrix<f64>, m_tilde: &DMatrix<f64>, k: isize) -> f64 {
    let d = m.nrows();
    let sum = DMatrix::identity(d, d) + CyclicPermutation::new(d, k).matrix();
    (m * &sum - &sum * m_tilde).amax()
}

/// Birkhoff-decomposes `m`, relabels each transposition `τ -> Π⁻¹ τ` and
/// reassembles.
pub fn companion_matrix_d3(m: &DoublyStochasticMatrix) -> Result<CompanionResult> {
    if m.dim() != 3 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let mut alphas = [0.0; 6];
    for (w, perm) in birkhoff_decompose(m)? {
        let i = perm_index_d3(&perm).expect("every 3-permutation is listed");
        alphas[i] += w;
    }
    let mut mt = DMatrix::zeros(3, 3);
    for (i, &a) in alphas.iter().enumerate() {
        mt += permutation_matrix(&PERMS_D3[COMPANION_D3[i]]) * a;
    }
    let residual = companion_residual(m.matrix(), &mt, 1);
    let m_tilde = DoublyStochasticMatrix::new(mt)?;
    Ok(CompanionResult { m_tilde, residual, alphas })
}

/// Equal-marginal transform reaching `target ≺ p(β)` in `d = 3`.
pub fn majorised_transform(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    target: &[f64],
) -> Result<SymmetricTransform> {
    if spectrum.dim() != 3 {
        return Err(Error::UnsupportedDimension(spectrum.dim()));
    }
    let p = thermal_probs(spectrum, beta);
    if target.len() != 3 {
        return Err(Error::LengthMismatch(3, target.len()));
    }
    if !majorizes(&p, target)? {
        return Err(Error::NotMajorised);
    }
    let (m_q, _) = hlp_construct(&p, target)?;
    let comp = companion_matrix_d3(&m_q)?;
    if comp.residual > CONSTRUCTION_TOL {
        return Err(Error::CompanionFailure(comp.residual));
    }
    let transform = SymmetricTransform::new(m_q, vec![comp.m_tilde])?;
    // The marginal must equal M_q p: the companion identity pushed through.
    let dec = thermal_decomposition(spectrum, beta)?;
    let reached = transform.marginal(&dec);
    let direct = transform.m_q.apply(&p);
    let gap = reached.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > CONSTRUCTION_TOL {
        return Err(Error::CompanionFailure(gap));
    }
    Ok(transform)
}

/// Blocks whose two marginals both equal `target`.
pub fn reach_majorised_marginal_d3(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    target: &[f64],
) -> Result<BlockUnitary> {
    let transform = majorised_transform(spectrum, beta, target)?;
    BlockUnitary::from_transform(&thermal_decomposition(spectrum, beta)?, &transform)
}

/// STU from `β` to `β′` by the majorised-marginals method (`d = 3` only).
pub fn build_stu_majorised(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<BlockUnitary> {
    let target = thermal_probs(spectrum, beta_prime);
    reach_majorised_marginal_d3(spectrum, beta, &target)
}

/// Transform form of [`build_stu_majorised`].
pub fn majorised_stu_transform(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<SymmetricTransform> {
    majorised_transform(spectrum, beta, &thermal_probs(spectrum, beta_prime))
}

/// Linear system for a doubly stochastic `M̃ ≥ 0` with
/// `M (1 + Π) v_c = (1 + Π) M̃ v_c` for each column `v_c` in `columns`
/// (all basis vectors for the matrix identity).
fn companion_system(m: &DMatrix<f64>, columns: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = m.nrows();
    let var = |i: usize, j: usize| i * d + j;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..d {
        let mut row = vec![0.0; d * d];
        for j in 0..d {
            row[var(i, j)] = 1.0;
        }
        rows.push(row);
        rhs.push(1.0);
        let mut col = vec![0.0; d * d];
        for j in 0..d {
            col[var(j, i)] = 1.0;
        }
        rows.push(col);
        rhs.push(1.0);
    }
    let pi = CyclicPermutation::new(d, 1).matrix();
    let sum = DMatrix::identity(d, d) + &pi;
    let lhs = m * &sum;
    for &c in columns {
        // ((1 + Π) M̃)_{i c} = M̃_{i c} + M̃_{i-1, c}.
        for i in 0..d {
            let mut row = vec![0.0; d * d];
            row[var(i, c)] += 1.0;
            row[var((i + d - 1) % d, c)] += 1.0;
            rows.push(row);
            rhs.push(lhs[(i, c)]);
        }
    }
    (rows, rhs)
}

/// Feasibility of one companion problem, with the phase-1 outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionFeasibility {
    pub label: String,
    pub gap: f64,
    pub feasible: bool,
    /// Gap under each reshuffled row order.
    pub shuffled_gaps: Vec<f64>,
    /// Companion found when feasible.
    pub m_tilde: Option<Vec<Vec<f64>>>,
}

/// Report on the `d = 4` counterexamples and their controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// Matrix identity `M (1+Π) = (1+Π) M̃` for the counterexample `M`.
    pub claim_matrix: CompanionFeasibility,
    /// Vector version with `v = e_0`.
    pub claim_vector: CompanionFeasibility,
    pub control_identity: CompanionFeasibility,
    pub control_cycle: CompanionFeasibility,
    /// Both claims infeasible by more than `1e-6`, both controls feasible,
    /// stable under row shuffles.
    pub confirmed: bool,
}

/// The `4 × 4` permutation with no companion.
pub fn counterexample_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    )
}

/// Solves the companion problem for `m` on `columns`, plus `shuffles`
/// reruns with permuted constraint rows.
pub fn companion_feasibility(
    label: &str,
    m: &DMatrix<f64>,
    columns: &[usize],
    shuffles: usize,
    seed: u64,
) -> CompanionFeasibility {
    let d = m.nrows();
    let (a, b) = companion_system(m, columns);
    let out: Phase1Outcome = phase1(&a, &b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shuffled_gaps = (0..shuffles)
        .map(|_| {
            let mut order: Vec<usize> = (0..a.len()).collect();
            order.shuffle(&mut rng);
            let sa: Vec<Vec<f64>> = order.iter().map(|&i| a[i].clone()).collect();
            let sb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
            phase1(&sa, &sb).gap
        })
        .collect();
    let feasible = out.feasible(1e-9);
    let m_tilde = feasible.then(|| (0..d).map(|i| out.x[i * d..(i + 1) * d].to_vec()).collect());
    CompanionFeasibility { label: label.into(), gap: out.gap, feasible, shuffled_gaps, m_tilde }
}

/// Certifies, by phase-1 infeasibility, that neither the matrix nor the
/// vector companion relation can hold for [`counterexample_matrix`].
pub fn counterexamples_d4() -> CounterexampleReport {
    let m = counterexample_matrix();
    let all: Vec<usize> = (0..4).collect();
    let claim_matrix = companion_feasibility("matrix", &m, &all, 10, 1);
    let claim_vector = companion_feasibility("vector e0", &m, &[0], 10, 2);
    let control_identity = companion_feasibility("identity", &DMatrix::identity(4, 4), &all, 10, 3);
    let control_cycle =
        companion_feasibility("cycle", &CyclicPermutation::new(4, 1).matrix(), &all, 10, 4);
    let infeasible = |c: &CompanionFeasibility| c.gap > 1e-6 && c.shuffled_gaps.iter().all(|&g| g > 1e-6);
    let feasible = |c: &CompanionFeasibility| c.feasible && c.shuffled_gaps.iter().all(|&g| g <= 1e-9);
    let confirmed = infeasible(&claim_matrix)
        && infeasible(&claim_vector)
        && feasible(&control_identity)
        && feasible(&control_cycle);
    CounterexampleReport { claim_matrix, claim_vector, control_identity, control_cycle, confirmed }
}
