//! Block unitaries on the cyclic LCS family, the equal-marginal transform
//! engine, joint states, partial traces and STU verification.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcs::{self, decompose, independent_count, is_midpoint, shift, JointDiagonal, LcsDecomposition};
use crate::majorize::{horn_lift, DoublyStochasticMatrix, OrthogonalMatrix};
use crate::spectra::{energy, entropy, thermal_probs, EnergySpectrum, InverseTemperature};

/// Dense index of the `m`-th basis vector `|m, m+s⟩` of subspace `s`.
pub fn lcs_index(d: usize, s: usize, m: usize) -> usize {
    m * d + (m + s) % d
}

/// Per-subspace doubly stochastic matrices obeying the equal-marginal
/// constraint `M_{r_{d-i}} = Π^i M_{r_i} Π^{-i}`.
///
/// Only `M_q` and `M_{r_1}..M_{r_k}`, `k = ⌊d/2⌋`, are stored; partners
/// are implied. The resulting marginal is
/// `M_q q + sum_i c_i (1 + Π^i) M_{r_i} r_i` with `c_i = 1/2` only at the
/// even-`d` midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTransform {
    pub d: usize,
    pub m_q: DoublyStochasticMatrix,
    /// `m_r[i - 1]` acts on `r_i`.
    pub m_r: Vec<DoublyStochasticMatrix>,
}

impl SymmetricTransform {
    pub fn new(m_q: DoublyStochasticMatrix, m_r: Vec<DoublyStochasticMatrix>) -> Result<Self> {
        let d = m_q.dim();
        let k = independent_count(d);
        if m_r.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: m_r.len() });
        }
        if let Some(bad) = m_r.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        Ok(Self { d, m_q, m_r })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            m_q: DoublyStochasticMatrix::identity(d),
            m_r: vec![DoublyStochasticMatrix::identity(d); independent_count(d)],
        }
    }

    /// Every block mixed uniformly over all cyclic shifts; yields uniform marginals.
    pub fn uniform(d: usize) -> Self {
        Self {
            d,
            m_q: DoublyStochasticMatrix::uniform(d),
            m_r: vec![DoublyStochasticMatrix::uniform(d); independent_count(d)],
        }
    }

    /// Weighted sum of transforms, matrix by matrix.
    pub fn mixture(terms: &[(f64, &SymmetricTransform)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1;
        let mq: Vec<(f64, &DoublyStochasticMatrix)> = terms.iter().map(|(w, t)| (*w, &t.m_q)).collect();
        let m_q = DoublyStochasticMatrix::mixture(&mq)?;
        let m_r = (0..first.m_r.len())
            .map(|i| {
                let parts: Vec<(f64, &DoublyStochasticMatrix)> =
                    terms.iter().map(|(w, t)| (*w, &t.m_r[i])).collect();
                DoublyStochasticMatrix::mixture(&parts)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(m_q, m_r)
    }

    /// Target diagonal of every subspace block, indexed like
    /// [`LcsDecomposition::subspace`].
    pub fn subspace_targets(&self, dec: &LcsDecomposition) -> Vec<Vec<f64>> {
        let d = self.d;
        let mut targets = vec![Vec::new(); d];
        targets[0] = self.m_q.apply(&dec.q);
        for i in 1..=independent_count(d) {
            let moved = self.m_r[i - 1].apply(&dec.r[i - 1]);
            if is_midpoint(i, d) {
                let partner = shift(&moved, i as isize);
                targets[i] = moved.iter().zip(&partner).map(|(a, b)| 0.5 * (a + b)).collect();
            } else {
                targets[d - i] = shift(&moved, i as isize);
                targets[i] = moved;
            }
        }
        targets
    }

    /// Marginal reached by this transform, `M_q q + sum_i c_i (1 + Π^i) M_{r_i} r_i`.
    pub fn marginal(&self, dec: &LcsDecomposition) -> Vec<f64> {
        let mut out = self.m_q.apply(&dec.q);
        for i in 1..=independent_count(self.d) {
            let moved = self.m_r[i - 1].apply(&dec.r[i - 1]);
            let c = lcs::midpoint_weight(i, self.d);
            let partner = shift(&moved, i as isize);
            for j in 0..self.d {
                out[j] += c * (moved[j] + partner[j]);
            }
        }
        out
    }
}

/// Marginals of a block-diagonal state from the diagonals of its blocks.
pub fn marginals_from_targets(targets: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = targets.len();
    let mut pa = vec![0.0; d];
    let mut pb = vec![0.0; d];
    for (s, t) in targets.iter().enumerate() {
        for m in 0..d {
            pa[m] += t[m];
            pb[(m + s) % d] += t[m];
        }
    }
    (pa, pb)
}

/// Orthogonal blocks `U_q, U_{r_1}, ..., U_{r_{d-1}}`; the global unitary is
/// their direct sum in the LCS basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockUnitary {
    pub blocks: Vec<OrthogonalMatrix>,
}

impl BlockUnitary {
    pub fn new(blocks: Vec<OrthogonalMatrix>) -> Result<Self> {
        let d = blocks.len();
        if let Some(b) = blocks.iter().find(|b| b.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: b.dim() });
        }
        Ok(Self { blocks })
    }

    pub fn identity(d: usize) -> Self {
        Self { blocks: vec![OrthogonalMatrix::identity(d); d] }
    }

    pub fn dim(&self) -> usize {
        self.blocks.len()
    }

    /// Horn-lifts every subspace onto the targets of `transform`, using the
    /// conjugated copy `Π^i U_{r_i} Π^{-i}` for each partner `r_{d-i}`.
    pub fn from_transform(dec: &LcsDecomposition, transform: &SymmetricTransform) -> Result<Self> {
        let d = dec.d;
        if transform.d != d {
            return Err(Error::DimensionMismatch { expected: d, found: transform.d });
        }
        let targets = transform.subspace_targets(dec);
        let mut blocks = vec![OrthogonalMatrix::identity(d); d];
        blocks[0] = horn_lift(&dec.q, &targets[0])?;
        for i in 1..=independent_count(d) {
            let u = horn_lift(&dec.r[i - 1], &targets[i])?;
            if !is_midpoint(i, d) {
                let pi: Vec<usize> = (0..d).map(|j| (j + i) % d).collect();
                blocks[d - i] = u.permuted(&pi);
            }
            blocks[i] = u;
        }
        Ok(Self { blocks })
    }

    /// Dense `d² × d²` orthogonal matrix in the product basis `|a b⟩ -> a d + b`.
    pub fn dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut u = DMatrix::zeros(d * d, d * d);
        for (s, b) in self.blocks.iter().enumerate() {
            for m in 0..d {
                for n in 0..d {
                    u[(lcs_index(d, s, m), lcs_index(d, s, n))] = b.matrix()[(m, n)];
                }
            }
        }
        u
    }

    /// Largest orthogonality defect among the blocks.
    pub fn defect(&self) -> f64 {
        self.blocks.iter().map(OrthogonalMatrix::defect).fold(0.0, f64::max)
    }
}

/// Two-qudit state, either block-diagonal in the LCS basis or dense.
#[derive(Debug, Clone, PartialEq)]
pub enum JointState {
    Block { d: usize, blocks: Vec<DMatrix<f64>> },
    Dense { d: usize, matrix: DMatrix<f64> },
}

impl JointState {
    pub fn dim(&self) -> usize {
        match self {
            Self::Block { d, .. } | Self::Dense { d, .. } => *d,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense { matrix, .. } => matrix.clone(),
            Self::Block { d, blocks } => {
                let d = *d;
                let mut m = DMatrix::zeros(d * d, d * d);
                for (s, b) in blocks.iter().enumerate() {
                    for i in 0..d {
                        for j in 0..d {
                            m[(lcs_index(d, s, i), lcs_index(d, s, j))] = b[(i, j)];
                        }
                    }
                }
                m
            }
        }
    }

    /// Block form; fails if the dense matrix couples different subspaces.
    pub fn to_block(&self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            Self::Block { blocks, .. } => Ok(blocks.clone()),
            Self::Dense { d, matrix } => {
                let d = *d;
                let mut owner = vec![0; d * d];
                for s in 0..d {
                    for m in 0..d {
                        owner[lcs_index(d, s, m)] = s;
                    }
                }
                for a in 0..d * d {
                    for b in 0..d * d {
                        if owner[a] != owner[b] && matrix[(a, b)] != 0.0 {
                            return Err(Error::InvalidArgument(
                                "state is not block diagonal in the LCS basis".into(),
                            ));
                        }
                    }
                }
                Ok((0..d)
                    .map(|s| {
                        DMatrix::from_fn(d, d, |i, j| matrix[(lcs_index(d, s, i), lcs_index(d, s, j))])
                    })
                    .collect())
            }
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Block { blocks, .. } => blocks.iter().map(|b| b.trace()).sum(),
            Self::Dense { matrix, .. } => matrix.trace(),
        }
    }

    /// Eigenvalues of the whole state.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Self::Block { blocks, .. } => blocks
                .iter()
                .flat_map(|b| SymmetricEigen::new(b.clone()).eigenvalues.iter().copied().collect::<Vec<_>>())
                .collect(),
            Self::Dense { matrix, .. } => SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect(),
        }
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.eigenvalues())
    }
}

/// Diagonal product state as a block-form joint state.
pub fn diagonal_state(joint: &JointDiagonal) -> JointState {
    let dec = decompose(joint);
    let blocks = (0..joint.dim())
        .map(|s| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(dec.subspace(s))))
        .collect();
    JointState::Block { d: joint.dim(), blocks }
}

/// `U (diag joint) Uᵀ` in block form.
pub fn apply_to_diagonal(blocks: &BlockUnitary, joint: &JointDiagonal) -> Result<JointState> {
    let d = blocks.dim();
    if joint.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: joint.dim() });
    }
    let dec = decompose(joint);
    let out = blocks
        .blocks
        .iter()
        .enumerate()
        .map(|(s, u)| u.conjugate(dec.subspace(s)))
        .collect();
    Ok(JointState::Block { d, blocks: out })
}

/// `U_AB (τ(β) ⊗ τ(β)) U_ABᵀ` in block form.
pub fn assemble_and_apply(
    blocks: &BlockUnitary,
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
) -> Result<JointState> {
    if spectrum.dim() != blocks.dim() {
        return Err(Error::DimensionMismatch { expected: blocks.dim(), found: spectrum.dim() });
    }
    let p = thermal_probs(spectrum, beta);
    apply_to_diagonal(blocks, &JointDiagonal::symmetric_product(&p)?)
}

/// Reduced states `Tr_B ρ` and `Tr_A ρ`.
pub fn partial_trace_marginals(state: &JointState) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = state.dim();
    match state {
        JointState::Block { blocks, .. } => {
            let mut ra = DMatrix::zeros(d, d);
            let mut rb = DMatrix::zeros(d, d);
            for (s, b) in blocks.iter().enumerate() {
                for m in 0..d {
                    ra[(m, m)] += b[(m, m)];
                    rb[((m + s) % d, (m + s) % d)] += b[(m, m)];
                }
            }
            (ra, rb)
        }
        JointState::Dense { matrix, .. } => {
            let ra = DMatrix::from_fn(d, d, |a, c| (0..d).map(|b| matrix[(a * d + b, c * d + b)]).sum());
            let rb = DMatrix::from_fn(d, d, |b, c| (0..d).map(|a| matrix[(a * d + b, a * d + c)]).sum());
            (ra, rb)
        }
    }
}

/// Header of [`StuReport::csv_row`].
pub const STU_CSV_HEADER: &str = "beta,beta_prime,deviation_A,deviation_B,delta_E,delta_I,pass";

/// Outcome of checking a candidate STU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StuReport {
    pub beta: InverseTemperature,
    pub beta_prime: InverseTemperature,
    pub tolerance: f64,
    pub marginal_a: Vec<f64>,
    pub marginal_b: Vec<f64>,
    pub target: Vec<f64>,
    /// `‖diag ρ_A − p(β′)‖∞`.
    pub deviation_a: f64,
    pub deviation_b: f64,
    /// `‖diag ρ_A − diag ρ_B‖∞`.
    pub symmetry_deviation: f64,
    /// Largest off-diagonal magnitude of either reduced state.
    pub offdiag_leakage: f64,
    /// Largest difference between block-form and dense-form marginals.
    pub dense_crosscheck: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    /// Invested energy from the marginals.
    pub delta_e: f64,
    /// Invested energy from the global state with `H_A + H_B`.
    pub delta_e_global: f64,
    pub delta_s_a: f64,
    pub delta_s_b: f64,
    pub delta_i: f64,
    pub pass: bool,
}

impl StuReport {
    /// Larger of the two marginal deviations.
    pub fn deviation(&self) -> f64 {
        self.deviation_a.max(self.deviation_b)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:e},{},{},{}",
            self.beta, self.beta_prime, self.deviation_a, self.deviation_b, self.delta_e, self.delta_i, self.pass
        )
    }
}

fn max_offdiag(m: &DMatrix<f64>) -> f64 {
    let mut v: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                v = v.max(m[(i, j)].abs());
            }
        }
    }
    v
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Applies `blocks` to `τ(β) ⊗ τ(β)` and checks that both marginals equal
/// `τ(β′)` within `tol`, together with unitarity bookkeeping.
pub fn verify_stu(
    blocks: &BlockUnitary,
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
    tol: f64,
) -> Result<StuReport> {
    let d = spectrum.dim();
    let p = thermal_probs(spectrum, beta);
    let target = thermal_probs(spectrum, beta_prime);
    let state = assemble_and_apply(blocks, spectrum, beta)?;
    let (ra, rb) = partial_trace_marginals(&state);
    let marginal_a: Vec<f64> = ra.diagonal().iter().copied().collect();
    let marginal_b: Vec<f64> = rb.diagonal().iter().copied().collect();

    let dense = JointState::Dense { d, matrix: state.to_dense() };
    let (da, db) = partial_trace_marginals(&dense);
    let dense_crosscheck = (da - &ra).amax().max((db - &rb).amax());

    let eig = state.eigenvalues();
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let entropy_before = 2.0 * entropy(&p);
    let entropy_after = entropy(&eig);

    let e0 = energy(&p, spectrum);
    let delta_e = energy(&marginal_a, spectrum) + energy(&marginal_b, spectrum) - 2.0 * e0;
    let en = spectrum.energies();
    let global_energy: f64 = match &state {
        JointState::Block { blocks, .. } => blocks
            .iter()
            .enumerate()
            .map(|(s, b)| (0..d).map(|m| b[(m, m)] * (en[m] + en[(m + s) % d])).sum::<f64>())
            .sum(),
        JointState::Dense { .. } => unreachable!("assemble_and_apply returns block form"),
    };
    let delta_e_global = global_energy - 2.0 * e0;
    let s0 = entropy(&p);
    let delta_s_a = entropy(&marginal_a) - s0;
    let delta_s_b = entropy(&marginal_b) - s0;

    let deviation_a = sup_diff(&marginal_a, &target);
    let deviation_b = sup_diff(&marginal_b, &target);
    let offdiag_leakage = max_offdiag(&ra).max(max_offdiag(&rb));
    let trace = state.trace();
    let pass = deviation_a <= tol
        && deviation_b <= tol
        && offdiag_leakage <= tol
        && dense_crosscheck <= tol
        && (entropy_after - entropy_before).abs() <= tol
        && (delta_e - delta_e_global).abs() <= tol
        && min_eigenvalue >= -1e-9
        && (trace - 1.0).abs() <= 1e-10
        && blocks.defect() <= 1e-10;
    Ok(StuReport {
        beta,
        beta_prime,
        tolerance: tol,
        symmetry_deviation: sup_diff(&marginal_a, &marginal_b),
        marginal_a,
        marginal_b,
        target,
        deviation_a,
        deviation_b,
        offdiag_leakage,
        dense_crosscheck,
        entropy_before,
        entropy_after,
        min_eigenvalue,
        trace,
        delta_e,
        delta_e_global,
        delta_s_a,
        delta_s_b,
        delta_i: delta_s_a + delta_s_b,
        pass,
    })
}

/// Thermal LCS decomposition `τ(β) ⊗ τ(β)`.
pub fn thermal_decomposition(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Result<LcsDecomposition> {
    let p = thermal_probs(spectrum, beta);
    Ok(decompose(&JointDiagonal::symmetric_product(&p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorize::OrthogonalMatrix;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    #[test]
    fn identity_blocks_leave_state() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let b = InverseTemperature::Finite(1.0);
        let r = verify_stu(&BlockUnitary::identity(3), &s, b, b, 1e-9).unwrap();
        assert!(r.pass);
        assert_eq!(r.delta_e, 0.0);
        assert_eq!(r.delta_i, 0.0);
    }

    #[test]
    fn rotation_at_infinite_temperature_is_trivial() {
        let s = spec(&[0.0, 1.0]);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let rot = OrthogonalMatrix::new(DMatrix::from_row_slice(2, 2, &[c, c, -c, c])).unwrap();
        let blocks = BlockUnitary::new(vec![rot, OrthogonalMatrix::identity(2)]).unwrap();
        let state = assemble_and_apply(&blocks, &s, InverseTemperature::ZERO).unwrap();
        let dense = state.to_dense();
        assert!((dense - DMatrix::identity(4, 4) * 0.25).amax() < 1e-15);
    }

    #[test]
    fn uniform_transform_reaches_uniform() {
        let s = spec(&[0.0, 1.0, 2.5]);
        let b = InverseTemperature::Finite(1.0);
        let dec = thermal_decomposition(&s, b).unwrap();
        let blocks = BlockUnitary::from_transform(&dec, &SymmetricTransform::uniform(3)).unwrap();
        let r = verify_stu(&blocks, &s, b, InverseTemperature::ZERO, 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        let p = thermal_probs(&s, b);
        assert!((r.delta_i - 2.0 * (3f64.ln() - entropy(&p))).abs() < 1e-12);
    }

    #[test]
    fn block_dense_round_trip() {
        let s = spec(&[0.0, 1.0, 2.0, 3.0]);
        let b = InverseTemperature::Finite(0.7);
        let dec = thermal_decomposition(&s, b).unwrap();
        let blocks = BlockUnitary::from_transform(&dec, &SymmetricTransform::uniform(4)).unwrap();
        let state = assemble_and_apply(&blocks, &s, b).unwrap();
        let dense = JointState::Dense { d: 4, matrix: state.to_dense() };
        let back = dense.to_block().unwrap();
        assert_eq!(JointState::Block { d: 4, blocks: back }, state);
        let u = blocks.dense();
        assert!((u.transpose() * &u - DMatrix::identity(16, 16)).amax() < 1e-12);
    }

    #[test]
    fn product_marginals_are_thermal() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let b = InverseTemperature::Finite(1.0);
        let p = thermal_probs(&s, b);
        let state = assemble_and_apply(&BlockUnitary::identity(3), &s, b).unwrap();
        let (ra, rb) = partial_trace_marginals(&state);
        for j in 0..3 {
            assert!((ra[(j, j)] - p[j]).abs() < 1e-15);
            assert!((rb[(j, j)] - p[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_block_rejects_coupling() {
        let mut m = DMatrix::identity(4, 4) * 0.25;
        m[(0, 1)] = 0.01;
        m[(1, 0)] = 0.01;
        assert!(JointState::Dense { d: 2, matrix: m }.to_block().is_err());
    }
}
