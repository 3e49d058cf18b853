//! Locally classical subspace (LCS) decomposition of a diagonal joint state.
//!
//! Subspace `H_q` is spanned by `|j, j⟩` and subspace `H_{r_i}` by
//! `|j, j+i⟩`, indices taken modulo `d`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::majorize::{permutation_matrix, DoublyStochasticMatrix};

/// Diagonal `p_{ij}` of a two-qudit state, row-major in the first index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDiagonal {
    d: usize,
    entries: Vec<f64>,
}

impl JointDiagonal {
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: entries.len() });
        }
        if entries.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("joint entries must be nonnegative".into()));
        }
        let s: f64 = entries.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::SumMismatch(s, 1.0));
        }
        Ok(Self { d, entries })
    }

    /// Product `p_{ij} = pa_i pb_j`.
    pub fn product(pa: &[f64], pb: &[f64]) -> Result<Self> {
        if pa.len() != pb.len() {
            return Err(Error::LengthMismatch(pa.len(), pb.len()));
        }
        let d = pa.len();
        let entries = (0..d * d).map(|n| pa[n / d] * pb[n % d]).collect();
        Self::new(d, entries)
    }

    /// Symmetric product `p_{ij} = p_i p_j`.
    pub fn symmetric_product(p: &[f64]) -> Result<Self> {
        Self::product(p, p)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i % self.d) * self.d + j % self.d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Power of the cyclic shift `Π e_j = e_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicPermutation {
    pub d: usize,
    pub power: usize,
}

impl CyclicPermutation {
    pub fn new(d: usize, power: isize) -> Self {
        Self { d, power: power.rem_euclid(d as isize) as usize }
    }

    /// Image of each basis index, `Π^k e_j = e_{j+k}`.
    pub fn perm(&self) -> Vec<usize> {
        (0..self.d).map(|j| (j + self.power) % self.d).collect()
    }

    /// Dense matrix with entries `δ_{i, j+k}`.
    pub fn matrix(&self) -> DMatrix<f64> {
        permutation_matrix(&self.perm())
    }

    pub fn inverse(&self) -> Self {
        Self::new(self.d, -(self.power as isize))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        shift(v, self.power as isize)
    }
}

/// `Π^k v`, i.e. `(Π^k v)_j = v_{j-k}`.
pub fn shift(v: &[f64], k: isize) -> Vec<f64> {
    let d = v.len() as isize;
    (0..d).map(|j| v[(j - k).rem_euclid(d) as usize]).collect()
}

/// Weight `(⌊2i/d⌋ + 1)^{-1}` of subspace `i` in the equal-marginal form.
pub fn midpoint_weight(i: usize, d: usize) -> f64 {
    1.0 / ((2 * i / d) as f64 + 1.0)
}

/// Number `k` of independent off-diagonal subspaces, `⌊d/2⌋`.
pub fn independent_count(d: usize) -> usize {
    d / 2
}

/// Whether `i` is the self-partnered midpoint `d/2` of an even dimension.
pub fn is_midpoint(i: usize, d: usize) -> bool {
    d % 2 == 0 && 2 * i == d
}

/// Components `q` and `r_1..r_{d-1}` of a joint diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LcsDecomposition {
    pub d: usize,
    pub q: Vec<f64>,
    /// `r[i - 1]` holds `r_i`.
    pub r: Vec<Vec<f64>>,
    pub symmetric: bool,
}

impl LcsDecomposition {
    /// Subspace vector by index: `0` is `q`, `i >= 1` is `r_i`.
    pub fn subspace(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.q
        } else {
            &self.r[i - 1]
        }
    }

    pub fn norm_q(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn norm_r(&self, i: usize) -> f64 {
        self.r[i - 1].iter().sum()
    }

    /// Midpoint flag for each `r_i`.
    pub fn midpoints(&self) -> Vec<bool> {
        (1..self.d).map(|i| is_midpoint(i, self.d)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    d: usize,
    q: Vec<f64>,
    r: Vec<Vec<f64>>,
    norms: NormsJson,
}

#[derive(Serialize, Deserialize)]
struct NormsJson {
    q: f64,
    r: Vec<f64>,
}

impl Serialize for LcsDecomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionJson {
            d: self.d,
            q: self.q.clone(),
            r: self.r.clone(),
            norms: NormsJson {
                q: self.norm_q(),
                r: (1..self.d).map(|i| self.norm_r(i)).collect(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LcsDecomposition {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let j = DecompositionJson::deserialize(de)?;
        if j.q.len() != j.d || j.r.len() + 1 != j.d || j.r.iter().any(|v| v.len() != j.d) {
            return Err(serde::de::Error::custom("inconsistent decomposition dimensions"));
        }
        let symmetric = is_symmetric(&j.r, j.d);
        Ok(Self { d: j.d, q: j.q, r: j.r, symmetric })
    }
}

fn is_symmetric(r: &[Vec<f64>], d: usize) -> bool {
    (1..d).all(|i| {
        let rotated = shift(&r[i - 1], i as isize);
        rotated.iter().zip(&r[d - i - 1]).all(|(a, b)| (a - b).abs() <= 1e-12)
    })
}

/// `q_j = p_{jj}`, `(r_i)_j = p_{j, j+i}`.
pub fn decompose(joint: &JointDiagonal) -> LcsDecomposition {
    let d = joint.dim();
    let q = (0..d).map(|j| joint.get(j, j)).collect();
    let r: Vec<Vec<f64>> =
        (1..d).map(|i| (0..d).map(|j| joint.get(j, j + i)).collect()).collect();
    let symmetric = is_symmetric(&r, d);
    LcsDecomposition { d, q, r, symmetric }
}

/// `pA = q + sum_i r_i` and `pB = q + sum_i Π^i r_i`.
pub fn reconstruct_marginals(dec: &LcsDecomposition) -> (Vec<f64>, Vec<f64>) {
    let mut pa = dec.q.clone();
    let mut pb = dec.q.clone();
    for i in 1..dec.d {
        let r = &dec.r[i - 1];
        let shifted = shift(r, i as isize);
        for j in 0..dec.d {
            pa[j] += r[j];
            pb[j] += shifted[j];
        }
    }
    (pa, pb)
}

/// Family of permutations `P_0..P_{d-1}` whose table `Γ_{ij} = P_i(j)` is a
/// Latin square; subspace `i` is spanned by `|j, P_i(j)⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatinSquareLcs {
    pub perms: Vec<Vec<usize>>,
}

/// Validates the Latin-square property of a permutation family.
pub fn latin_square_lcs(perms: Vec<Vec<usize>>) -> Result<LatinSquareLcs> {
    let d = perms.len();
    for (i, p) in perms.iter().enumerate() {
        if p.len() != d {
            return Err(Error::NotLatinSquare(format!("row {i} has length {}", p.len())));
        }
        let mut seen = vec![false; d];
        for &v in p {
            if v >= d || std::mem::replace(&mut seen[v], true) {
                return Err(Error::NotLatinSquare(format!("row {i} is not a permutation")));
            }
        }
    }
    for j in 0..d {
        let mut seen = vec![false; d];
        for (i, p) in perms.iter().enumerate() {
            if std::mem::replace(&mut seen[p[j]], true) {
                return Err(Error::NotLatinSquare(format!(
                    "symbol {} repeats in column {j} (row {i})",
                    p[j]
                )));
            }
        }
    }
    Ok(LatinSquareLcs { perms })
}

impl LatinSquareLcs {
    /// The cyclic family `P_i(j) = j + i`, i.e. `P_i = (Π^{-1})^i` as matrices.
    pub fn cyclic(d: usize) -> Self {
        Self { perms: (0..d).map(|i| (0..d).map(|j| (j + i) % d).collect()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.perms.len()
    }

    /// `(r̃_i)_j = p_{j, P_i(j)}`.
    pub fn components(&self, joint: &JointDiagonal) -> Vec<Vec<f64>> {
        self.perms
            .iter()
            .map(|p| p.iter().enumerate().map(|(j, &pj)| joint.get(j, pj)).collect())
            .collect()
    }
}

/// Marginals after applying `M_i` on each Latin-square subspace:
/// `pA = sum_i M_i r̃_i`, `pB = sum_i P_i^{-1} M_i r̃_i`.
pub fn general_marginals(
    lcs: &LatinSquareLcs,
    matrices: &[DoublyStochasticMatrix],
    joint: &JointDiagonal,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = lcs.dim();
    if joint.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: joint.dim() });
    }
    if matrices.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: matrices.len() });
    }
    let mut pa = vec![0.0; d];
    let mut pb = vec![0.0; d];
    for ((perm, m), comp) in lcs.perms.iter().zip(matrices).zip(lcs.components(joint)) {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
        let moved = m.apply(&comp);
        for j in 0..d {
            pa[j] += moved[j];
            pb[perm[j]] += moved[j];
        }
    }
    Ok((pa, pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{thermal_probs, EnergySpectrum, InverseTemperature};

    fn thermal(e: &[f64], b: f64) -> Vec<f64> {
        let s = EnergySpectrum::new(e.to_vec()).unwrap();
        thermal_probs(&s, InverseTemperature::Finite(b))
    }

    #[test]
    fn shift_convention() {
        let pi = CyclicPermutation::new(3, 1);
        assert_eq!(pi.perm(), vec![1, 2, 0]);
        assert_eq!(pi.apply(&[1.0, 2.0, 3.0]), vec![3.0, 1.0, 2.0]);
        let m = pi.matrix();
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(pi.inverse().apply(&pi.apply(&[1.0, 2.0, 3.0])), vec![1.0, 2.0, 3.0]);
        let cube = m.clone() * m.clone() * m;
        assert_eq!(cube, DMatrix::identity(3, 3));
    }

    #[test]
    fn uniform_joint() {
        let j = JointDiagonal::new(3, vec![1.0 / 9.0; 9]).unwrap();
        let dec = decompose(&j);
        for v in std::iter::once(&dec.q).chain(&dec.r) {
            assert!(v.iter().all(|x| (x - 1.0 / 9.0).abs() < 1e-16));
        }
    }

    #[test]
    fn product_components() {
        let p = [0.5, 0.3, 0.2];
        let dec = decompose(&JointDiagonal::symmetric_product(&p).unwrap());
        assert_eq!(dec.q, vec![0.5 * 0.5, 0.3 * 0.3, 0.2 * 0.2]);
        assert_eq!(dec.r[0], vec![0.5 * 0.3, 0.3 * 0.2, 0.2 * 0.5]);
        assert_eq!(dec.r[1], vec![0.5 * 0.2, 0.3 * 0.5, 0.2 * 0.3]);
        assert!(dec.symmetric);
    }

    #[test]
    fn norms_at_beta_one() {
        let p = thermal(&[0.0, 1.0, 2.0], 1.0);
        let dec = decompose(&JointDiagonal::symmetric_product(&p).unwrap());
        let oracle_q: f64 = p.iter().map(|x| x * x).sum();
        let oracle_r = p[0] * p[1] + p[1] * p[2] + p[2] * p[0];
        assert!((dec.norm_q() - oracle_q).abs() < 1e-15);
        assert!((dec.norm_q() - 0.5105430578904046).abs() < 1e-14);
        assert!((dec.norm_r(1) - 0.2447284710547976).abs() < 1e-14);
        assert!((dec.norm_q() + 2.0 * dec.norm_r(1) - 1.0).abs() < 1e-14);
        assert!((dec.norm_r(1) - oracle_r).abs() < 1e-15);
        assert_eq!(dec.norm_r(1), dec.norm_r(2));
    }

    #[test]
    fn reconstruct_d4() {
        let p = thermal(&[0.0, 1.0, 2.0, 3.0], 1.0);
        let dec = decompose(&JointDiagonal::symmetric_product(&p).unwrap());
        let (pa, pb) = reconstruct_marginals(&dec);
        for j in 0..4 {
            assert!((pa[j] - p[j]).abs() < 1e-14);
            assert!((pb[j] - p[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn asymmetric_product_marginals() {
        let pa = [0.6, 0.3, 0.1];
        let pb = [0.2, 0.5, 0.3];
        let dec = decompose(&JointDiagonal::product(&pa, &pb).unwrap());
        assert!(!dec.symmetric);
        let (ra, rb) = reconstruct_marginals(&dec);
        for j in 0..3 {
            assert!((ra[j] - pa[j]).abs() < 1e-15);
            assert!((rb[j] - pb[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn cyclic_latin_square_matches_decomposition() {
        let p = [0.5, 0.3, 0.2];
        let joint = JointDiagonal::product(&p, &[0.1, 0.6, 0.3]).unwrap();
        let lcs = LatinSquareLcs::cyclic(3);
        let ids = vec![DoublyStochasticMatrix::identity(3); 3];
        let (pa, pb) = general_marginals(&lcs, &ids, &joint).unwrap();
        let (ra, rb) = reconstruct_marginals(&decompose(&joint));
        for j in 0..3 {
            assert_eq!(pa[j], ra[j]);
            assert!((pb[j] - rb[j]).abs() < 1e-16);
        }
    }

    #[test]
    fn latin_square_validation() {
        assert!(latin_square_lcs(vec![vec![0, 1, 2], vec![0, 1, 2], vec![1, 2, 0]]).is_err());
        assert!(latin_square_lcs(vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]]).is_ok());
        assert!(latin_square_lcs(vec![vec![0, 0, 2], vec![2, 0, 1], vec![1, 2, 0]]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let dec = decompose(&JointDiagonal::symmetric_product(&[0.5, 0.3, 0.2]).unwrap());
        let json = serde_json::to_value(&dec).unwrap();
        assert_eq!(json["d"], 3);
        assert!(json["norms"]["r"].as_array().unwrap().len() == 2);
        let back: LcsDecomposition = serde_json::from_value(json).unwrap();
        assert_eq!(back, dec);
    }

    #[test]
    fn midpoint_weights() {
        assert_eq!(midpoint_weight(1, 3), 1.0);
        assert_eq!(midpoint_weight(1, 4), 1.0);
        assert_eq!(midpoint_weight(2, 4), 0.5);
        assert!(is_midpoint(2, 4) && !is_midpoint(1, 4) && !is_midpoint(1, 3));
        assert_eq!(independent_count(5), 2);
    }
}
