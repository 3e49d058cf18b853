//! Majorisation predicates, constructive Hardy–Littlewood–Pólya matrices,
//! Birkhoff decompositions and Schur–Horn lifts to orthogonal matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when building matrices.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance used when checking a finished construction.
pub const VERIFICATION_TOL: f64 = 1e-9;
/// Rounding guard applied to partial-sum comparisons.
pub const ROUNDING_GUARD: f64 = 1e-12;

/// Indices of `v` sorted by descending value, ties broken by index.
pub fn descending_order(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Copy of `v` sorted in descending order.
pub fn sorted_desc(v: &[f64]) -> Vec<f64> {
    descending_order(v).into_iter().map(|i| v[i]).collect()
}

fn check_pair(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch(y.len(), x.len()));
    }
    let (sy, sx): (f64, f64) = (y.iter().sum(), x.iter().sum());
    if (sy - sx).abs() > 1e-9 {
        return Err(Error::SumMismatch(sy, sx));
    }
    Ok(())
}

/// `y ≻ x`: every partial sum of the descending `x` is at most that of `y`.
pub fn majorizes(y: &[f64], x: &[f64]) -> Result<bool> {
    majorizes_tol(y, x, ROUNDING_GUARD)
}

/// [`majorizes`] with an explicit slack on each partial-sum comparison.
pub fn majorizes_tol(y: &[f64], x: &[f64], tol: f64) -> Result<bool> {
    check_pair(y, x)?;
    Ok(majorization_slack(y, x) >= -tol)
}

/// Smallest value of `sum_{i<k} y↓_i - sum_{i<k} x↓_i` over `k`.
///
/// Nonnegative exactly when `y ≻ x` (given equal totals).
pub fn majorization_slack(y: &[f64], x: &[f64]) -> f64 {
    let ys = sorted_desc(y);
    let xs = sorted_desc(x);
    let (mut cy, mut cx) = (0.0, 0.0);
    let mut slack = f64::INFINITY;
    for (a, b) in ys.iter().zip(&xs) {
        cy += a;
        cx += b;
        slack = slack.min(cy - cx);
    }
    slack
}

/// Square nonnegative matrix with unit row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochasticMatrix {
    m: DMatrix<f64>,
}

impl DoublyStochasticMatrix {
    /// Validates row/column sums within `1e-10`; entries in `[-1e-12, 1+1e-12]`
    /// are clamped to `[0, 1]`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tol(m, CONSTRUCTION_TOL)
    }

    pub fn with_tol(mut m: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotDoublyStochastic(format!(
                "shape {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for v in m.iter_mut() {
            if !v.is_finite() || *v < -ROUNDING_GUARD || *v > 1.0 + ROUNDING_GUARD {
                return Err(Error::NotDoublyStochastic(format!("entry {v} outside [0,1]")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        let n = m.nrows();
        for i in 0..n {
            let r: f64 = m.row(i).sum();
            let c: f64 = m.column(i).sum();
            if (r - 1.0).abs() > tol || (c - 1.0).abs() > tol {
                return Err(Error::NotDoublyStochastic(format!(
                    "row {i} sums to {r}, column {i} sums to {c}"
                )));
            }
        }
        Ok(Self { m })
    }

    pub(crate) fn from_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn identity(d: usize) -> Self {
        Self { m: DMatrix::identity(d, d) }
    }

    /// Permutation matrix `P` with `P e_j = e_{perm[j]}`.
    pub fn permutation(perm: &[usize]) -> Self {
        Self { m: permutation_matrix(perm) }
    }

    /// Convex mixture `sum_k w_k M_k` (weights are not renormalized).
    pub fn mixture(terms: &[(f64, &DoublyStochasticMatrix)]) -> Result<Self> {
        let d = terms
            .first()
            .map(|(_, m)| m.dim())
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let mut acc = DMatrix::zeros(d, d);
        for (w, m) in terms {
            if m.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
            }
            acc += &m.m * *w;
        }
        Self::new(acc)
    }

    /// Uniform matrix `J/d`, the equal-weight mixture of all cyclic shifts.
    pub fn uniform(d: usize) -> Self {
        Self { m: DMatrix::from_element(d, d, 1.0 / d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.m, v)
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.m)
    }
}

impl Serialize for DoublyStochasticMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson { rows: self.to_rows(), tolerance: CONSTRUCTION_TOL }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DoublyStochasticMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        let m = from_rows(&j.rows).map_err(serde::de::Error::custom)?;
        Self::with_tol(m, j.tolerance.max(CONSTRUCTION_TOL)).map_err(serde::de::Error::custom)
    }
}

/// Row-major matrix with the tolerance it was validated at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: Vec<Vec<f64>>,
    pub tolerance: f64,
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Permutation matrix with `P e_j = e_{perm[j]}`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let d = perm.len();
    let mut m = DMatrix::zeros(d, d);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = 1.0;
    }
    m
}

/// One T-transform `t I + (1 - t) Swap(j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTransform {
    pub j: usize,
    pub k: usize,
    pub t: f64,
}

impl TTransform {
    pub fn matrix(&self, d: usize) -> DMatrix<f64> {
        let mut m = DMatrix::identity(d, d);
        m[(self.j, self.j)] = self.t;
        m[(self.k, self.k)] = self.t;
        m[(self.j, self.k)] = 1.0 - self.t;
        m[(self.k, self.j)] = 1.0 - self.t;
        m
    }
}

/// Ordered T-transforms followed by a relabelling permutation.
///
/// The full matrix is `P_relabel · T_m ⋯ T_1`, with each `T` acting on the
/// original indices of the source vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTransformSequence {
    pub steps: Vec<TTransform>,
    pub relabel: Vec<usize>,
}

impl TTransformSequence {
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.relabel.len();
        let mut m = DMatrix::identity(d, d);
        for s in &self.steps {
            m = s.matrix(d) * m;
        }
        permutation_matrix(&self.relabel) * m
    }
}

/// Plans the HLP reduction from `y` to `x` in the sorted frame of `y`.
fn hlp_plan(y: &[f64], x: &[f64]) -> Result<TTransformSequence> {
    check_pair(y, x)?;
    let scale = y.iter().chain(x).fold(1.0f64, |a, b| a.max(b.abs()));
    if majorization_slack(y, x) < -CONSTRUCTION_TOL * scale {
        return Err(Error::NotMajorised);
    }
    let d = y.len();
    let oy = descending_order(y);
    let ox = descending_order(x);
    let mut ys: Vec<f64> = oy.iter().map(|&i| y[i]).collect();
    let xs: Vec<f64> = ox.iter().map(|&i| x[i]).collect();
    let eps = 1e-15 * scale;
    let mut steps = Vec::new();
    for _ in 0..d {
        // Largest position where the source still exceeds the target, then
        // the first later position where it falls short.
        let Some(j) = (0..d).rev().find(|&s| ys[s] - xs[s] > eps) else {
            break;
        };
        let Some(k) = (j + 1..d).find(|&s| xs[s] - ys[s] > eps) else {
            break;
        };
        let up = ys[j] - xs[j];
        let down = xs[k] - ys[k];
        let delta = up.min(down);
        let t = (1.0 - delta / (ys[j] - ys[k])).clamp(0.0, 1.0);
        if up <= down {
            ys[j] = xs[j];
            ys[k] += up;
        } else {
            ys[j] -= down;
            ys[k] = xs[k];
        }
        steps.push(TTransform { j: oy[j], k: oy[k], t });
    }
    let mut relabel = vec![0; d];
    for s in 0..d {
        relabel[oy[s]] = ox[s];
    }
    Ok(TTransformSequence { steps, relabel })
}

/// Doubly stochastic `M` with `M y = x`, built from at most `d - 1` T-transforms.
pub fn hlp_construct(y: &[f64], x: &[f64]) -> Result<(DoublyStochasticMatrix, TTransformSequence)> {
    let seq = hlp_plan(y, x)?;
    let m = seq.matrix();
    Ok((DoublyStochasticMatrix::from_unchecked(m), seq))
}

/// Greedy Birkhoff–von Neumann decomposition `M = sum_k w_k P_k`.
///
/// Each step extracts the permutation whose smallest supported entry is
/// largest (a bottleneck matching), so at least one entry is zeroed per step.
pub fn birkhoff_decompose(m: &DoublyStochasticMatrix) -> Result<Vec<(f64, Vec<usize>)>> {
    let d = m.dim();
    let mut residual = m.matrix().clone();
    let zero = 1e-13;
    let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
    for _ in 0..d * d + 1 {
        let remaining: f64 = residual.row(0).sum();
        if remaining <= zero || residual.max() <= zero {
            break;
        }
        let perm = bottleneck_matching(&residual, zero).ok_or_else(|| {
            Error::NotDoublyStochastic("support admits no perfect matching".into())
        })?;
        let w = perm.iter().enumerate().map(|(j, &i)| residual[(i, j)]).fold(f64::INFINITY, f64::min);
        for (j, &i) in perm.iter().enumerate() {
            residual[(i, j)] -= w;
            if residual[(i, j)] <= zero {
                residual[(i, j)] = 0.0;
            }
        }
        match terms.iter_mut().find(|(_, p)| *p == perm) {
            Some(t) => t.0 += w,
            None => terms.push((w, perm)),
        }
    }
    let mut recon = DMatrix::zeros(d, d);
    for (w, p) in &terms {
        recon += permutation_matrix(p) * *w;
    }
    let err = (recon - m.matrix()).amax();
    if err > VERIFICATION_TOL {
        return Err(Error::NotDoublyStochastic(format!("reconstruction error {err:e}")));
    }
    Ok(terms)
}

/// Perfect matching column -> row maximizing the smallest matched entry.
fn bottleneck_matching(a: &DMatrix<f64>, zero: f64) -> Option<Vec<usize>> {
    let mut levels: Vec<f64> = a.iter().copied().filter(|&v| v > zero).collect();
    levels.sort_by(|x, y| y.total_cmp(x));
    levels.dedup();
    // Matching exists for every threshold at or below the answer; binary search.
    let (mut lo, mut hi) = (0usize, levels.len());
    let mut best = None;
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(a, levels[mid]) {
            Some(p) => {
                best = Some(p);
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    if best.is_none() && lo < levels.len() {
        best = perfect_matching(a, levels[lo]);
    }
    best
}

/// Kuhn's augmenting-path matching on entries `>= threshold`.
fn perfect_matching(a: &DMatrix<f64>, threshold: f64) -> Option<Vec<usize>> {
    let d = a.nrows();
    let mut row_of_col = vec![usize::MAX; d];
    let mut col_of_row = vec![usize::MAX; d];
    fn augment(
        a: &DMatrix<f64>,
        threshold: f64,
        c: usize,
        seen: &mut [bool],
        row_of_col: &mut [usize],
        col_of_row: &mut [usize],
    ) -> bool {
        for r in 0..a.nrows() {
            if a[(r, c)] >= threshold && !seen[r] {
                seen[r] = true;
                if col_of_row[r] == usize::MAX
                    || augment(a, threshold, col_of_row[r], seen, row_of_col, col_of_row)
                {
                    col_of_row[r] = c;
                    row_of_col[c] = r;
                    return true;
                }
            }
        }
        false
    }
    for c in 0..d {
        let mut seen = vec![false; d];
        if !augment(a, threshold, c, &mut seen, &mut row_of_col, &mut col_of_row) {
            return None;
        }
    }
    Some(row_of_col)
}

/// Real orthogonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    u: DMatrix<f64>,
}

impl OrthogonalMatrix {
    /// Validates `UᵀU = I` within `1e-10`.
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        let dev = orthogonality_defect(&u);
        if !u.is_square() || dev > CONSTRUCTION_TOL {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Self { u })
    }

    pub(crate) fn from_unchecked(u: DMatrix<f64>) -> Self {
        Self { u }
    }

    pub fn identity(d: usize) -> Self {
        Self { u: DMatrix::identity(d, d) }
    }

    pub fn permutation(perm: &[usize]) -> Self {
        Self { u: permutation_matrix(perm) }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `max |UᵀU - I|`.
    pub fn defect(&self) -> f64 {
        orthogonality_defect(&self.u)
    }

    /// Entrywise square `|U|²`, a unistochastic matrix.
    pub fn unistochastic(&self) -> DoublyStochasticMatrix {
        DoublyStochasticMatrix::from_unchecked(self.u.map(|v| v * v))
    }

    /// Diagonal of `U diag(y) Uᵀ`.
    pub fn conjugate_diagonal(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|k| self.u[(i, k)] * self.u[(i, k)] * y[k]).sum())
            .collect()
    }

    /// `U diag(y) Uᵀ`.
    pub fn conjugate(&self, y: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut scaled = self.u.clone();
        for k in 0..d {
            for i in 0..d {
                scaled[(i, k)] *= y[k];
            }
        }
        scaled * self.u.transpose()
    }

    /// `P U P⁻¹` for a permutation `P e_j = e_{perm[j]}`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = permutation_matrix(perm);
        Self { u: &p * &self.u * p.transpose() }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.u)
    }
}

impl Serialize for OrthogonalMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson { rows: self.to_rows(), tolerance: CONSTRUCTION_TOL }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrthogonalMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        let m = from_rows(&j.rows).map_err(serde::de::Error::custom)?;
        Self::new(m).map_err(serde::de::Error::custom)
    }
}

fn orthogonality_defect(u: &DMatrix<f64>) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (u.transpose() * u - DMatrix::identity(u.nrows(), u.ncols())).amax()
}

/// Orthogonal `U` with `diag(U diag(y) Uᵀ) = x`.
///
/// Follows the T-transform plan of [`hlp_construct`]; each step becomes a
/// plane rotation whose angle is solved on the current (no longer diagonal)
/// matrix so that the pivot entry lands exactly on the planned value.
pub fn horn_lift(y: &[f64], x: &[f64]) -> Result<OrthogonalMatrix> {
    let plan = hlp_plan(y, x)?;
    let d = y.len();
    let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(y));
    let mut u = DMatrix::identity(d, d);
    for step in &plan.steps {
        let (j, k) = (step.j, step.k);
        let target = step.t * a[(j, j)] + (1.0 - step.t) * a[(k, k)];
        let (c, s) = rotation_for(a[(j, j)], a[(k, k)], a[(j, k)], target);
        let mut g = DMatrix::identity(d, d);
        g[(j, j)] = c;
        g[(j, k)] = s;
        g[(k, j)] = -s;
        g[(k, k)] = c;
        a = &g * a * g.transpose();
        u = g * u;
    }
    let u = permutation_matrix(&plan.relabel) * u;
    Ok(OrthogonalMatrix::from_unchecked(u))
}

/// Cosine and sine of the rotation in the `(j, k)` plane sending the `(j, j)`
/// entry of `[[ajj, ajk], [ajk, akk]]` to `target`.
fn rotation_for(ajj: f64, akk: f64, ajk: f64, target: f64) -> (f64, f64) {
    let mean = 0.5 * (ajj + akk);
    let half = 0.5 * (ajj - akk);
    let r = half.hypot(ajk);
    if r == 0.0 {
        return (1.0, 0.0);
    }
    let phi = ajk.atan2(half);
    let v = ((target - mean) / r).clamp(-1.0, 1.0);
    let theta = 0.5 * (phi + v.acos());
    (theta.cos(), theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&[1.0, 0.0, 0.0], &[1.0 / 3.0; 3]).unwrap());
        assert!(majorizes(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3]).unwrap());
        assert!(majorizes(&[0.5, 0.3, 0.2], &[0.4, 0.35, 0.25]).unwrap());
        assert!(!majorizes(&[0.4, 0.35, 0.25], &[0.5, 0.3, 0.2]).unwrap());
        assert_eq!(majorizes(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch(1, 2)));
        assert!(matches!(majorizes(&[1.0, 0.0], &[0.5, 0.4]), Err(Error::SumMismatch(..))));
    }

    #[test]
    fn hlp_two_level() {
        let (m, seq) = hlp_construct(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(seq.steps.len(), 1);
        assert!((seq.steps[0].t - 0.5).abs() < 1e-15);
        assert!(m.matrix().iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn hlp_identity_and_general() {
        let y = [0.3, 0.5, 0.2];
        let (m, seq) = hlp_construct(&y, &y).unwrap();
        assert!(seq.steps.is_empty());
        assert_eq!(m.matrix(), &DMatrix::identity(3, 3));
        let (m, seq) = hlp_construct(&[0.6, 0.3, 0.1], &[0.4, 0.35, 0.25]).unwrap();
        assert!(seq.steps.len() <= 2);
        assert!(close(&m.apply(&[0.6, 0.3, 0.1]), &[0.4, 0.35, 0.25], 1e-12));
        assert!(DoublyStochasticMatrix::new(m.into_matrix()).is_ok());
    }

    #[test]
    fn hlp_unsorted_inputs() {
        let y = [0.1, 0.6, 0.3];
        let x = [0.35, 0.25, 0.4];
        let (m, _) = hlp_construct(&y, &x).unwrap();
        assert!(close(&m.apply(&y), &x, 1e-12));
        assert_eq!(hlp_construct(&x, &y).unwrap_err(), Error::NotMajorised);
    }

    #[test]
    fn birkhoff_examples() {
        let id = DoublyStochasticMatrix::identity(3);
        assert_eq!(birkhoff_decompose(&id).unwrap(), vec![(1.0, vec![0, 1, 2])]);
        let half = DoublyStochasticMatrix::mixture(&[
            (0.5, &DoublyStochasticMatrix::identity(3)),
            (0.5, &DoublyStochasticMatrix::permutation(&[1, 2, 0])),
        ])
        .unwrap();
        let mut terms = birkhoff_decompose(&half).unwrap();
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        assert_eq!(terms.len(), 2);
        assert!((terms[0].0 - 0.5).abs() < 1e-15 && terms[0].1 == vec![0, 1, 2]);
        assert!((terms[1].0 - 0.5).abs() < 1e-15 && terms[1].1 == vec![1, 2, 0]);
    }

    #[test]
    fn horn_lift_examples() {
        let u = horn_lift(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u.matrix()[(0, 0)] - c).abs() < 1e-15);
        assert!((u.matrix()[(0, 1)].abs() - c).abs() < 1e-15);
        let y = [0.6, 0.3, 0.1];
        assert_eq!(horn_lift(&y, &y).unwrap().matrix(), &DMatrix::identity(3, 3));
        let u = horn_lift(&y, &[1.0 / 3.0; 3]).unwrap();
        assert!(close(&u.conjugate_diagonal(&y), &[1.0 / 3.0; 3], 1e-12));
        assert!(u.defect() < 1e-12);
        assert_eq!(horn_lift(&[1.0 / 3.0; 3], &y).unwrap_err(), Error::NotMajorised);
    }

    #[test]
    fn orthogonal_validation() {
        assert!(OrthogonalMatrix::new(DMatrix::from_element(2, 2, 0.5)).is_err());
        let u = OrthogonalMatrix::permutation(&[2, 0, 1]);
        assert!(u.defect() == 0.0);
        let back: OrthogonalMatrix =
            serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn doubly_stochastic_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[0.6, 0.5, 0.4, 0.5]);
        assert!(DoublyStochasticMatrix::new(bad).is_err());
        let tiny = DMatrix::from_row_slice(2, 2, &[1.0 + 5e-13, -5e-13, -5e-13, 1.0 + 5e-13]);
        let m = DoublyStochasticMatrix::new(tiny).unwrap();
        assert!(m.matrix().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
