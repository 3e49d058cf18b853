//! Geometric construction: reduced coordinates, the polytope of reachable
//! equal marginals, and STUs assembled from explicitly reached vertices.
//!
//! In reduced coordinates `x_n = (n+1) p_{n+1} − sum_{i<=n} p_i` the uniform
//! distribution sits at the origin and the thermal curve runs inside the
//! negative orthant. The points
//! `v_j = (0, ..., 0, x_j(β), ..., x_{d-2}(β))` form a simplex containing
//! every `p(β′)` with `β′ <= β`. Reaching each `v_j` with an equal-marginal
//! transform therefore reaches every hotter thermal state by mixing.

mod convexity;
mod d5;

pub use convexity::{
    convexity_certify, cross_products_d4, ratio_slopes, swap_partner_d3, ConvexityPoint, ConvexityReport,
    CrossProductsD4,
};
pub use d5::{d5_region_check, D5Conditions, D5Report, D5Vertex, VertexRoute};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::block_unitary::{thermal_decomposition, BlockUnitary, SymmetricTransform};
use crate::error::{Error, Result};
use crate::lcs::{independent_count, midpoint_weight, shift, LcsDecomposition};
use crate::lp::phase1;
use crate::majorize::{DoublyStochasticMatrix, ROUNDING_GUARD};
use crate::spectra::{thermal_probs, EnergySpectrum, InverseTemperature};

/// Largest vertex enumeration performed without an explicit override.
pub const EXHAUSTIVE_LIMIT: usize = 13_824;

/// Reduced coordinates `x_0..x_{d-2}` of a probability vector.
pub fn to_coords(p: &[f64]) -> Vec<f64> {
    let mut partial = 0.0;
    (0..p.len().saturating_sub(1))
        .map(|n| {
            partial += p[n];
            (n + 1) as f64 * p[n + 1] - partial
        })
        .collect()
}

/// Probability vector with the given reduced coordinates.
///
/// Uses the cumulative sums `S_n = ((n+1) S_{n+1} − x_n) / (n+2)`, `S_{d-1} = 1`.
pub fn from_coords(x: &[f64]) -> Result<Vec<f64>> {
    let d = x.len() + 1;
    let mut s = vec![0.0; d];
    s[d - 1] = 1.0;
    for n in (0..d - 1).rev() {
        s[n] = ((n + 1) as f64 * s[n + 1] - x[n]) / (n + 2) as f64;
    }
    let p: Vec<f64> = (0..d).map(|i| if i == 0 { s[0] } else { s[i] - s[i - 1] }).collect();
    if let Some(v) = p.iter().find(|&&v| v < -ROUNDING_GUARD) {
        return Err(Error::InvalidPreimage(format!("negative probability {v:e}")));
    }
    Ok(p)
}

/// Reduced coordinates of `p(β)`, evaluated as
/// `x_n = Z⁻¹ sum_{i<=n} e^{−βE_i} expm1(−β (E_{n+1} − E_i))` so that they
/// stay accurate near the origin. Any real `beta` is accepted.
pub fn thermal_coords_at(spectrum: &EnergySpectrum, beta: f64) -> Vec<f64> {
    let e = spectrum.energies();
    let w: Vec<f64> = e.iter().map(|x| (-beta * x).exp()).collect();
    let z: f64 = w.iter().sum();
    (0..e.len() - 1)
        .map(|n| (0..=n).map(|i| w[i] * (-beta * (e[n + 1] - e[i])).exp_m1()).sum::<f64>() / z)
        .collect()
}

/// [`thermal_coords_at`] with the ground-state limit.
pub fn thermal_coords(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Vec<f64> {
    match beta {
        InverseTemperature::Finite(b) => thermal_coords_at(spectrum, b),
        InverseTemperature::Infinite => to_coords(&thermal_probs(spectrum, beta)),
    }
}

/// All permutations of `0..d` in lexicographic order, as images `perm[j]`.
pub fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..d).collect();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation.
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..d).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Apply the permutation `P e_j = e_{perm[j]}` to a vector.
fn permute(perm: &[usize], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (j, &i) in perm.iter().enumerate() {
        out[i] = v[j];
    }
    out
}

/// Contribution of subspace `i` to the marginal under permutation `perm`.
fn contribution(dec: &LcsDecomposition, i: usize, perm: &[usize]) -> Vec<f64> {
    if i == 0 {
        return permute(perm, &dec.q);
    }
    let moved = permute(perm, dec.subspace(i));
    let partner = shift(&moved, i as isize);
    let c = midpoint_weight(i, dec.d);
    moved.iter().zip(&partner).map(|(a, b)| c * (a + b)).collect()
}

/// Reachable-marginal polytope: every combination of one permutation per
/// independent subspace, deduplicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeVertexSet {
    pub d: usize,
    /// Permutations referenced by `labels`, lexicographic order.
    pub perms: Vec<Vec<usize>>,
    /// Reduced coordinates of each distinct vertex.
    pub points: Vec<Vec<f64>>,
    /// Permutation index `(i_0, ..., i_k)` of one generator per vertex.
    pub labels: Vec<Vec<usize>>,
    /// How many generator tuples land on each vertex.
    pub multiplicity: Vec<usize>,
    /// `(d!)^{k+1}`.
    pub nominal_count: usize,
}

impl PolytopeVertexSet {
    /// Equal-marginal transform made of the labelled permutations.
    pub fn transform(&self, index: usize) -> SymmetricTransform {
        label_transform(&self.perms, &self.labels[index])
    }

    /// CSV with one row per vertex: coordinates then label.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let coord_names: Vec<String> = (0..self.d - 1).map(|n| format!("x{n}")).collect();
        let label_names: Vec<String> = (0..self.labels.first().map_or(0, Vec::len)).map(|n| format!("perm{n}")).collect();
        out.push_str(&coord_names.join(","));
        out.push(',');
        out.push_str(&label_names.join(","));
        out.push_str(",multiplicity\n");
        for ((p, l), m) in self.points.iter().zip(&self.labels).zip(&self.multiplicity) {
            let cells: Vec<String> = p.iter().map(|v| format!("{v:e}")).chain(l.iter().map(|v| v.to_string())).collect();
            out.push_str(&cells.join(","));
            out.push_str(&format!(",{m}\n"));
        }
        out
    }
}

fn label_transform(perms: &[Vec<usize>], label: &[usize]) -> SymmetricTransform {
    let m_q = DoublyStochasticMatrix::permutation(&perms[label[0]]);
    let m_r = label[1..].iter().map(|&i| DoublyStochasticMatrix::permutation(&perms[i])).collect();
    SymmetricTransform::new(m_q, m_r).expect("label dimensions are consistent")
}

fn quantize(v: &[f64]) -> Vec<i64> {
    v.iter().map(|x| (x / 1e-12).round() as i64).collect()
}

/// Enumerates all polytope vertices at inverse temperature `beta`.
///
/// Refuses more than [`EXHAUSTIVE_LIMIT`] generator tuples unless `force`.
pub fn vertex_set(spectrum: &EnergySpectrum, beta: InverseTemperature, force: bool) -> Result<PolytopeVertexSet> {
    let d = spectrum.dim();
    let k = independent_count(d);
    let perms = all_permutations(d);
    let nominal_count = factorial(d).checked_pow((k + 1) as u32).unwrap_or(usize::MAX);
    if nominal_count > EXHAUSTIVE_LIMIT && !force {
        return Err(Error::TooLarge { count: nominal_count, limit: EXHAUSTIVE_LIMIT });
    }
    let dec = thermal_decomposition(spectrum, beta)?;
    // Distinct contributions per subspace, with the multiplicity of each.
    let per_subspace: Vec<Vec<(Vec<f64>, usize, usize)>> = (0..=k)
        .map(|i| {
            let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
            let mut list: Vec<(Vec<f64>, usize, usize)> = Vec::new();
            for (pi, perm) in perms.iter().enumerate() {
                let c = contribution(&dec, i, perm);
                match seen.get(&quantize(&c)) {
                    Some(&slot) => list[slot].2 += 1,
                    None => {
                        seen.insert(quantize(&c), list.len());
                        list.push((c, pi, 1));
                    }
                }
            }
            list
        })
        .collect();
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut multiplicity = Vec::new();
    let mut idx = vec![0usize; k + 1];
    loop {
        let mut marginal = vec![0.0; d];
        let mut label = Vec::with_capacity(k + 1);
        let mut mult = 1;
        for (i, &j) in idx.iter().enumerate() {
            let (c, pi, m) = &per_subspace[i][j];
            for (a, b) in marginal.iter_mut().zip(c) {
                *a += b;
            }
            label.push(*pi);
            mult *= m;
        }
        let x = to_coords(&marginal);
        let key = quantize(&x);
        match seen.get(&key) {
            Some(&slot) => multiplicity[slot] += mult,
            None => {
                seen.insert(key, points.len());
                points.push(x);
                labels.push(label);
                multiplicity.push(mult);
            }
        }
        // Odometer over the per-subspace lists.
        let mut pos = 0;
        loop {
            if pos > k {
                return Ok(PolytopeVertexSet { d, perms, points, labels, multiplicity, nominal_count });
            }
            idx[pos] += 1;
            if idx[pos] < per_subspace[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Phase-1 certificate that a point is (or is not) a convex combination of
/// given vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    pub feasible: bool,
    /// Sum of artificial variables at the phase-1 optimum.
    pub gap: f64,
    /// Positive weights `(vertex index, weight)`.
    pub weights: Vec<(usize, f64)>,
    /// `‖sum_k w_k v_k − point‖∞` when feasible.
    pub residual: f64,
}

/// Feasibility tolerance on the phase-1 gap.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Certificate for `point ∈ conv(vertices)`.
pub fn hull_membership_points(point: &[f64], vertices: &[Vec<f64>]) -> MembershipCertificate {
    let n = vertices.len();
    let dim = point.len();
    let mut a: Vec<Vec<f64>> = (0..dim).map(|c| vertices.iter().map(|v| v[c]).collect()).collect();
    a.push(vec![1.0; n]);
    let mut b = point.to_vec();
    b.push(1.0);
    let out = phase1(&a, &b);
    let weights: Vec<(usize, f64)> = out.x.iter().copied().enumerate().filter(|(_, w)| *w > 0.0).collect();
    let mut recon = vec![0.0; dim];
    for &(k, w) in &weights {
        for (r, v) in recon.iter_mut().zip(&vertices[k]) {
            *r += w * v;
        }
    }
    let residual = recon.iter().zip(point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let feasible = out.gap <= MEMBERSHIP_TOL && residual <= MEMBERSHIP_TOL;
    MembershipCertificate { feasible, gap: out.gap, weights, residual }
}

/// Certificate for membership in the vertex polytope.
pub fn hull_membership(point: &[f64], set: &PolytopeVertexSet) -> Result<MembershipCertificate> {
    if point.len() + 1 != set.d {
        return Err(Error::DimensionMismatch { expected: set.d - 1, found: point.len() });
    }
    Ok(hull_membership_points(point, &set.points))
}

/// Weights `a_0..a_{d-1}` writing `p(β′)` over the simplex `v_0..v_{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveCoefficients {
    pub a: Vec<f64>,
    /// `x_i(β′) / x_i(β)`.
    pub ratios: Vec<f64>,
    /// `‖sum_i a_i v_i − x(β′)‖∞`.
    pub reconstruction_error: f64,
}

/// `a_i = x_i(β′)/x_i(β) − x_{i-1}(β′)/x_{i-1}(β)`, closed by `a_{d-1} = 1 − x_{d-2}(β′)/x_{d-2}(β)`.
pub fn curve_coefficients(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<CurveCoefficients> {
    let d = spectrum.dim();
    check_order(beta, beta_prime)?;
    let xb = thermal_coords(spectrum, beta);
    let xp = thermal_coords(spectrum, beta_prime);
    if let Some(i) = xb.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateCoordinate(i));
    }
    let ratios: Vec<f64> = xp.iter().zip(&xb).map(|(a, b)| a / b).collect();
    let mut a = Vec::with_capacity(d);
    a.push(ratios[0]);
    for i in 1..d - 1 {
        a.push(ratios[i] - ratios[i - 1]);
    }
    a.push(1.0 - ratios[d - 2]);
    let vertices = simplex_vertices(&xb);
    let mut recon = vec![0.0; d - 1];
    for (ai, v) in a.iter().zip(&vertices) {
        for (r, x) in recon.iter_mut().zip(v) {
            *r += ai * x;
        }
    }
    let reconstruction_error = recon.iter().zip(&xp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CurveCoefficients { a, ratios, reconstruction_error })
}

fn check_order(beta: InverseTemperature, beta_prime: InverseTemperature) -> Result<()> {
    if beta_prime.value() > beta.value() {
        return Err(Error::InvalidArgument(format!("beta_prime {beta_prime} exceeds beta {beta}")));
    }
    Ok(())
}

/// `v_j = (0, ..., 0, x_j, ..., x_{d-2})` for `j = 0..d-1`.
pub fn simplex_vertices(x: &[f64]) -> Vec<Vec<f64>> {
    (0..=x.len())
        .map(|j| x.iter().enumerate().map(|(n, &v)| if n < j { 0.0 } else { v }).collect())
        .collect()
}

/// Probability vector of `v_j`: the first `j+1` entries of `p` averaged.
pub fn simplex_vertex_probs(p: &[f64], j: usize) -> Vec<f64> {
    let mean = p[..=j].iter().sum::<f64>() / (j + 1) as f64;
    p.iter().enumerate().map(|(i, &v)| if i <= j { mean } else { v }).collect()
}

/// `M_q` mixing the two most populated levels with weight
/// `m = 1 − 1/(2(p_0 + p_1))` on the diagonal.
pub fn top_pair_mixer(p: &[f64]) -> Result<DoublyStochasticMatrix> {
    let d = p.len();
    let m = 1.0 - 1.0 / (2.0 * (p[0] + p[1]));
    let mut mat = nalgebra::DMatrix::identity(d, d);
    mat[(0, 0)] = m;
    mat[(1, 1)] = m;
    mat[(0, 1)] = 1.0 - m;
    mat[(1, 0)] = 1.0 - m;
    DoublyStochasticMatrix::new(mat)
}

/// The five labelled generators `A..E` used for `v_2` in `d = 4`, as
/// `(name, [perm_q, perm_r1, perm_r2])`.
pub fn d4_generators() -> [(&'static str, [[usize; 4]; 3]); 5] {
    const ID: [usize; 4] = [0, 1, 2, 3];
    const P7: [usize; 4] = [1, 0, 2, 3];
    const P9: [usize; 4] = [2, 0, 1, 3];
    const P13: [usize; 4] = [1, 2, 0, 3];
    [("A", [ID, ID, ID]), ("B", [P7, ID, ID]), ("C", [P13, P7, ID]), ("D", [P9, P7, ID]), ("E", [P9, ID, ID])]
}

fn perm_transform(perms: &[[usize; 4]; 3]) -> SymmetricTransform {
    SymmetricTransform::new(
        DoublyStochasticMatrix::permutation(&perms[0]),
        perms[1..].iter().map(|p| DoublyStochasticMatrix::permutation(p)).collect(),
    )
    .expect("4x4 permutations")
}

/// One explicitly reached simplex vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexConstruction {
    pub index: usize,
    pub coords: Vec<f64>,
    pub transform: SymmetricTransform,
    /// `‖marginal − v_j‖∞` of the transform.
    pub deviation: f64,
    /// Convex weights over `A..E` for `v_2` in `d = 4`.
    pub generator_weights: Option<Vec<(String, f64)>>,
}

/// Transforms reaching every simplex vertex `v_0..v_{d-1}` for `d <= 4`.
pub fn vertex_transforms(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Result<Vec<VertexConstruction>> {
    let d = spectrum.dim();
    if !(2..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let p = thermal_probs(spectrum, beta);
    let dec = thermal_decomposition(spectrum, beta)?;
    let x = thermal_coords(spectrum, beta);
    let verts = simplex_vertices(&x);
    let k = independent_count(d);
    let mut out: Vec<(SymmetricTransform, Option<Vec<(String, f64)>>)> = vec![(SymmetricTransform::identity(d), None)];
    if d >= 3 {
        let m_q = top_pair_mixer(&p)?;
        out.push((SymmetricTransform::new(m_q, vec![DoublyStochasticMatrix::identity(d); k])?, None));
    }
    if d == 4 {
        let cross = cross_products_d4(spectrum, beta)?;
        if !cross.all_signs_ok() {
            return Err(Error::SignCheckFailure(format!("{cross:?}")));
        }
        let gens = d4_generators();
        let transforms: Vec<SymmetricTransform> = gens.iter().map(|(_, g)| perm_transform(g)).collect();
        let pts: Vec<Vec<f64>> = transforms.iter().map(|t| to_coords(&t.marginal(&dec))).collect();
        let cert = hull_membership_points(&verts[2], &pts);
        if !cert.feasible {
            return Err(Error::SignCheckFailure(format!("v_2 outside A..E (gap {:e})", cert.gap)));
        }
        let terms: Vec<(f64, &SymmetricTransform)> = cert.weights.iter().map(|&(i, w)| (w, &transforms[i])).collect();
        let names = cert.weights.iter().map(|&(i, w)| (gens[i].0.to_string(), w)).collect();
        out.push((SymmetricTransform::mixture(&terms)?, Some(names)));
    }
    out.push((SymmetricTransform::uniform(d), None));
    out.into_iter()
        .enumerate()
        .map(|(j, (transform, generator_weights))| {
            let reached = to_coords(&transform.marginal(&dec));
            let deviation = reached.iter().zip(&verts[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok(VertexConstruction { index: j, coords: verts[j].clone(), transform, deviation, generator_weights })
        })
        .collect()
}

/// Blocks reaching the intermediate vertices `v_1..v_{d-2}`.
pub fn reach_boundary_vertices(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
) -> Result<Vec<(VertexConstruction, BlockUnitary)>> {
    let d = spectrum.dim();
    if !(3..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let dec = thermal_decomposition(spectrum, beta)?;
    vertex_transforms(spectrum, beta)?
        .into_iter()
        .filter(|v| v.index >= 1 && v.index <= d - 2)
        .map(|v| {
            let blocks = BlockUnitary::from_transform(&dec, &v.transform)?;
            Ok((v, blocks))
        })
        .collect()
}

/// Equal-marginal transform reaching `p(β′)` by the geometric method.
///
/// Mixes the vertex transforms with the curve coefficients; when some
/// `x_i(β) = 0` the target is written over the full vertex set instead.
pub fn geometric_transform(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<SymmetricTransform> {
    let d = spectrum.dim();
    if !(2..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    check_order(beta, beta_prime)?;
    if beta == beta_prime {
        return Ok(SymmetricTransform::identity(d));
    }
    match curve_coefficients(spectrum, beta, beta_prime) {
        Ok(coef) => {
            if let Some(bad) = coef.a.iter().find(|&&a| a < -ROUNDING_GUARD) {
                return Err(Error::ConditionsNotMet(format!("negative curve coefficient {bad:e}")));
            }
            let verts = vertex_transforms(spectrum, beta)?;
            let terms: Vec<(f64, &SymmetricTransform)> =
                coef.a.iter().zip(&verts).map(|(a, v)| (a.max(0.0), &v.transform)).collect();
            SymmetricTransform::mixture(&terms)
        }
        Err(Error::DegenerateCoordinate(_)) => lp_transform(spectrum, beta, beta_prime),
        Err(e) => Err(e),
    }
}

/// Writes `p(β′)` over the full vertex set and mixes the labelled permutations.
pub fn lp_transform(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<SymmetricTransform> {
    let set = vertex_set(spectrum, beta, false)?;
    let target = to_coords(&thermal_probs(spectrum, beta_prime));
    let cert = hull_membership(&target, &set)?;
    if !cert.feasible {
        return Err(Error::ConditionsNotMet(format!("target outside polytope (gap {:e})", cert.gap)));
    }
    let transforms: Vec<(f64, SymmetricTransform)> =
        cert.weights.iter().map(|&(i, w)| (w, set.transform(i))).collect();
    let terms: Vec<(f64, &SymmetricTransform)> = transforms.iter().map(|(w, t)| (*w, t)).collect();
    SymmetricTransform::mixture(&terms)
}

/// Equal-marginal transform with marginal `target`, found by solving for
/// `M_q` and every `M_{r_i}` at once (all doubly stochastic). Subspaces listed
/// in `fixed` keep `M_{r_i} = I`. Returns the transform and the phase-1 gap.
pub fn reach_marginal_lp(dec: &LcsDecomposition, target: &[f64], fixed: &[usize]) -> Result<(SymmetricTransform, f64)> {
    let d = dec.d;
    let k = independent_count(d);
    let free: Vec<usize> = (1..=k).filter(|i| !fixed.contains(i)).collect();
    let blocks = 1 + free.len();
    let n = blocks * d * d;
    let var = |b: usize, m: usize, c: usize| b * d * d + m * d + c;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for blk in 0..blocks {
        for m in 0..d {
            let mut row = vec![0.0; n];
            let mut col = vec![0.0; n];
            for c in 0..d {
                row[var(blk, m, c)] = 1.0;
                col[var(blk, c, m)] = 1.0;
            }
            a.push(row);
            b.push(1.0);
            a.push(col);
            b.push(1.0);
        }
    }
    let mut rhs = target.to_vec();
    for &i in fixed {
        if i == 0 || i > k {
            continue;
        }
        let r = dec.subspace(i);
        let partner = shift(r, i as isize);
        let c = midpoint_weight(i, d);
        for j in 0..d {
            rhs[j] -= c * (r[j] + partner[j]);
        }
    }
    for j in 0..d {
        let mut row = vec![0.0; n];
        for c in 0..d {
            row[var(0, j, c)] += dec.q[c];
        }
        for (slot, &i) in free.iter().enumerate() {
            let r = dec.subspace(i);
            let w = midpoint_weight(i, d);
            // (I + Π^i)[j, m] is one at m = j and at m = j − i.
            for m in [j, (j + d - i % d) % d] {
                for c in 0..d {
                    row[var(slot + 1, m, c)] += w * r[c];
                }
            }
        }
        a.push(row);
        b.push(rhs[j]);
    }
    let out = phase1(&a, &b);
    if out.gap > MEMBERSHIP_TOL {
        return Err(Error::ConditionsNotMet(format!("marginal not reachable (gap {:e})", out.gap)));
    }
    let matrix = |blk: usize| {
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| out.x[var(blk, r, c)].max(0.0));
        DoublyStochasticMatrix::with_tol(m, 1e-9)
    };
    let m_q = matrix(0)?;
    let mut m_r = vec![DoublyStochasticMatrix::identity(d); k];
    for (slot, &i) in free.iter().enumerate() {
        m_r[i - 1] = matrix(slot + 1)?;
    }
    Ok((SymmetricTransform::new(m_q, m_r)?, out.gap))
}

/// STU from `β` to `β′` by the geometric method (`d` in 2..=4).
pub fn build_stu_geometric(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<BlockUnitary> {
    let transform = geometric_transform(spectrum, beta, beta_prime)?;
    BlockUnitary::from_transform(&thermal_decomposition(spectrum, beta)?, &transform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block_unitary::verify_stu;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    fn b(x: f64) -> InverseTemperature {
        InverseTemperature::Finite(x)
    }

    #[test]
    fn coordinate_corners() {
        assert_eq!(to_coords(&[1.0, 0.0, 0.0]), vec![-1.0, -1.0]);
        assert_eq!(to_coords(&[0.0, 1.0, 0.0]), vec![1.0, -1.0]);
        assert_eq!(to_coords(&[0.0, 0.0, 1.0]), vec![0.0, 2.0]);
        assert!(to_coords(&[0.25; 4]).iter().all(|v| v.abs() < 1e-16));
        let p = [0.4, 0.3, 0.2, 0.1];
        let back = from_coords(&to_coords(&p)).unwrap();
        assert!(back.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(matches!(from_coords(&[3.0, -1.0]), Err(Error::InvalidPreimage(_))));
    }

    #[test]
    fn accurate_thermal_coords() {
        let s = spec(&[0.0, 1.0, 2.5, 4.0]);
        let direct = to_coords(&thermal_probs(&s, b(0.8)));
        let accurate = thermal_coords_at(&s, 0.8);
        assert!(direct.iter().zip(&accurate).all(|(a, c)| (a - c).abs() < 1e-15));
    }

    #[test]
    fn permutations_enumerated() {
        let p = all_permutations(4);
        assert_eq!(p.len(), 24);
        assert_eq!(p[0], vec![0, 1, 2, 3]);
        assert_eq!(p[23], vec![3, 2, 1, 0]);
    }

    #[test]
    fn vertex_counts() {
        let set = vertex_set(&spec(&[0.0, 1.0, 2.0]), b(1.0), false).unwrap();
        assert_eq!(set.nominal_count, 36);
        assert!(set.points.len() <= 36);
        let hot = vertex_set(&spec(&[0.0, 1.0, 2.0]), b(0.0), false).unwrap();
        assert_eq!(hot.points.len(), 1);
        assert_eq!(
            vertex_set(&spec(&[0.0, 1.0, 2.0, 3.0, 4.0]), b(1.0), false).unwrap_err(),
            Error::TooLarge { count: 1_728_000, limit: EXHAUSTIVE_LIMIT }
        );
    }

    #[test]
    fn membership_examples() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let set = vertex_set(&s, b(1.0), false).unwrap();
        let c = hull_membership(&set.points[3], &set).unwrap();
        assert!(c.feasible);
        assert!(hull_membership(&[0.0, 0.0], &set).unwrap().feasible);
        let out = hull_membership(&[5.0, 5.0], &set).unwrap();
        assert!(!out.feasible && out.gap > 1e-6);
    }

    #[test]
    fn coefficient_endpoints() {
        let s = spec(&[0.0, 1.0, 2.0, 3.0]);
        let c = curve_coefficients(&s, b(1.0), b(1.0)).unwrap();
        assert_eq!(c.a, vec![1.0, 0.0, 0.0, 0.0]);
        let c = curve_coefficients(&s, b(1.0), b(0.0)).unwrap();
        assert_eq!(c.a, vec![0.0, 0.0, 0.0, 1.0]);
        let c = curve_coefficients(&s, b(1.0), b(0.5)).unwrap();
        assert!(c.a.iter().all(|&a| a >= 0.0));
        assert!((c.a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.reconstruction_error < 1e-10);
    }

    #[test]
    fn vertices_reached() {
        for e in [vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 1.2, 5.0]] {
            for v in vertex_transforms(&spec(&e), b(1.35)).unwrap() {
                assert!(v.deviation < 1e-12, "{e:?} v{} {}", v.index, v.deviation);
            }
        }
    }

    #[test]
    fn builds_pass() {
        let cases: [(&[f64], f64, f64); 5] = [
            (&[0.0, 1.0], 2.0, 0.7),
            (&[0.0, 1.0, 2.0], 1.0, 0.5),
            (&[0.0, 1.0, 2.0], 1.35, 0.6),
            (&[0.0, 1.0, 1.2, 5.0], 1.0, 0.3),
            (&[0.0, 1.0, 2.0, 3.0], 2.0, 0.0),
        ];
        for (e, beta, bp) in cases {
            let s = spec(e);
            let u = build_stu_geometric(&s, b(beta), b(bp)).unwrap();
            let r = verify_stu(&u, &s, b(beta), b(bp), 1e-9).unwrap();
            assert!(r.pass, "{e:?} {beta} {bp} {r:?}");
        }
    }

    #[test]
    fn degenerate_ground_falls_back() {
        let s = EnergySpectrum::raw(vec![0.0, 0.0, 1.0]).unwrap();
        let u = build_stu_geometric(&s, b(1.0), b(0.4)).unwrap();
        assert!(verify_stu(&u, &s, b(1.0), b(0.4), 1e-9).unwrap().pass);
    }
}
