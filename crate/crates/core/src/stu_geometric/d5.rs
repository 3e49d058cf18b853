//! Five-level extension of the geometric construction with `M_{r_2} = I`.
//!
//! Vertex `v_i` is reached when the vector
//! `v_i − p + q − (I + Π)((M_{r_1})_i − I) r_1` is nonnegative and majorised
//! by `q`; then `M_q` follows from the constructive majorisation theorem.
//! The closed-form choice of `(M_{r_1})_i` is only valid in part of the
//! parameter space, so a grid over the same one- or two-parameter family is
//! tried as well, then a general `M_{r_1}` from a feasibility problem. Vertices
//! that need `M_{r_2} ≠ I` mark the spectrum as unresolved for this strategy.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{curve_coefficients, reach_marginal_lp, simplex_vertex_probs, to_coords};
use crate::block_unitary::{thermal_decomposition, verify_stu, BlockUnitary, StuReport, SymmetricTransform};
use crate::error::{Error, Result};
use crate::lcs::shift;
use crate::majorize::{hlp_construct, majorization_slack, DoublyStochasticMatrix, ROUNDING_GUARD};
use crate::spectra::{thermal_probs, EnergySpectrum, InverseTemperature};

/// Grid resolution of the fallback family search.
const GRID: usize = 200;

/// The printed sufficient conditions, evaluated literally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D5Conditions {
    /// `max{0, (p_0 − p_1)(1/2 − p_0 − p_1)}`.
    pub a2: f64,
    /// Both mixing weights of `(M_{r_1})_1` are at most one.
    pub v1_weights_ok: bool,
    /// `a_1 <= p_0² − p_2² − (p_0 − p_1)/2`.
    pub v1_second_sum_ok: bool,
    /// Off-diagonal weight of `(M_{r_1})_2` is at most one.
    pub v2_weight_ok: bool,
    /// Off-diagonal weight of `(M_{r_1})_3` is at most one.
    pub v3_weight_ok: bool,
    /// `p_0 + p_2 + p_3 >= 3/4`, sufficient for the previous condition.
    pub v3_sufficient: bool,
}

impl D5Conditions {
    pub fn all(&self) -> bool {
        self.v1_weights_ok && self.v1_second_sum_ok && self.v2_weight_ok && self.v3_weight_ok
    }
}

/// Outcome for one intermediate vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D5Vertex {
    pub index: usize,
    /// Parameters of the closed-form choice.
    pub closed_form_params: Vec<f64>,
    /// `min(slack, min entry)` for the closed-form choice; nonnegative when valid.
    pub closed_form_score: f64,
    /// Best parameters found on the grid and their score.
    pub search_params: Vec<f64>,
    pub search_score: f64,
    /// How the vertex was reached, if at all.
    pub route: Option<VertexRoute>,
}

/// Which construction reached a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexRoute {
    /// The printed mixing weights.
    ClosedForm,
    /// Another member of the same matrix family.
    FamilySearch,
    /// A general doubly stochastic `M_{r_1}`, with `M_{r_2} = I`.
    GeneralR1,
    /// Only with `M_{r_2}` free as well.
    GeneralR1R2,
}

/// Region check and, where possible, a verified STU for `d = 5`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D5Report {
    pub beta: InverseTemperature,
    pub beta_prime: InverseTemperature,
    pub conditions: D5Conditions,
    pub vertices: Vec<D5Vertex>,
    /// Every intermediate vertex was reached with `M_{r_2} = I`.
    pub resolved: bool,
    /// Built whenever every vertex is reachable by some route.
    pub stu: Option<StuReport>,
    /// Human-readable list of failures.
    pub failures: Vec<String>,
}

fn mixer(d: usize, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(d, d);
    for &(i, j, v) in entries {
        m[(i, j)] = v;
    }
    m
}

/// `(M_{r_1})_1` with parameters `(m_1, m_2)`.
fn r1_matrix_v1(m1: f64, m2: f64) -> DMatrix<f64> {
    mixer(
        5,
        &[
            (0, 0, 1.0 - m1),
            (0, 1, m1),
            (1, 1, 1.0 - m1),
            (1, 2, m1),
            (2, 0, m1),
            (2, 2, 1.0 - m1),
            (3, 3, 1.0 - m2),
            (3, 4, m2),
            (4, 3, m2),
            (4, 4, 1.0 - m2),
        ],
    )
}

/// Symmetric two-level mixer on `(a, a+1)` with off-diagonal weight `w`.
fn r1_matrix_pair(a: usize, w: f64) -> DMatrix<f64> {
    mixer(5, &[(a, a, 1.0 - w), (a + 1, a + 1, 1.0 - w), (a, a + 1, w), (a + 1, a, w)])
}

/// `v − p + q − (I + Π)(M − I) r_1`.
fn required_q_image(v: &[f64], p: &[f64], q: &[f64], r1: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    let moved = m * nalgebra::DVector::from_column_slice(r1);
    let delta: Vec<f64> = moved.iter().zip(r1).map(|(a, b)| a - b).collect();
    let partner = shift(&delta, 1);
    (0..v.len()).map(|j| v[j] - p[j] + q[j] - delta[j] - partner[j]).collect()
}

fn score(q: &[f64], image: &[f64]) -> f64 {
    let min_entry = image.iter().copied().fold(f64::INFINITY, f64::min);
    majorization_slack(q, image).min(min_entry)
}

/// Evaluates the region conditions, tries each vertex, and when all three
/// intermediate vertices are reached builds and verifies an STU to
/// `beta_prime` (default `β/2`).
pub fn d5_region_check(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: Option<InverseTemperature>,
) -> Result<D5Report> {
    if spectrum.dim() != 5 {
        return Err(Error::UnsupportedDimension(spectrum.dim()));
    }
    let beta_prime = match (beta_prime, beta) {
        (Some(b), _) => b,
        (None, InverseTemperature::Finite(b)) => InverseTemperature::Finite(b / 2.0),
        (None, InverseTemperature::Infinite) => {
            return Err(Error::InvalidArgument("a finite beta_prime is required at beta = inf".into()))
        }
    };
    let p = thermal_probs(spectrum, beta);
    let dec = thermal_decomposition(spectrum, beta)?;
    let (q, r1) = (dec.q.clone(), dec.subspace(1).to_vec());
    let (p0, p1, p2, p3, p4) = (p[0], p[1], p[2], p[3], p[4]);

    let a2 = ((p0 - p1) * (0.5 - p0 - p1)).max(0.0);
    let m1 = a2 / (p0 * p1 - p2 * p3);
    let m2 = a2 / (p4 * (p0 - p3));
    let a1 = m1 * p2 * (p1 - p3);
    let w2 = ((p0 + p1 - 2.0 * p2 - 3.0 * (p0 * p0 - p2 * p2)) / (3.0 * p1 * (p0 - p2))).max(0.0);
    let w3 = ((p0 + p1 + p2 - 3.0 * p3 - 4.0 * (p0 * p0 - p3 * p3)) / (4.0 * p2 * (p1 - p3))).max(0.0);
    let conditions = D5Conditions {
        a2,
        v1_weights_ok: m1 <= 1.0 && m2 <= 1.0,
        v1_second_sum_ok: a1 <= p0 * p0 - p2 * p2 - (p0 - p1) / 2.0,
        v2_weight_ok: w2 <= 1.0,
        v3_weight_ok: w3 <= 1.0,
        v3_sufficient: p0 + p2 + p3 >= 0.75,
    };

    let grid: Vec<f64> = (0..=GRID).map(|k| k as f64 / GRID as f64).collect();
    let mut vertices = Vec::new();
    let mut transforms = vec![SymmetricTransform::identity(5)];
    let mut failures = Vec::new();
    for index in 1..=3 {
        let v = simplex_vertex_probs(&p, index);
        let build = |params: &[f64]| match index {
            1 => r1_matrix_v1(params[0], params[1]),
            2 => r1_matrix_pair(0, params[0]),
            _ => r1_matrix_pair(1, params[0]),
        };
        let eval = |params: &[f64]| score(&q, &required_q_image(&v, &p, &q, &r1, &build(params)));
        let closed_form_params = match index {
            1 => vec![m1, m2],
            2 => vec![w2],
            _ => vec![w3],
        };
        let closed_ok = closed_form_params.iter().all(|&w| (0.0..=1.0).contains(&w));
        let closed_form_score = if closed_ok { eval(&closed_form_params) } else { f64::NEG_INFINITY };
        let candidates: Vec<Vec<f64>> = if index == 1 {
            grid.iter().flat_map(|&a| grid.iter().map(move |&b| vec![a, b])).collect()
        } else {
            grid.iter().map(|&a| vec![a]).collect()
        };
        let (search_params, search_score) = candidates
            .into_iter()
            .map(|c| {
                let s = eval(&c);
                (c, s)
            })
            .fold((Vec::new(), f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let family = if closed_form_score >= -ROUNDING_GUARD {
            Some((VertexRoute::ClosedForm, closed_form_params.clone()))
        } else if search_score >= -ROUNDING_GUARD {
            Some((VertexRoute::FamilySearch, search_params.clone()))
        } else {
            None
        };
        let found = match family {
            Some((route, params)) => {
                let m = build(&params);
                let image = required_q_image(&v, &p, &q, &r1, &m);
                let (m_q, _) = hlp_construct(&q, &image)?;
                let t = SymmetricTransform::new(
                    m_q,
                    vec![DoublyStochasticMatrix::new(m)?, DoublyStochasticMatrix::identity(5)],
                )?;
                Some((route, t))
            }
            None => reach_marginal_lp(&dec, &v, &[2])
                .map(|(t, _)| (VertexRoute::GeneralR1, t))
                .or_else(|_| reach_marginal_lp(&dec, &v, &[]).map(|(t, _)| (VertexRoute::GeneralR1R2, t)))
                .ok(),
        };
        let route = found.as_ref().map(|(r, _)| *r);
        match route {
            None => failures.push(format!("v_{index}: not reachable by any equal-marginal transform")),
            Some(VertexRoute::GeneralR1R2) => {
                failures.push(format!("v_{index}: not reachable with M_r2 = I (best family score {search_score:e})"))
            }
            _ => {}
        }
        vertices.push(D5Vertex {
            index,
            closed_form_params,
            closed_form_score,
            search_params,
            search_score,
            route,
        });
        if let Some((_, t)) = found {
            let reached = to_coords(&t.marginal(&dec));
            let dev = reached.iter().zip(&to_coords(&v)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dev > 1e-10 {
                return Err(Error::ConditionsNotMet(format!("v_{index} reached with deviation {dev:e}")));
            }
            transforms.push(t);
        }
    }
    if !conditions.v1_weights_ok {
        failures.push("v_1: mixing weight exceeds one".into());
    }
    if !conditions.v1_second_sum_ok {
        failures.push("v_1: second partial-sum condition fails".into());
    }
    if !conditions.v2_weight_ok {
        failures.push("v_2: mixing weight exceeds one".into());
    }
    if !conditions.v3_weight_ok {
        failures.push("v_3: mixing weight exceeds one".into());
    }

    let resolved = vertices.iter().all(|v| matches!(v.route, Some(r) if r != VertexRoute::GeneralR1R2));
    let stu = if transforms.len() == 4 {
        transforms.push(SymmetricTransform::uniform(5));
        let coef = curve_coefficients(spectrum, beta, beta_prime)?;
        if let Some(bad) = coef.a.iter().find(|&&a| a < -ROUNDING_GUARD) {
            return Err(Error::ConditionsNotMet(format!("negative curve coefficient {bad:e}")));
        }
        let terms: Vec<(f64, &SymmetricTransform)> = coef.a.iter().map(|a| a.max(0.0)).zip(&transforms).collect();
        let mixed = SymmetricTransform::mixture(&terms)?;
        let blocks = BlockUnitary::from_transform(&dec, &mixed)?;
        Some(verify_stu(&blocks, spectrum, beta, beta_prime, 1e-9)?)
    } else {
        None
    };
    Ok(D5Report { beta, beta_prime, conditions, vertices, resolved, stu, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    #[test]
    fn equal_gaps_resolved() {
        let r = d5_region_check(&spec(&[0.0, 1.0, 2.0, 3.0, 4.0]), InverseTemperature::Finite(1.0), None).unwrap();
        assert!(r.conditions.all(), "{:?}", r.conditions);
        assert!(r.vertices.iter().all(|v| v.closed_form_score >= -ROUNDING_GUARD));
        assert!(r.resolved);
        assert!(r.stu.unwrap().pass);
    }

    #[test]
    fn general_r1_resolves_shrinking_gaps() {
        let r = d5_region_check(&spec(&[0.0, 1.0, 1.8, 2.4, 2.8]), InverseTemperature::Finite(1.0), None).unwrap();
        assert!(r.conditions.all());
        assert!(r.vertices.iter().any(|v| v.route == Some(VertexRoute::GeneralR1)));
        assert!(r.resolved);
        assert!(r.stu.unwrap().pass);
    }

    #[test]
    fn hot_equal_gaps_unresolved() {
        let r = d5_region_check(&spec(&[0.0, 1.0, 2.0, 3.0, 4.0]), InverseTemperature::Finite(0.05), None).unwrap();
        assert!(!r.resolved);
        assert_eq!(r.vertices[0].route, Some(VertexRoute::GeneralR1R2));
        assert!(!r.failures.is_empty());
        // Freeing M_r2 still reaches every vertex.
        assert!(r.stu.unwrap().pass);
    }
}
