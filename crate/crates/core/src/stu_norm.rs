//! The norm-passing construction.
//!
//! Heating moves weight from the diagonal subspace `q` into the
//! off-diagonal subspaces `r_i`. Each `r_i` is mapped onto the rescaled
//! target `(‖r_i‖/‖b_i‖) b_i`, and `q` makes up the deficit through a convex
//! split `M_q = α_0 M_{q→a} + sum_i α_i M_{q→2b_i}`. Here `a = q(β′)` and
//! `b_i = r_i(β′)`.

use serde::{Deserialize, Serialize};

use crate::block_unitary::{thermal_decomposition, BlockUnitary, SymmetricTransform};
use crate::error::{Error, Result};
use crate::lcs::{independent_count, midpoint_weight, shift, LcsDecomposition};
use crate::majorize::{hlp_construct, majorization_slack, DoublyStochasticMatrix, ROUNDING_GUARD};
use crate::spectra::{EnergySpectrum, InverseTemperature};

/// Thermal populations at any real `beta`; negative values are allowed so
/// that central differences straddle `β = 0`.
fn probs_at(spectrum: &EnergySpectrum, beta: f64) -> Vec<f64> {
    let w: Vec<f64> = spectrum.energies().iter().map(|e| (-beta * e).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// `‖q‖` and `‖r_i‖` for `i = 1..d-1` at a real `beta`.
fn norms_at(spectrum: &EnergySpectrum, beta: f64) -> (f64, Vec<f64>) {
    let p = probs_at(spectrum, beta);
    let d = p.len();
    let q = p.iter().map(|x| x * x).sum();
    let r = (1..d).map(|i| (0..d).map(|j| p[j] * p[(j + i) % d]).sum()).collect();
    (q, r)
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n: f64 = v.iter().sum();
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

/// `y ≻ x` after normalizing both; vacuous when either has zero norm.
fn normalized_majorizes(y: &[f64], x: &[f64]) -> bool {
    match (normalized(y), normalized(x)) {
        (Some(y), Some(x)) => majorization_slack(&y, &x) >= -ROUNDING_GUARD,
        _ => true,
    }
}

/// `(1 + Π^i) b / 2`.
fn symmetrized(b: &[f64], i: usize) -> Vec<f64> {
    let s = shift(b, i as isize);
    b.iter().zip(&s).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Analytic `∂β ‖q‖ = Z⁻³ sum_{i,m} 2 (E_m − E_i) e^{−β(2E_i + E_m)}`.
pub fn d_norm_q(spectrum: &EnergySpectrum, beta: f64) -> f64 {
    let e = spectrum.energies();
    let z: f64 = e.iter().map(|x| (-beta * x).exp()).sum();
    let mut s = 0.0;
    for &ei in e {
        for &em in e {
            s += 2.0 * (em - ei) * (-beta * (2.0 * ei + em)).exp();
        }
    }
    s / z.powi(3)
}

/// Analytic `∂β ‖r_i‖ = Z⁻³ sum_{j,m} (2E_m − E_j − E_{j+i}) e^{−β(E_m + E_j + E_{j+i})}`.
pub fn d_norm_r(spectrum: &EnergySpectrum, beta: f64, i: usize) -> f64 {
    let e = spectrum.energies();
    let d = e.len();
    let z: f64 = e.iter().map(|x| (-beta * x).exp()).sum();
    let mut s = 0.0;
    for j in 0..d {
        let pair = e[j] + e[(j + i) % d];
        for &em in e {
            s += (2.0 * em - pair) * (-beta * (em + pair)).exp();
        }
    }
    s / z.powi(3)
}

/// Closed form of `∂β ‖r_2‖` in `d = 4`, written out term by term.
pub fn d_norm_r2_d4(spectrum: &EnergySpectrum, beta: f64) -> Option<f64> {
    let e = spectrum.energies();
    if e.len() != 4 {
        return None;
    }
    let (e1, e2, e3) = (e[1], e[2], e[3]);
    let x = |s: f64| (-beta * s).exp();
    let z: f64 = e.iter().map(|v| x(*v)).sum();
    let t1 = e1 * (x(e2) + 2.0 * x(e1 + e3) - x(e1 + e2) - x(2.0 * e2) - x(e2 + e3));
    let t2 = (e2 - e1)
        * (x(e2) + x(e1 + e3) + x(e1 + e2) + x(2.0 * e1 + e3)
            - x(2.0 * e2)
            - x(e1 + e2 + e3)
            - x(e2 + e3)
            - x(e1 + 2.0 * e3));
    let t3 = (e3 - e2)
        * (x(e1 + e3) + x(2.0 * e1 + e3) + x(e1 + e2 + e3) - 2.0 * x(e2 + e3) - x(e1 + 2.0 * e3));
    Some(-2.0 / z.powi(3) * (t1 + t2 + t3))
}

/// Derivatives of the subspace norms in `β`, by central difference and
/// analytically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDerivatives {
    pub step: f64,
    pub dq_fd: f64,
    pub dq_analytic: f64,
    /// Indexed by `i - 1` for `i = 1..d-1`.
    pub dr_fd: Vec<f64>,
    pub dr_analytic: Vec<f64>,
    /// Term-by-term closed form for `∂β ‖r_2‖` when `d = 4`.
    pub dr2_closed_d4: Option<f64>,
}

impl NormDerivatives {
    pub fn at(spectrum: &EnergySpectrum, beta: f64) -> Self {
        let h = 1e-5 * beta.max(1.0);
        let (qp, rp) = norms_at(spectrum, beta + h);
        let (qm, rm) = norms_at(spectrum, beta - h);
        let d = spectrum.dim();
        Self {
            step: h,
            dq_fd: (qp - qm) / (2.0 * h),
            dq_analytic: d_norm_q(spectrum, beta),
            dr_fd: rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            dr_analytic: (1..d).map(|i| d_norm_r(spectrum, beta, i)).collect(),
            dr2_closed_d4: d_norm_r2_d4(spectrum, beta),
        }
    }

    /// Largest disagreement between finite differences and the analytic forms.
    pub fn max_mismatch(&self) -> f64 {
        let mut m = (self.dq_fd - self.dq_analytic).abs();
        for (a, b) in self.dr_fd.iter().zip(&self.dr_analytic) {
            m = m.max((a - b).abs());
        }
        if let (Some(c), Some(a)) = (self.dr2_closed_d4, self.dr_analytic.get(1)) {
            m = m.max((c - a).abs());
        }
        m
    }
}

/// Subspace norms at `β` and `β′` with the majorisation flags of the
/// norm-passing conditions. Per-`i` vectors cover `i = 1..⌊d/2⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub d: usize,
    pub beta: InverseTemperature,
    pub beta_prime: InverseTemperature,
    pub norm_q: f64,
    pub norm_a: f64,
    pub norm_r: Vec<f64>,
    pub norm_b: Vec<f64>,
    /// `q̂ ≻ â`.
    pub q_majorizes_a: bool,
    /// `r̂_i ≻ b̂_i`.
    pub r_majorizes_b: Vec<bool>,
    /// `q̂ ≻ b̂_i`.
    pub q_majorizes_b: Vec<bool>,
    /// `q̂ ≻ (1 + Π^i) b_i / (2‖b_i‖)`.
    pub q_majorizes_sym_b: Vec<bool>,
    /// `‖q‖ + sum_i 2 c_i ‖r_i‖ − 1`.
    pub norm_identity_residual: f64,
    /// `None` at infinite `β`.
    pub derivatives: Option<NormDerivatives>,
}

fn decompositions(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<(LcsDecomposition, LcsDecomposition)> {
    if beta_prime.value() > beta.value() {
        return Err(Error::InvalidArgument(format!(
            "beta_prime {beta_prime} exceeds beta {beta}"
        )));
    }
    Ok((thermal_decomposition(spectrum, beta)?, thermal_decomposition(spectrum, beta_prime)?))
}

/// Norms, flags and norm derivatives for the pair `β′ <= β`.
pub fn decomposition_norms(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<NormReport> {
    let (dec, tgt) = decompositions(spectrum, beta, beta_prime)?;
    let d = dec.d;
    let k = independent_count(d);
    let norm_r: Vec<f64> = (1..=k).map(|i| dec.norm_r(i)).collect();
    let identity: f64 =
        dec.norm_q() + (1..=k).map(|i| 2.0 * midpoint_weight(i, d) * dec.norm_r(i)).sum::<f64>();
    Ok(NormReport {
        d,
        beta,
        beta_prime,
        norm_q: dec.norm_q(),
        norm_a: tgt.norm_q(),
        norm_b: (1..=k).map(|i| tgt.norm_r(i)).collect(),
        norm_r,
        q_majorizes_a: normalized_majorizes(&dec.q, &tgt.q),
        r_majorizes_b: (1..=k).map(|i| normalized_majorizes(dec.subspace(i), tgt.subspace(i))).collect(),
        q_majorizes_b: (1..=k).map(|i| normalized_majorizes(&dec.q, tgt.subspace(i))).collect(),
        q_majorizes_sym_b: (1..=k)
            .map(|i| normalized_majorizes(&dec.q, &symmetrized(tgt.subspace(i), i)))
            .collect(),
        norm_identity_residual: identity - 1.0,
        derivatives: match beta {
            InverseTemperature::Finite(b) => Some(NormDerivatives::at(spectrum, b)),
            InverseTemperature::Infinite => None,
        },
    })
}

/// Which of the norm-passing conditions hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `‖q‖ >= ‖a‖`, `q̂ ≻ â` and `r̂_i ≻ b̂_i` for all `i`.
    pub cond_i: bool,
    /// `‖r_i‖ <= ‖b_i‖` and `q̂ ≻ (1 + Π^i) b_i / (2‖b_i‖)` for all `i`.
    pub cond_ii_strong: bool,
    /// `w = a + sum_i c_i (1 − ‖r_i‖/‖b_i‖)(1 + Π^i) b_i` is nonnegative
    /// and majorised by `q`.
    pub cond_ii_weak: bool,
    /// The vector `w` of the weak condition.
    pub weak_target: Vec<f64>,
    /// Names of the failing sub-conditions.
    pub witnesses: Vec<String>,
    pub norms: NormReport,
}

/// Evaluates conditions (i), strong (ii) and weak (ii).
pub fn check_conditions(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<ConditionReport> {
    let norms = decomposition_norms(spectrum, beta, beta_prime)?;
    let (dec, tgt) = decompositions(spectrum, beta, beta_prime)?;
    let d = dec.d;
    let k = independent_count(d);
    let mut witnesses = Vec::new();
    if norms.norm_q < norms.norm_a - ROUNDING_GUARD {
        witnesses.push("norm q < norm a".to_string());
    }
    if !norms.q_majorizes_a {
        witnesses.push("q̂ does not majorise â".to_string());
    }
    for i in 1..=k {
        if !norms.r_majorizes_b[i - 1] {
            witnesses.push(format!("r̂_{i} does not majorise b̂_{i}"));
        }
    }
    let cond_i = witnesses.is_empty();
    let mut strong = true;
    for i in 1..=k {
        if norms.norm_r[i - 1] > norms.norm_b[i - 1] + ROUNDING_GUARD {
            strong = false;
            witnesses.push(format!("norm r_{i} > norm b_{i}"));
        }
        if !norms.q_majorizes_sym_b[i - 1] {
            strong = false;
            witnesses.push(format!("q̂ does not majorise (1+Π^{i}) b̂_{i} / 2"));
        }
    }
    let mut w = tgt.q.clone();
    for i in 1..=k {
        let nb = tgt.norm_r(i);
        if nb == 0.0 {
            continue;
        }
        let coef = 2.0 * midpoint_weight(i, d) * (1.0 - dec.norm_r(i) / nb);
        for (wj, sj) in w.iter_mut().zip(symmetrized(tgt.subspace(i), i)) {
            *wj += coef * sj;
        }
    }
    let weak = w.iter().all(|&x| x >= -ROUNDING_GUARD)
        && majorization_slack(&dec.q, &w) >= -ROUNDING_GUARD;
    if !weak {
        witnesses.push("weak target not reachable from q".to_string());
    }
    Ok(ConditionReport {
        cond_i,
        cond_ii_strong: strong,
        cond_ii_weak: weak,
        weak_target: w,
        witnesses,
        norms,
    })
}

/// Convex weights of the `q` split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSplit {
    pub alpha_0: f64,
    /// `α_i` for `i = 1..⌊d/2⌋`.
    pub alpha: Vec<f64>,
}

impl AlphaSplit {
    /// `α_0 = ‖a‖/‖q‖`, `α_i = 2 c_i (‖b_i‖ − ‖r_i‖)/‖q‖`.
    pub fn from_norms(report: &NormReport) -> Self {
        let d = report.d;
        let alpha = (1..=independent_count(d))
            .map(|i| {
                2.0 * midpoint_weight(i, d) * (report.norm_b[i - 1] - report.norm_r[i - 1]) / report.norm_q
            })
            .collect();
        Self { alpha_0: report.norm_a / report.norm_q, alpha }
    }

    pub fn sum(&self) -> f64 {
        self.alpha_0 + self.alpha.iter().sum::<f64>()
    }
}

fn hat(v: &[f64]) -> Result<Vec<f64>> {
    normalized(v).ok_or_else(|| Error::ConditionsNotMet("zero-norm subspace vector".into()))
}

/// Equal-marginal transform of the norm-passing construction.
pub fn norm_transform(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<SymmetricTransform> {
    if beta.is_infinite() {
        return Err(Error::InvalidBeta(f64::INFINITY));
    }
    let d = spectrum.dim();
    if beta == beta_prime {
        return Ok(SymmetricTransform::identity(d));
    }
    let cond = check_conditions(spectrum, beta, beta_prime)?;
    if !(cond.cond_i && cond.cond_ii_strong) {
        return Err(Error::ConditionsNotMet(cond.witnesses.join("; ")));
    }
    let (dec, tgt) = decompositions(spectrum, beta, beta_prime)?;
    let split = AlphaSplit::from_norms(&cond.norms);
    let q_hat = hat(&dec.q)?;
    let (to_a, _) = hlp_construct(&q_hat, &hat(&tgt.q)?)?;
    let mut terms = vec![(split.alpha_0, to_a)];
    let mut m_r = Vec::new();
    for i in 1..=independent_count(d) {
        let b_hat = hat(tgt.subspace(i))?;
        let (m, _) = hlp_construct(&hat(dec.subspace(i))?, &b_hat)?;
        m_r.push(m);
        let (to_b, _) = hlp_construct(&q_hat, &symmetrized(&b_hat, i))?;
        terms.push((split.alpha[i - 1], to_b));
    }
    let refs: Vec<(f64, &DoublyStochasticMatrix)> = terms.iter().map(|(w, m)| (*w, m)).collect();
    let m_q = DoublyStochasticMatrix::mixture(&refs)?;
    SymmetricTransform::new(m_q, m_r)
}

/// STU from `β` to `β′` by passing norm from `q` to the `r_i`.
pub fn build_stu_norm(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<BlockUnitary> {
    let transform = norm_transform(spectrum, beta, beta_prime)?;
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
    fn equal_temperatures_trivial() {
        let r = decomposition_norms(&spec(&[0.0, 1.0, 2.0]), b(1.0), b(1.0)).unwrap();
        assert_eq!(r.norm_q, r.norm_a);
        assert!(r.q_majorizes_a && r.r_majorizes_b.iter().all(|&f| f));
        assert!(r.norm_identity_residual.abs() < 1e-14);
    }

    #[test]
    fn lemma_flags_d3() {
        let r = decomposition_norms(&spec(&[0.0, 1.0, 2.0]), b(1.0), b(0.5)).unwrap();
        assert!(r.norm_q > r.norm_a);
        assert!(r.r_majorizes_b[0]);
        let c = check_conditions(&spec(&[0.0, 1.0, 2.0]), b(2.0), b(1.0)).unwrap();
        assert!(c.cond_i && c.cond_ii_strong, "{:?}", c.witnesses);
    }

    #[test]
    fn rank_deficient_target_fails() {
        let r = decomposition_norms(&spec(&[0.0, 1.0, 1e6]), b(1.0), b(0.5)).unwrap();
        assert!(!r.q_majorizes_b[0]);
    }

    #[test]
    fn d4_gap_regimes() {
        let c = check_conditions(&spec(&[0.0, 1.0, 1.8, 2.4]), b(1.5), b(0.7)).unwrap();
        assert!(c.cond_ii_strong, "{:?}", c.witnesses);
        let c = check_conditions(&spec(&[0.0, 0.01, 0.02, 50.0]), b(1.0), b(0.5)).unwrap();
        assert!(!c.cond_ii_strong);
    }

    #[test]
    fn derivatives_agree() {
        for e in [[0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.9, 2.5], [0.0, 1.0, 1.2, 5.0]] {
            for beta in [0.05, 0.7, 3.0] {
                let dv = NormDerivatives::at(&spec(&e), beta);
                assert!(dv.max_mismatch() < 1e-8, "{e:?} {beta} {dv:?}");
                assert!(dv.dq_analytic >= 0.0);
                assert!(dv.dr_analytic[0] <= 0.0);
            }
        }
    }

    #[test]
    fn builds_pass() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let u = build_stu_norm(&s, b(1.0), b(0.3)).unwrap();
        assert!(verify_stu(&u, &s, b(1.0), b(0.3), 1e-9).unwrap().pass);
        let s = spec(&[0.0, 1.0, 1.9, 2.5]);
        let u = build_stu_norm(&s, b(2.0), b(1.0)).unwrap();
        let r = verify_stu(&u, &s, b(2.0), b(1.0), 1e-9).unwrap();
        assert!(r.pass, "{r:?}");
        let split = AlphaSplit::from_norms(&decomposition_norms(&s, b(2.0), b(1.0)).unwrap());
        assert!((split.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn increasing_gaps_refused() {
        let s = spec(&[0.0, 0.01, 0.02, 50.0]);
        assert!(matches!(build_stu_norm(&s, b(1.0), b(0.5)), Err(Error::ConditionsNotMet(_))));
    }
}
