//! Brute-force checks that do not go through the constructions.
//!
//! Random block unitaries are drawn directly, respecting only the symmetry
//! needed for equal marginals, and their marginals are tested against the
//! enumerated polytope. Cross-method checks build the same STU with every
//! applicable construction and compare the results.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::block_unitary::{assemble_and_apply, partial_trace_marginals, verify_stu, BlockUnitary};
use crate::error::{Error, Result};
use crate::lcs::{independent_count, is_midpoint};
use crate::majorize::OrthogonalMatrix;
use crate::spectra::{EnergySpectrum, InverseTemperature};
use crate::stu_geometric::{build_stu_geometric, hull_membership, to_coords, vertex_set, MembershipCertificate};
use crate::stu_majorised::build_stu_majorised;
use crate::stu_norm::build_stu_norm;

/// Orthogonal matrix from the QR factorisation of a Gaussian matrix, with
/// the signs of `R`'s diagonal moved into `Q`.
pub fn random_orthogonal<R: rand::Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random orthogonal matrix commuting with the involution `Π^{d/2}`.
fn random_midpoint_block<R: rand::Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let h = d / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // Columns: symmetric combinations first, then antisymmetric ones.
    let v = DMatrix::from_fn(d, d, |i, c| {
        let (m, sign) = if c < h { (c, 1.0) } else { (c - h, -1.0) };
        if i == m {
            s
        } else if i == m + h {
            sign * s
        } else {
            0.0
        }
    });
    let mut inner = DMatrix::zeros(d, d);
    inner.view_mut((0, 0), (h, h)).copy_from(&random_orthogonal(h, rng));
    inner.view_mut((h, h), (h, h)).copy_from(&random_orthogonal(h, rng));
    &v * inner * v.transpose()
}

/// Random block unitary whose two marginals agree on any thermal product.
pub fn random_symmetric_blocks<R: rand::Rng>(d: usize, rng: &mut R) -> BlockUnitary {
    let mut blocks = vec![OrthogonalMatrix::identity(d); d];
    blocks[0] = OrthogonalMatrix::from_unchecked(random_orthogonal(d, rng));
    for i in 1..=independent_count(d) {
        if is_midpoint(i, d) {
            blocks[i] = OrthogonalMatrix::from_unchecked(random_midpoint_block(d, rng));
        } else {
            let u = OrthogonalMatrix::from_unchecked(random_orthogonal(d, rng));
            let pi: Vec<usize> = (0..d).map(|j| (j + i) % d).collect();
            blocks[d - i] = u.permuted(&pi);
            blocks[i] = u;
        }
    }
    BlockUnitary { blocks }
}

/// Sampled marginals with their hull certificates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachabilitySample {
    pub seed: u64,
    pub count: usize,
    /// Reduced coordinates of each sampled marginal.
    pub points: Vec<Vec<f64>>,
    #[serde(skip)]
    pub generators: Vec<BlockUnitary>,
    /// Largest `‖diag ρ_A − diag ρ_B‖∞` over the samples.
    pub max_asymmetry: f64,
    /// Largest phase-1 gap over the samples.
    pub max_gap: f64,
    /// Samples not certified inside the polytope.
    pub escapes: usize,
}

/// Draws `count` random symmetric block unitaries and certifies every
/// resulting marginal inside the vertex polytope (`d <= 4`).
pub fn sample_reachable(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    count: usize,
    seed: u64,
) -> Result<ReachabilitySample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generators: Vec<BlockUnitary> = (0..count).map(|_| random_symmetric_blocks(spectrum.dim(), &mut rng)).collect();
    certify_blocks(spectrum, beta, seed, generators)
}

/// Hull certification of marginals produced by the given blocks.
pub fn certify_blocks(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    seed: u64,
    generators: Vec<BlockUnitary>,
) -> Result<ReachabilitySample> {
    let d = spectrum.dim();
    if d > 4 {
        return Err(Error::UnsupportedDimension(d));
    }
    let set = vertex_set(spectrum, beta, false)?;
    let mut points = Vec::with_capacity(generators.len());
    let mut max_asymmetry: f64 = 0.0;
    let mut max_gap: f64 = 0.0;
    let mut escapes = 0;
    for blocks in &generators {
        let (ra, rb) = partial_trace_marginals(&assemble_and_apply(blocks, spectrum, beta)?);
        let a: Vec<f64> = ra.diagonal().iter().copied().collect();
        let asym = (0..d).map(|i| (ra[(i, i)] - rb[(i, i)]).abs()).fold(0.0, f64::max);
        max_asymmetry = max_asymmetry.max(asym);
        let x = to_coords(&a);
        let cert: MembershipCertificate = hull_membership(&x, &set)?;
        max_gap = max_gap.max(cert.gap);
        if !cert.feasible {
            escapes += 1;
        }
        points.push(x);
    }
    Ok(ReachabilitySample { seed, count: generators.len(), points, generators, max_asymmetry, max_gap, escapes })
}

/// Result of one construction inside [`cross_method_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutcome {
    pub method: String,
    pub built: bool,
    pub error: Option<String>,
    pub deviation: Option<f64>,
    pub delta_e: Option<f64>,
    pub delta_i: Option<f64>,
    pub pass: bool,
}

/// Every applicable construction for the same `(β, β′)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossMethodReport {
    pub beta: InverseTemperature,
    pub beta_prime: InverseTemperature,
    pub outcomes: Vec<MethodOutcome>,
    /// All built STUs pass and their invested energies agree within the tolerance.
    pub agree: bool,
    /// Number of methods that built a passing STU.
    pub passing: usize,
}

/// Builds the STU with every construction that applies to the dimension.
pub fn cross_method_check(
    spectrum: &EnergySpectrum,
    beta: InverseTemperature,
    beta_prime: InverseTemperature,
    tol: f64,
) -> Result<CrossMethodReport> {
    let d = spectrum.dim();
    type Builder = fn(&EnergySpectrum, InverseTemperature, InverseTemperature) -> Result<BlockUnitary>;
    let mut methods: Vec<(&str, Builder)> = vec![("geometric", build_stu_geometric), ("norm", build_stu_norm)];
    if d == 3 {
        methods.push(("majorised", build_stu_majorised));
    }
    let mut outcomes = Vec::new();
    for (name, build) in methods {
        let outcome = match build(spectrum, beta, beta_prime).and_then(|u| verify_stu(&u, spectrum, beta, beta_prime, tol)) {
            Ok(r) => MethodOutcome {
                method: name.into(),
                built: true,
                error: None,
                deviation: Some(r.deviation()),
                delta_e: Some(r.delta_e),
                delta_i: Some(r.delta_i),
                pass: r.pass,
            },
            Err(e) => MethodOutcome {
                method: name.into(),
                built: false,
                error: Some(e.to_string()),
                deviation: None,
                delta_e: None,
                delta_i: None,
                pass: false,
            },
        };
        outcomes.push(outcome);
    }
    let built: Vec<&MethodOutcome> = outcomes.iter().filter(|o| o.built).collect();
    let energies: Vec<f64> = built.iter().filter_map(|o| o.delta_e).collect();
    let spread = energies.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - energies.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let agree = built.iter().all(|o| o.pass) && (energies.len() < 2 || spread <= tol);
    let passing = built.iter().filter(|o| o.pass).count();
    Ok(CrossMethodReport { beta, beta_prime, outcomes, agree, passing })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    #[test]
    fn orthogonal_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthogonal(4, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(4, 4)).abs().max() < 1e-14);
        let m = random_midpoint_block(4, &mut rng);
        let p = crate::lcs::CyclicPermutation::new(4, 2).matrix();
        assert!((&p * &m - &m * &p).abs().max() < 1e-14);
    }

    #[test]
    fn empty_and_identity_samples() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let b = InverseTemperature::Finite(1.0);
        assert_eq!(sample_reachable(&s, b, 0, 0).unwrap().points.len(), 0);
        let one = certify_blocks(&s, b, 0, vec![BlockUnitary::identity(3)]).unwrap();
        let x = to_coords(&crate::spectra::thermal_probs(&s, b));
        assert!(one.points[0].iter().zip(&x).all(|(a, c)| (a - c).abs() < 1e-15));
        assert_eq!(one.escapes, 0);
    }

    #[test]
    fn samples_inside_hull() {
        for e in [vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0, 3.5]] {
            let r = sample_reachable(&spec(&e), InverseTemperature::Finite(1.0), 200, 7).unwrap();
            assert_eq!(r.escapes, 0, "{e:?} gap {}", r.max_gap);
            assert!(r.max_asymmetry < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let a = sample_reachable(&s, InverseTemperature::Finite(1.0), 20, 9).unwrap();
        let b = sample_reachable(&s, InverseTemperature::Finite(1.0), 20, 9).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn methods_agree_d3() {
        let r = cross_method_check(&spec(&[0.0, 1.0, 2.0]), InverseTemperature::Finite(1.0), InverseTemperature::Finite(0.5), 1e-9)
            .unwrap();
        assert_eq!(r.passing, 3, "{r:?}");
        assert!(r.agree);
    }

    #[test]
    fn norm_refuses_increasing_gaps() {
        let r = cross_method_check(
            &spec(&[0.0, 0.01, 0.02, 50.0]),
            InverseTemperature::Finite(1.0),
            InverseTemperature::Finite(0.5),
            1e-9,
        )
        .unwrap();
        assert!(r.outcomes[0].pass);
        assert!(!r.outcomes[1].built);
        assert!(r.agree);
    }
}
