//! Analytic derivatives of the thermal curve in reduced coordinates and the
//! sign facts the geometric construction relies on.
//!
//! With `E_0 = 0`, every coordinate satisfies `∂x_n/∂β = −Z⁻² F_n` for an
//! explicit `F_n`. Slopes are `∂x_v/∂x_u = F_v/F_u` and curvatures are
//! `∂²x_v/∂x_u² = Z² F_u⁻³ (F_v F_u' − F_u F_v')`, where `'` is `∂/∂β`.

use serde::Serialize;

use super::{d4_generators, perm_transform, to_coords};
use crate::block_unitary::{thermal_decomposition, SymmetricTransform};
use crate::error::{Error, Result};
use crate::majorize::DoublyStochasticMatrix;
use crate::spectra::{thermal_probs, EnergySpectrum, InverseTemperature};

/// Relative tolerance for analytic against numerical derivatives.
pub const DERIVATIVE_TOL: f64 = 1e-6;
/// Absolute slack allowed on sign claims.
pub const SIGN_GUARD: f64 = 1e-13;

fn shifted(spectrum: &EnergySpectrum) -> Vec<f64> {
    let e = spectrum.energies();
    e.iter().map(|x| x - e[0]).collect()
}

/// Thermal probabilities for any real `beta`.
fn probs(e: &[f64], beta: f64) -> Vec<f64> {
    let w: Vec<f64> = e.iter().map(|x| (-beta * x).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// `x_n + 1 = (n+2) p_{n+1} + sum_{i>=n+2} p_i`, which keeps relative
/// accuracy when `x_n` approaches `−1`.
fn tails(e: &[f64], beta: f64) -> Vec<f64> {
    let p = probs(e, beta);
    (0..p.len() - 1).map(|n| (n + 2) as f64 * p[n + 1] + p[n + 2..].iter().sum::<f64>()).collect()
}

/// Richardson-extrapolated central first and second differences.
fn derivatives<F: Fn(f64) -> Vec<f64>>(f: F, beta: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let c = f(beta);
    let diffs = |h: f64| {
        let (p, m) = (f(beta + h), f(beta - h));
        let d1: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let d2: Vec<f64> = p.iter().zip(&m).zip(&c).map(|((a, b), c)| (a - 2.0 * c + b) / (h * h)).collect();
        (d1, d2)
    };
    let (a1, a2) = diffs(h);
    let (b1, b2) = diffs(h / 2.0);
    let rich = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    (rich(&a1, &b1), rich(&a2, &b2))
}

/// `(Z, F, F')` for `d = 3` or `d = 4`, energies shifted so that `E_0 = 0`.
fn curve_functions(e: &[f64], beta: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let x = |s: f64| (-beta * s).exp();
    match e.len() {
        3 => {
            let (e1, e2) = (e[1], e[2]);
            let z = 1.0 + x(e1) + x(e2);
            let fx = e1 * x(e1) * (2.0 + x(e2)) + e2 * x(e2) * (1.0 - x(e1));
            let fy = (e2 - e1) * x(e1 + e2) + e2 * x(e2);
            let dfx = (e2 * e2 - e1 * e1) * x(e1 + e2) - 2.0 * e1 * e1 * x(e1) - e2 * e2 * x(e2);
            let dfy = -(e2 * e2 - e1 * e1) * x(e1 + e2) - e2 * e2 * x(e2);
            (z, vec![fx, 3.0 * fy], vec![dfx, 3.0 * dfy])
        }
        4 => {
            let (e1, e2, e3) = (e[1], e[2], e[3]);
            let z = 1.0 + x(e1) + x(e2) + x(e3);
            let fx = e1 * x(e1) * (2.0 + x(e2) + x(e3)) + (e2 * x(e2) + e3 * x(e3)) * (1.0 - x(e1));
            let fy = 3.0 * (e2 - e1) * x(e1 + e2)
                + 3.0 * e2 * x(e2)
                + e3 * x(e3) * (1.0 + x(e1) - 2.0 * x(e2))
                + x(e3) * (2.0 * e2 * x(e2) - e1 * x(e1));
            let fz = 4.0 * x(e3) * (e3 + x(e1) * (e3 - e1) + x(e2) * (e3 - e2));
            let dfx = -e1 * e1 * x(e1) * (2.0 + x(e2) + x(e3)) - (e2 * e2 * x(e2) + e3 * e3 * x(e3)) * (1.0 - x(e1));
            let dfy = e1 * e1 * x(e1) * (3.0 * x(e2) + x(e3))
                - e2 * e2 * x(e2) * (3.0 + 3.0 * x(e1) + 2.0 * x(e3))
                - e3 * e3 * x(e3) * (1.0 + x(e1) - 2.0 * x(e2));
            let dfz = 4.0 * x(e3) * (e1 * e1 * x(e1) + e2 * e2 * x(e2) - e3 * e3 * (1.0 + x(e1) + x(e2)));
            (z, vec![fx, fy, fz], vec![dfx, dfy, dfz])
        }
        d => unreachable!("curve functions requested for d = {d}"),
    }
}

/// Printed closed forms of the curvature numerators `F_v F_u' − F_u F_v'`,
/// indexed like [`ConvexityPoint::pairs`].
fn closed_form_combos(e: &[f64], beta: f64, z: f64) -> Vec<f64> {
    let x = |s: f64| (-beta * s).exp();
    match e.len() {
        3 => {
            let (e1, e2) = (e[1], e[2]);
            // F_y carries the factor 3 of the y coordinate.
            vec![6.0 * z * e1 * e2 * (e2 - e1) * x(e1 + e2)]
        }
        _ => {
            let (e1, e2, e3) = (e[1], e[2], e[3]);
            let c1 = 2.0 * (e1 * e2 * x(e1 + e2) * (e2 - e1) + e1 * e3 * x(e1 + e3) * (e3 - e1)) * (3.0 + x(e3)) * z
                + 2.0 * e2 * e3 * x(e2 + e3) * (e3 - e2) * (1.0 + x(e1)) * (2.0 + 2.0 * x(e1) - x(e2) + x(e3));
            let c2 = 4.0
                * z
                * x(e3)
                * (e1 * x(e1) * (e2 - e1) * (x(e2) * (e3 - e2) + 2.0 * e3)
                    + (e3 - e2) * e3 * (e1 * x(e1 + e2) + 2.0 * e1 * x(e1) + e2 * x(e2) * (1.0 - x(e1))));
            let c3 = 12.0
                * z
                * x(e2 + e3)
                * (e3 - e2)
                * (e1 * e1 * x(e1) + e3 * (e2 - e1) * x(e1) + e2 * (e3 - x(e1) * e1));
            vec![c1, c2, c3]
        }
    }
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(scale);
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Derivative data at one inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityPoint {
    pub beta: f64,
    pub z: f64,
    /// `F_n` with `∂x_n/∂β = −Z⁻² F_n`.
    pub f: Vec<f64>,
    /// `∂F_n/∂β`, analytic.
    pub df: Vec<f64>,
    /// `∂F_n/∂β` by finite differences of `F`.
    pub df_fd: Vec<f64>,
    /// `∂x_n/∂β` from `F`.
    pub dx: Vec<f64>,
    /// `∂x_n/∂β` by finite differences of the coordinates.
    pub dx_fd: Vec<f64>,
    /// Coordinate pairs `(u, v)` examined.
    pub pairs: Vec<(usize, usize)>,
    /// `∂x_v/∂x_u` per pair.
    pub slopes: Vec<f64>,
    /// `∂²x_v/∂x_u²` from `F` and `F'`.
    pub curvatures: Vec<f64>,
    /// `∂²x_v/∂x_u²` from finite differences of the coordinates.
    pub curvatures_fd: Vec<f64>,
    /// `F_v F_u' − F_u F_v'` computed directly.
    pub combos: Vec<f64>,
    /// The same numerators from their printed closed forms.
    pub combos_closed: Vec<f64>,
    pub max_rel_error: f64,
    pub signs_ok: bool,
}

/// Certifies the convexity facts for `d = 3` or `d = 4` over a grid of `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub d: usize,
    pub points: Vec<ConvexityPoint>,
    /// `d = 4` only: generator points and cross products at each `β`.
    pub cross_products: Vec<CrossProductsD4>,
    pub max_rel_error: f64,
    pub sign_violations: usize,
    /// Closed forms that disagree with direct evaluation (informational).
    pub closed_form_mismatches: Vec<String>,
}

impl ConvexityReport {
    pub fn derivatives_ok(&self) -> bool {
        self.max_rel_error <= DERIVATIVE_TOL
    }

    pub fn signs_ok(&self) -> bool {
        self.sign_violations == 0
    }
}

fn convexity_point(e: &[f64], beta: f64) -> ConvexityPoint {
    let d = e.len();
    let (z, f, df) = curve_functions(e, beta);
    let h = 0.02 / e[d - 1].max(1.0);
    let (df_fd, _) = derivatives(|b| curve_functions(e, b).1, beta, h);
    let (dx_fd, d2x_fd) = derivatives(|b| tails(e, b), beta, h);
    let dx: Vec<f64> = f.iter().map(|v| -v / (z * z)).collect();
    let pairs: Vec<(usize, usize)> = if d == 3 { vec![(0, 1)] } else { vec![(0, 1), (0, 2), (1, 2)] };
    let mut slopes = Vec::new();
    let mut curvatures = Vec::new();
    let mut curvatures_fd = Vec::new();
    let mut combos = Vec::new();
    let mut max_rel_error: f64 = 0.0;
    for &(u, v) in &pairs {
        slopes.push(f[v] / f[u]);
        let combo = f[v] * df[u] - f[u] * df[v];
        combos.push(combo);
        let curv = z * z * combo / f[u].powi(3);
        curvatures.push(curv);
        let num = dx_fd[u] * d2x_fd[v] - dx_fd[v] * d2x_fd[u];
        let curv_fd = num / dx_fd[u].powi(3);
        let scale = (dx_fd[u] * d2x_fd[v]).abs().max((dx_fd[v] * d2x_fd[u]).abs()) / dx_fd[u].abs().powi(3);
        curvatures_fd.push(curv_fd);
        max_rel_error = max_rel_error.max(rel_err(curv, curv_fd, scale));
    }
    for n in 0..d - 1 {
        max_rel_error = max_rel_error.max(rel_err(dx[n], dx_fd[n], 0.0));
        max_rel_error = max_rel_error.max(rel_err(df[n], df_fd[n], 0.0));
    }
    let combos_closed = closed_form_combos(e, beta, z);
    let signs_ok = f.iter().all(|&v| v >= 0.0)
        && slopes.iter().all(|&s| s >= 0.0)
        && combos.iter().zip(&pairs).all(|(&c, &(u, v))| c >= -SIGN_GUARD * (f[v] * df[u]).abs().max((f[u] * df[v]).abs()));
    ConvexityPoint {
        beta,
        z,
        f,
        df,
        df_fd,
        dx,
        dx_fd,
        pairs,
        slopes,
        curvatures,
        curvatures_fd,
        combos,
        combos_closed,
        max_rel_error,
        signs_ok,
    }
}

/// Derivative and sign certification over the given inverse temperatures.
pub fn convexity_certify(spectrum: &EnergySpectrum, betas: &[f64]) -> Result<ConvexityReport> {
    let d = spectrum.dim();
    if !(3..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let e = shifted(spectrum);
    let points: Vec<ConvexityPoint> = betas.iter().map(|&b| convexity_point(&e, b)).collect();
    let cross_products = if d == 4 {
        betas
            .iter()
            .map(|&b| cross_products_d4(spectrum, InverseTemperature::new(b)?))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let max_rel_error = points.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    let sign_violations = points.iter().filter(|p| !p.signs_ok).count()
        + cross_products.iter().filter(|c| !c.all_signs_ok()).count();
    let mut closed_form_mismatches = Vec::new();
    for p in &points {
        for (i, (a, b)) in p.combos.iter().zip(&p.combos_closed).enumerate() {
            if rel_err(*a, *b, 0.0) > 1e-9 {
                let name = format!("curvature numerator {}", i + 1);
                if !closed_form_mismatches.contains(&name) {
                    closed_form_mismatches.push(name);
                }
            }
        }
    }
    for c in &cross_products {
        for name in c.closed_form_mismatches() {
            if !closed_form_mismatches.contains(&name) {
                closed_form_mismatches.push(name);
            }
        }
    }
    Ok(ConvexityReport { d, points, cross_products, max_rel_error, sign_violations, closed_form_mismatches })
}

/// `z`-component of `(Y − X) × (W − X)`.
fn cross_z(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    (y[0] - x[0]) * (w[1] - x[1]) - (y[1] - x[1]) * (w[0] - x[0])
}

/// Generator points `A..E` in `d = 4` and the signs making the pentagon
/// `A, E, D, C` wind around the axis point `Õ = (0, 0, z(β))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossProductsD4 {
    pub beta: InverseTemperature,
    pub points: Vec<(String, Vec<f64>)>,
    pub x_c: f64,
    pub y_d: f64,
    pub x_e: f64,
    pub ao_ae: f64,
    pub eo_ed: f64,
    pub do_dc: f64,
    /// Printed closed forms `(name, direct, closed)`.
    pub closed_forms: Vec<(String, f64, f64)>,
}

impl CrossProductsD4 {
    pub fn all_signs_ok(&self) -> bool {
        self.x_c >= -SIGN_GUARD
            && self.y_d >= -SIGN_GUARD
            && self.x_e <= SIGN_GUARD
            && self.ao_ae >= -SIGN_GUARD
            && self.eo_ed >= -SIGN_GUARD
            && self.do_dc >= -SIGN_GUARD
    }

    pub fn closed_form_mismatches(&self) -> Vec<String> {
        self.closed_forms
            .iter()
            .filter(|(_, a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-3))
            .map(|(n, _, _)| n.clone())
            .collect()
    }
}

/// Evaluates the `d = 4` generator points and cross products at `β`.
pub fn cross_products_d4(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Result<CrossProductsD4> {
    if spectrum.dim() != 4 {
        return Err(Error::UnsupportedDimension(spectrum.dim()));
    }
    let dec = thermal_decomposition(spectrum, beta)?;
    let points: Vec<(String, Vec<f64>)> = d4_generators()
        .iter()
        .map(|(name, g)| (name.to_string(), to_coords(&perm_transform(g).marginal(&dec))))
        .collect();
    let [a, b, c, d, e] = [0, 1, 2, 3, 4].map(|i| points[i].1.clone());
    let o = vec![0.0, 0.0, a[2]];
    let p = thermal_probs(spectrum, beta);
    let (p0, p1, p2, p3) = (p[0], p[1], p[2], p[3]);
    let closed_forms = vec![
        ("x(B)".to_string(), b[0], (p0 - p1) * (2.0 * p0 + 2.0 * p1 - 1.0)),
        ("x(C)".to_string(), c[0], (p0 - p1) * (2.0 * p0 + 2.0 * p1 + p2 - 1.0) + (p1 - p2) * (p0 + p1 + p2)),
        (
            "y(D)".to_string(),
            d[1],
            3.0 * (p0 - p1) * (p0 + p1 + p2 - 1.0 / 3.0) + 3.0 * (p1 - p2) * (p0 + p1 + p2 - 2.0 / 3.0),
        ),
        ("x(E)".to_string(), e[0], -((p0 - p1) * (1.0 - p0 - p1) + (p1 - p2) * (p1 + p2))),
        (
            "AO x AE".to_string(),
            cross_z(&a, &o, &e),
            (p0 - p1).powi(2) * (2.0 * p0 - 2.0 * p1 + 3.0 * p2)
                + (p0 - p1) * (p1 - p2) * (p0 - p1 + 4.0 * p2)
                + 2.0 * (p1 - p2).powi(2) * (p1 + p2),
        ),
        (
            "EO x ED".to_string(),
            cross_z(&e, &o, &d),
            2.0 * p1 * (p0 - p2) * ((p0 - p1) * (1.0 - p1 + p2) + (p1 - p2) * (p1 + 2.0 * p2 - p3)),
        ),
        (
            "DO x DC".to_string(),
            cross_z(&d, &o, &c),
            (p0 - p1).powi(2) * (p0 + p2) * ((3.0 * p0 + 3.0 * p1 - 1.0) + 3.0 * (p1 - p3))
                + (p0 - p1)
                    * (p1 - p2)
                    * (3.0 * (p0 - p1) * (p0 + p1) + 6.0 * p0 * (p2 - p3) + 2.0 * p2 * (2.0 * p0 + 5.0 * p1 + 2.0 * p2 - p3))
                + (p1 - p2).powi(2)
                    * ((p0 - 3.0 * p3 * (1.0 - p3) + 6.0 * p1 * p2)
                        + (p1 - p2)
                        + 3.0 * p2 * p2
                        + 2.0 * (p0 - p1) * (1.0 + 3.0 * p0)),
        ),
    ];
    Ok(CrossProductsD4 {
        beta,
        x_c: c[0],
        y_d: d[1],
        x_e: e[0],
        ao_ae: cross_z(&a, &o, &e),
        eo_ed: cross_z(&e, &o, &d),
        do_dc: cross_z(&d, &o, &c),
        points,
        closed_forms,
    })
}

/// `∂/∂β (x_m / x_{m-1})` for `m = 1..d-2`, as `(analytic, finite difference)`.
///
/// Nonpositive slopes are what make every curve coefficient nonnegative.
pub fn ratio_slopes(spectrum: &EnergySpectrum, beta: f64) -> Vec<(f64, f64)> {
    let e = shifted(spectrum);
    let d = e.len();
    // x_m is proportional to N_m = sum_{i<=m} (e^{−βE_{m+1}} − e^{−βE_i}).
    let n = |m: usize, b: f64| (0..=m).map(|i| (-b * e[m + 1]).exp() - (-b * e[i]).exp()).sum::<f64>();
    let dn = |m: usize| (0..=m).map(|i| -e[m + 1] * (-beta * e[m + 1]).exp() + e[i] * (-beta * e[i]).exp()).sum::<f64>();
    let h = 0.02 / e[d - 1].max(1.0);
    (1..d - 1)
        .map(|m| {
            let (a, b) = (n(m, beta), n(m - 1, beta));
            let analytic = (dn(m) * b - a * dn(m - 1)) / (b * b);
            let (fd, _) = derivatives(|t| vec![n(m, t) / n(m - 1, t)], beta, h);
            (analytic, fd[0])
        })
        .collect()
}

/// `d = 3` partner point: swap the two most populated levels in `q`, keep `r`.
/// Returns its reduced coordinates; it shares `y` with `p(β)` and has `x >= 0`.
pub fn swap_partner_d3(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Result<Vec<f64>> {
    if spectrum.dim() != 3 {
        return Err(Error::UnsupportedDimension(spectrum.dim()));
    }
    let dec = thermal_decomposition(spectrum, beta)?;
    let t = SymmetricTransform::new(
        DoublyStochasticMatrix::permutation(&[1, 0, 2]),
        vec![DoublyStochasticMatrix::identity(3)],
    )?;
    Ok(to_coords(&t.marginal(&dec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stu_geometric::thermal_coords_at;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    #[test]
    fn d3_certified() {
        let r = convexity_certify(&spec(&[0.0, 1.0, 2.7]), &[0.05, 0.5, 1.0, 3.0, 10.0]).unwrap();
        assert!(r.derivatives_ok(), "{}", r.max_rel_error);
        assert!(r.signs_ok());
        assert!(r.closed_form_mismatches.is_empty(), "{:?}", r.closed_form_mismatches);
    }

    #[test]
    fn d4_certified() {
        let r = convexity_certify(&spec(&[0.0, 1.0, 1.7, 4.2]), &[0.05, 0.5, 1.0, 3.0, 10.0]).unwrap();
        assert!(r.derivatives_ok(), "{}", r.max_rel_error);
        assert!(r.signs_ok());
        // Only the first printed numerator disagrees with direct evaluation.
        assert!(!r.closed_form_mismatches.iter().any(|n| n.contains("numerator 2") || n.contains("numerator 3")));
    }

    #[test]
    fn d4_points_share_height() {
        let c = cross_products_d4(&spec(&[0.0, 1.0, 2.0, 3.0]), InverseTemperature::Finite(1.0)).unwrap();
        let z = c.points[0].1[2];
        assert!(c.points.iter().all(|(_, p)| (p[2] - z).abs() < 1e-15));
        for name in ["x(B)", "x(C)", "y(D)", "x(E)", "EO x ED", "DO x DC"] {
            assert!(!c.closed_form_mismatches().contains(&name.to_string()), "{name}");
        }
    }

    #[test]
    fn ratio_slopes_nonpositive() {
        for (a, fd) in ratio_slopes(&spec(&[0.0, 1.0, 2.5, 3.0, 6.0]), 0.7) {
            assert!(a <= 0.0);
            assert!((a - fd).abs() <= 1e-7 * a.abs().max(1e-6));
        }
    }

    #[test]
    fn swap_partner_shares_y() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let partner = swap_partner_d3(&s, InverseTemperature::Finite(1.3)).unwrap();
        let x = thermal_coords_at(&s, 1.3);
        assert!((partner[1] - x[1]).abs() < 1e-15);
        assert!(partner[0] >= 0.0);
    }
}
