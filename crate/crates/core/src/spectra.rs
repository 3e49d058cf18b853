//! Energy spectra, thermal distributions, entropies and inverse-temperature
//! root finding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted local energy levels `E_0 = 0 <= E_1 <= ...`.
///
/// By default the spectrum is rescaled so that `E_1 = 1` whenever `E_1 > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    energies: Vec<f64>,
}

impl EnergySpectrum {
    /// Validates the levels and rescales them to units of `E_1`.
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        let mut spectrum = Self::raw(energies)?;
        let e1 = spectrum.energies[1];
        if e1 > 0.0 {
            for e in spectrum.energies.iter_mut() {
                *e /= e1;
            }
            spectrum.energies[1] = 1.0;
        }
        Ok(spectrum)
    }

    /// Validates the levels and keeps them in the given units.
    pub fn raw(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::InvalidSpectrum(format!(
                "need at least two levels, got {}",
                energies.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSpectrum("levels must be finite".into()));
        }
        if energies[0] != 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "first level must be 0, got {}",
                energies[0]
            )));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpectrum("levels must be nondecreasing".into()));
        }
        Ok(Self { energies })
    }

    /// Parses a comma-separated list such as `"0,1,2.5,4"`.
    pub fn parse(literal: &str, normalize: bool) -> Result<Self> {
        let energies = literal
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidSpectrum(format!("cannot parse level {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if normalize {
            Self::new(energies)
        } else {
            Self::raw(energies)
        }
    }

    /// Equally spaced levels `0, 1, ..., d-1`.
    pub fn equally_spaced(d: usize) -> Result<Self> {
        Self::raw((0..d).map(|i| i as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Gap `delta_i = E_{i+1} - E_i`.
    pub fn gap(&self, i: usize) -> f64 {
        self.energies[i + 1] - self.energies[i]
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// All gaps equal within `tol`.
    pub fn is_equally_spaced(&self, tol: f64) -> bool {
        let g = self.gaps();
        g.iter().all(|x| (x - g[0]).abs() <= tol)
    }

    /// Gaps nonincreasing, `delta_{i+1} <= delta_i`.
    pub fn has_decreasing_gaps(&self) -> bool {
        self.gaps().windows(2).all(|w| w[1] <= w[0])
    }

    /// Mean energy of the uniform distribution (infinite temperature).
    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.dim() as f64
    }

    /// Number of levels degenerate with the ground state.
    pub fn ground_degeneracy(&self) -> usize {
        self.energies.iter().filter(|&&e| e == self.energies[0]).count()
    }
}

impl fmt::Display for EnergySpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.energies.iter().map(|e| format!("{e}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Inverse temperature in `[0, +inf]`, with the ground-state limit kept
/// as a distinguished value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InverseTemperature {
    Finite(f64),
    Infinite,
}

impl InverseTemperature {
    pub const ZERO: Self = Self::Finite(0.0);

    /// Accepts any `beta >= 0`; `f64::INFINITY` maps to [`Self::Infinite`].
    pub fn new(beta: f64) -> Result<Self> {
        if beta == f64::INFINITY {
            Ok(Self::Infinite)
        } else if beta.is_finite() && beta >= 0.0 {
            Ok(Self::Finite(beta))
        } else {
            Err(Error::InvalidBeta(beta))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// The value as a float, `f64::INFINITY` for the ground state.
    pub fn value(self) -> f64 {
        match self {
            Self::Finite(b) => b,
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(b) => write!(f, "{b}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for InverseTemperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(Self::Infinite),
            t => {
                let b = t
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("cannot parse beta {t:?}")))?;
                Self::new(b)
            }
        }
    }
}

impl Serialize for InverseTemperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(b) => s.serialize_f64(*b),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for InverseTemperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(b) => Self::new(b).map_err(serde::de::Error::custom),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Gibbs distribution of a spectrum at a given inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalDistribution {
    pub probs: Vec<f64>,
    pub beta: InverseTemperature,
    pub spectrum: EnergySpectrum,
}

impl ThermalDistribution {
    /// Partition function `Z = sum_i exp(-beta E_i)`; `None` at infinite beta.
    pub fn partition_function(&self) -> Option<f64> {
        match self.beta {
            InverseTemperature::Infinite => None,
            InverseTemperature::Finite(b) => {
                Some(self.spectrum.energies().iter().map(|e| (-b * e).exp()).sum())
            }
        }
    }
}

/// Thermal populations `p_i = exp(-beta E_i) / Z`.
///
/// Since `E_0 = 0` the largest weight is exactly one, so `Z >= 1` and no
/// underflow of the normalization can occur.
pub fn thermal_vector(spectrum: &EnergySpectrum, beta: InverseTemperature) -> ThermalDistribution {
    let probs = thermal_probs(spectrum, beta);
    ThermalDistribution { probs, beta, spectrum: spectrum.clone() }
}

/// The bare probability vector of [`thermal_vector`].
pub fn thermal_probs(spectrum: &EnergySpectrum, beta: InverseTemperature) -> Vec<f64> {
    let e = spectrum.energies();
    match beta {
        InverseTemperature::Infinite => {
            let g = spectrum.ground_degeneracy();
            e.iter().map(|&x| if x == e[0] { 1.0 / g as f64 } else { 0.0 }).collect()
        }
        InverseTemperature::Finite(b) => {
            let w: Vec<f64> = e.iter().map(|&x| (-b * (x - e[0])).exp()).collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|x| x / z).collect()
        }
    }
}

/// Thermal populations at a float inverse temperature (`f64::INFINITY` allowed).
pub fn thermal_at(spectrum: &EnergySpectrum, beta: f64) -> Result<Vec<f64>> {
    Ok(thermal_probs(spectrum, InverseTemperature::new(beta)?))
}

/// Shannon entropy in nats with `0 ln 0 = 0`; nonpositive entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Mean energy `sum_i p_i E_i`.
pub fn energy(p: &[f64], spectrum: &EnergySpectrum) -> f64 {
    p.iter().zip(spectrum.energies()).map(|(a, b)| a * b).sum()
}

/// Entropy (nats) and mean energy (units of the spectrum) of a distribution.
pub fn entropy_and_energy(p: &[f64], spectrum: &EnergySpectrum) -> (f64, f64) {
    (entropy(p), energy(p, spectrum))
}

/// Mean thermal energy at a finite inverse temperature.
pub fn thermal_energy(spectrum: &EnergySpectrum, beta: f64) -> f64 {
    let p = thermal_probs(spectrum, InverseTemperature::Finite(beta));
    energy(&p, spectrum)
}

/// Inverse temperature whose thermal energy equals `target`.
///
/// Bisection on `[0, beta_hi]` with `beta_hi` doubled until the thermal energy
/// drops below the target.
pub fn beta_for_energy(spectrum: &EnergySpectrum, target: f64) -> Result<InverseTemperature> {
    let high = spectrum.mean_energy();
    let low = spectrum.energies()[0];
    let tol = 1e-10 * target.abs().max(1.0);
    let out_of_range = |lo: f64, hi: f64| Error::OutOfRange {
        target,
        low,
        high,
        bracket_low: lo,
        bracket_high: hi,
    };
    if !target.is_finite() || target < low - tol || target > high + tol {
        return Err(out_of_range(0.0, f64::INFINITY));
    }
    if target >= high - 1e-15 * high.max(1.0) {
        return Ok(InverseTemperature::ZERO);
    }
    if target <= low {
        return Ok(InverseTemperature::Infinite);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while thermal_energy(spectrum, hi) >= target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(InverseTemperature::Infinite);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if thermal_energy(spectrum, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e_lo = thermal_energy(spectrum, lo);
    let e_hi = thermal_energy(spectrum, hi);
    let beta = if (e_lo - target).abs() <= (e_hi - target).abs() { lo } else { hi };
    if (thermal_energy(spectrum, beta) - target).abs() > tol {
        return Err(out_of_range(lo, hi));
    }
    Ok(InverseTemperature::Finite(beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(e: &[f64]) -> EnergySpectrum {
        EnergySpectrum::new(e.to_vec()).unwrap()
    }

    fn oracle_thermal(e: &[f64], b: f64) -> Vec<f64> {
        let z: f64 = e.iter().map(|x| (-b * x).exp()).sum();
        e.iter().map(|x| (-b * x).exp() / z).collect()
    }

    #[test]
    fn normalizes_to_first_gap() {
        let s = spec(&[0.0, 2.0, 5.0]);
        assert_eq!(s.energies(), &[0.0, 1.0, 2.5]);
        let raw = EnergySpectrum::raw(vec![0.0, 2.0, 5.0]).unwrap();
        assert_eq!(raw.energies(), &[0.0, 2.0, 5.0]);
    }

    #[test]
    fn rejects_bad_spectra() {
        assert!(EnergySpectrum::new(vec![0.0]).is_err());
        assert!(EnergySpectrum::new(vec![0.5, 1.0]).is_err());
        assert!(EnergySpectrum::new(vec![0.0, 2.0, 1.0]).is_err());
        assert!(EnergySpectrum::parse("0,1,x", true).is_err());
    }

    #[test]
    fn gaps_and_spacing() {
        let s = spec(&[0.0, 1.0, 1.8, 2.4]);
        assert!((s.gap(1) - 0.8).abs() < 1e-15);
        assert!(s.has_decreasing_gaps());
        assert!(!s.is_equally_spaced(1e-12));
        assert!(spec(&[0.0, 1.0, 2.0, 3.0]).is_equally_spaced(1e-12));
    }

    #[test]
    fn thermal_limits() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let p0 = thermal_probs(&s, InverseTemperature::ZERO);
        assert!(p0.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let pinf = thermal_probs(&s, InverseTemperature::Infinite);
        assert_eq!(pinf, vec![1.0, 0.0, 0.0]);
        let deg = EnergySpectrum::raw(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(thermal_probs(&deg, InverseTemperature::Infinite), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn thermal_at_one() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let p = thermal_probs(&s, InverseTemperature::Finite(1.0));
        let expected = oracle_thermal(&[0.0, 1.0, 2.0], 1.0);
        for (a, b) in p.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p[0] - 0.665241).abs() < 1e-6);
        assert!((p[1] - 0.244728).abs() < 1e-6);
        assert!((p[2] - 0.090031).abs() < 1e-6);
        let (s_, e_) = entropy_and_energy(&p, &s);
        assert!((s_ - 0.8323955818399389).abs() < 1e-14);
        assert!((e_ - 0.42478961739555854).abs() < 1e-14);
    }

    #[test]
    fn large_beta_does_not_underflow() {
        let s = spec(&[0.0, 1.0, 2.0]);
        let p = thermal_probs(&s, InverseTemperature::Finite(1e4));
        assert_eq!(p[0], 1.0);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn entropy_edge_cases() {
        let s = spec(&[0.0, 1.0, 2.0, 3.0]);
        let (h, e) = entropy_and_energy(&[0.25; 4], &s);
        assert!((h - 4f64.ln()).abs() < 1e-15);
        assert!((e - 1.5).abs() < 1e-15);
        let (h0, e0) = entropy_and_energy(&[1.0, 0.0, 0.0, 0.0], &s);
        assert_eq!((h0, e0), (0.0, 0.0));
    }

    #[test]
    fn inverts_energy() {
        let s = spec(&[0.0, 1.0, 2.0]);
        assert_eq!(beta_for_energy(&s, 1.0).unwrap(), InverseTemperature::ZERO);
        assert_eq!(beta_for_energy(&s, 0.0).unwrap(), InverseTemperature::Infinite);
        let b = beta_for_energy(&s, 0.4247897).unwrap().value();
        assert!((b - 1.0).abs() < 1e-5);
        assert!(matches!(beta_for_energy(&s, 1.5), Err(Error::OutOfRange { .. })));
        assert!(beta_for_energy(&s, -0.1).is_err());
    }

    #[test]
    fn beta_parsing_and_serde() {
        assert_eq!("inf".parse::<InverseTemperature>().unwrap(), InverseTemperature::Infinite);
        assert_eq!("0.5".parse::<InverseTemperature>().unwrap(), InverseTemperature::Finite(0.5));
        assert!("-1".parse::<InverseTemperature>().is_err());
        let json = serde_json::to_string(&InverseTemperature::Infinite).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: InverseTemperature = serde_json::from_str("2.5").unwrap();
        assert_eq!(back, InverseTemperature::Finite(2.5));
    }
}
