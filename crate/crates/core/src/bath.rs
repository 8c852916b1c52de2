//! Thermal sample model: spectral densities, Bose occupation, the thermal
//! kernel `n̄(1+n̄)` and the effective low-frequency coupling `g²`.
//!
//! Units: ħ = k_B = 1. Frequencies are angular, `beta` is an inverse energy
//! and times are in the reciprocal frequency unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, Integration};

/// Exponent `βω` beyond which thermal integrands are truncated.
pub const THERMAL_CUTOFF: f64 = 40.0;

/// A bath spectral density `J(ω)` on `ω ≥ 0`.
///
/// Consumers only evaluate `value` and ask for a finite frequency beyond
/// which `J` is negligible, so new families plug in without other changes.
pub trait SpectralDensity: Send + Sync + std::fmt::Debug {
    /// `J(ω)` for `ω ≥ 0`. Callers validate the sign of `ω`.
    fn value(&self, omega: f64) -> f64;

    /// Frequency above which `J` may be treated as zero.
    fn upper_frequency(&self) -> f64;

    /// Returns a copy with the overall coupling multiplied by `factor`.
    fn scaled(&self, factor: f64) -> Self
    where
        Self: Sized;
}

/// Ohmic-class density `J(ω) = α ω^s ω_c^{1−s} e^{−ω/ω_c}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhmicClass {
    pub alpha: f64,
    pub s_exponent: f64,
    pub omega_c: f64,
}

impl OhmicClass {
    pub fn new(alpha: f64, s_exponent: f64, omega_c: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("s", s_exponent), ("omega_c", omega_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(OhmicClass {
            alpha,
            s_exponent,
            omega_c,
        })
    }

    /// `s = 1`.
    pub fn ohmic(alpha: f64, omega_c: f64) -> Result<Self> {
        Self::new(alpha, 1.0, omega_c)
    }
}

impl SpectralDensity for OhmicClass {
    fn value(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let x = omega / self.omega_c;
        self.alpha * self.omega_c * x.powf(self.s_exponent) * (-x).exp()
    }

    fn upper_frequency(&self) -> f64 {
        50.0 * self.omega_c
    }

    fn scaled(&self, factor: f64) -> Self {
        OhmicClass {
            alpha: self.alpha * factor,
            ..*self
        }
    }
}

/// Evaluates `J(ω)`, rejecting negative frequencies.
pub fn spectral_density_at<S: SpectralDensity>(sd: &S, omega: f64) -> Result<f64> {
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::domain(format!("spectral density needs ω ≥ 0, got {omega}")));
    }
    Ok(sd.value(omega))
}

/// Thermal sample: inverse temperature, low-frequency spectral density and
/// the white-noise dephasing time `t2` that absorbs the vacuum part,
/// temperature-independent noise and the high-frequency tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalBath<S = OhmicClass> {
    pub beta: f64,
    pub spectral: S,
    pub t2: f64,
}

impl<S: SpectralDensity> ThermalBath<S> {
    pub fn new(beta: f64, spectral: S, t2: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive and finite, got {beta}")));
        }
        if !(t2 > 0.0 && t2.is_finite()) {
            return Err(Error::domain(format!("t2 must be positive and finite, got {t2}")));
        }
        Ok(ThermalBath { beta, spectral, t2 })
    }

    /// `ħβ/t₂`, the low-temperature regime diagnostic.
    pub fn hbar_beta_over_t2(&self) -> f64 {
        self.beta / self.t2
    }

    /// Upper limit for integrands carrying a thermal factor.
    pub fn thermal_upper(&self) -> f64 {
        (THERMAL_CUTOFF / self.beta).min(self.spectral.upper_frequency())
    }

    pub fn with_beta(&self, beta: f64) -> Self
    where
        S: Clone,
    {
        ThermalBath {
            beta,
            spectral: self.spectral.clone(),
            t2: self.t2,
        }
    }
}

/// `n̄ = 1/(e^{βω} − 1)`.
pub fn bose_occupation(beta: f64, omega: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if !(omega > 0.0) {
        return Err(Error::domain(format!("Bose occupation diverges at ω = 0 (got ω = {omega})")));
    }
    Ok(bose_unchecked(beta * omega))
}

#[inline]
pub(crate) fn bose_unchecked(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// `n̄(1+n̄) = 1/(4 sinh²(βω/2))`.
pub fn thermal_kernel(beta: f64, omega: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if !(omega > 0.0) {
        return Err(Error::domain(format!(
            "thermal kernel diverges as 1/(βω)² at ω = 0 (got ω = {omega})"
        )));
    }
    Ok(thermal_kernel_unchecked(beta * omega))
}

#[inline]
pub(crate) fn thermal_kernel_unchecked(x: f64) -> f64 {
    let sh = (0.5 * x).sinh();
    1.0 / (4.0 * sh * sh)
}

/// `g² = 4β ∫₀^∞ dω ω J(ω) n̄(1+n̄)`.
pub fn effective_coupling_g2<S: SpectralDensity>(bath: &ThermalBath<S>) -> Result<f64> {
    let beta = bath.beta;
    let integral = integrate(Integration::new(bath.thermal_upper()), |w| {
        w * bath.spectral.value(w) * thermal_kernel_unchecked(beta * w)
    })?;
    Ok(4.0 * beta * integral)
}
