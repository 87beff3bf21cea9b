//! Beam profiles and the resolution scaling of repolarization imaging.
//!
//! Intensities are expressed directly as the dimensionless pump parameter
//! `s` (1 = saturation) at the given radius, so photophysics can consume
//! them without unit conversions. Radial coordinates are in nm.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Doughnut (toroidal) repolarization beam,
/// `s(r) = s0·((r/r0)² + ε)·exp(-(r/r0)²)`.
///
/// `epsilon` is the relative intensity floor at the doughnut center; a
/// perfect null has ε = 0, real beams sit at a fraction of a percent to a
/// few percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoughnutProfile {
    /// Pump-parameter scale factor.
    pub s0: f64,
    /// Radial scale of the ring, nm.
    pub r0_nm: f64,
    /// Center leakage relative to `s0`.
    pub epsilon: f64,
}

impl DoughnutProfile {
    pub fn new(s0: f64, r0_nm: f64, epsilon: f64) -> Result<Self> {
        if !s0.is_finite() || s0 < 0.0 {
            return Err(Error::invalid(format!("doughnut s0 = {s0}")));
        }
        if !r0_nm.is_finite() || r0_nm <= 0.0 {
            return Err(Error::invalid(format!("doughnut r0 = {r0_nm} nm")));
        }
        if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("doughnut epsilon = {epsilon}")));
        }
        Ok(Self { s0, r0_nm, epsilon })
    }

    /// Pump parameter at radius `r_nm` from the doughnut center.
    pub fn intensity(&self, r_nm: f64) -> f64 {
        let u = (r_nm / self.r0_nm).powi(2);
        self.s0 * (u + self.epsilon) * (-u).exp()
    }

    /// Radius of maximum intensity, `r0·sqrt(1-ε)`.
    pub fn ring_radius_nm(&self) -> f64 {
        self.r0_nm * (1.0 - self.epsilon).sqrt()
    }

    /// Intensity at the ring, `s0·exp(ε-1)`.
    pub fn peak_intensity(&self) -> f64 {
        self.s0 * (self.epsilon - 1.0).exp()
    }

    /// Center-to-peak intensity ratio, `ε·exp(1-ε)`; the doughnut quality
    /// figure quoted for real beams.
    pub fn center_to_peak_ratio(&self) -> f64 {
        self.epsilon * (1.0 - self.epsilon).exp()
    }
}

/// Gaussian beam, `s(r) = s_peak·exp(-2 r²/w²)` with 1/e² waist `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    /// Pump parameter at the beam center.
    pub s_peak: f64,
    /// 1/e² intensity radius, nm.
    pub waist_nm: f64,
}

impl GaussianProfile {
    pub fn new(s_peak: f64, waist_nm: f64) -> Result<Self> {
        if !s_peak.is_finite() || s_peak < 0.0 {
            return Err(Error::invalid(format!("gaussian s_peak = {s_peak}")));
        }
        if !waist_nm.is_finite() || waist_nm <= 0.0 {
            return Err(Error::invalid(format!("gaussian waist = {waist_nm} nm")));
        }
        Ok(Self { s_peak, waist_nm })
    }

    pub fn intensity(&self, r_nm: f64) -> f64 {
        self.s_peak * (-2.0 * (r_nm / self.waist_nm).powi(2)).exp()
    }

    /// Intensity full width at half maximum, `w·sqrt(2 ln 2)`.
    pub fn fwhm_nm(&self) -> f64 {
        self.waist_nm * (2.0 * std::f64::consts::LN_2).sqrt()
    }
}

/// Transverse offsets of the two beams from the nominal scan position, nm.
/// Real setups carry a small (tens of nm) doughnut/Gaussian misalignment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BeamAlignment {
    pub gaussian_offset_nm: [f64; 2],
    pub doughnut_offset_nm: [f64; 2],
}

/// Imaging resolution of doughnut repolarization,
/// `FWHM = λ / (2·NA·sqrt(1 + Γτ))`,
/// where Γ is the peak repolarization rate and τ the doughnut duration.
/// Γτ = 0 recovers the confocal limit λ/(2·NA).
pub fn ideal_fwhm(lambda_nm: f64, na: f64, gamma_tau: f64) -> Result<f64> {
    if !lambda_nm.is_finite() || lambda_nm <= 0.0 {
        return Err(Error::invalid(format!("wavelength {lambda_nm} nm")));
    }
    if !na.is_finite() || na <= 0.0 {
        return Err(Error::invalid(format!("numerical aperture {na}")));
    }
    if !gamma_tau.is_finite() || gamma_tau < 0.0 {
        return Err(Error::invalid(format!("pump-time product {gamma_tau}")));
    }
    Ok(lambda_nm / (2.0 * na * (1.0 + gamma_tau).sqrt()))
}

/// Pump-time product Γτ needed to reach a target FWHM; inverse of
/// [`ideal_fwhm`]. The target must not exceed the confocal limit.
pub fn pump_time_product_for_fwhm(lambda_nm: f64, na: f64, target_fwhm_nm: f64) -> Result<f64> {
    let confocal = ideal_fwhm(lambda_nm, na, 0.0)?;
    if !target_fwhm_nm.is_finite() || target_fwhm_nm <= 0.0 {
        return Err(Error::invalid(format!("target FWHM {target_fwhm_nm} nm")));
    }
    if target_fwhm_nm > confocal {
        return Err(Error::invalid(format!(
            "target FWHM {target_fwhm_nm} nm exceeds the confocal limit {confocal:.1} nm"
        )));
    }
    Ok((confocal / target_fwhm_nm).powi(2) - 1.0)
}
