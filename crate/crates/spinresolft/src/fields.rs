//! Magnetostatics of the straight signal wire (field, gradient, microwave
//! drive strength) and the statistical proton field at a shallow sensor.
//!
//! The wire is an infinite filament along +y through `center_m`; its
//! conductor radius only defines the exclusion region for evaluation
//! points. Positions are in meters, fields in tesla.

use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA_E_HZ_PER_T, GAMMA_P, HBAR, MU_0};
use crate::numeric::gauss_legendre;
use crate::{Error, Result};

pub const DEFAULT_WIRE_RADIUS_M: f64 = 12.5e-6;

/// Rabi prefactor for a linearly polarized drive in the rotating frame.
/// Exposed in scenario files; calibrated values land near 1 when the wire
/// current amplitude is quoted as delivered rather than as set.
pub const DEFAULT_DRIVE_FACTOR: f64 = 0.5;

/// Straight wire along +y carrying `current_a` at `frequency_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireGeometry {
    pub center_m: [f64; 3],
    pub radius_m: f64,
    pub current_a: f64,
    pub frequency_hz: f64,
}

impl WireGeometry {
    pub fn new(center_m: [f64; 3], radius_m: f64, current_a: f64, frequency_hz: f64) -> Result<Self> {
        let w = Self {
            center_m,
            radius_m,
            current_a,
            frequency_hz,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center_m.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("wire center must be finite"));
        }
        if !self.radius_m.is_finite() || self.radius_m <= 0.0 {
            return Err(Error::invalid(format!("wire radius {} m", self.radius_m)));
        }
        if !self.current_a.is_finite() {
            return Err(Error::invalid("wire current must be finite"));
        }
        if !self.frequency_hz.is_finite() || self.frequency_hz < 0.0 {
            return Err(Error::invalid(format!(
                "wire frequency {} Hz",
                self.frequency_hz
            )));
        }
        Ok(())
    }

    /// Current direction, fixed along +y.
    pub fn axis(&self) -> [f64; 3] {
        [0.0, 1.0, 0.0]
    }

    /// (x, z) of `pos` relative to the wire center, i.e. the in-plane
    /// coordinates perpendicular to the current. Rejects points inside
    /// the conductor.
    fn perpendicular_offset(&self, pos_m: [f64; 3]) -> Result<(f64, f64)> {
        let x = pos_m[0] - self.center_m[0];
        let z = pos_m[2] - self.center_m[2];
        if !x.is_finite() || !z.is_finite() {
            return Err(Error::invalid("field point must be finite"));
        }
        if x.hypot(z) <= self.radius_m {
            return Err(Error::invalid(format!(
                "field point {:.3} µm from the wire axis lies inside the {:.3} µm conductor",
                x.hypot(z) * 1e6,
                self.radius_m * 1e6
            )));
        }
        Ok((x, z))
    }
}

/// Sensor axis direction: polar angle from +z, azimuth from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NVOrientation {
    pub theta_rad: f64,
    pub phi_rad: f64,
}

impl Default for NVOrientation {
    fn default() -> Self {
        Self::standard()
    }
}

impl NVOrientation {
    pub fn new(theta_rad: f64, phi_rad: f64) -> Result<Self> {
        if !theta_rad.is_finite() || !(0.0..=std::f64::consts::PI).contains(&theta_rad) {
            return Err(Error::invalid(format!("polar angle {theta_rad} rad")));
        }
        if !phi_rad.is_finite() || !(0.0..std::f64::consts::TAU).contains(&phi_rad) {
            return Err(Error::invalid(format!("azimuth {phi_rad} rad")));
        }
        Ok(Self { theta_rad, phi_rad })
    }

    /// The (111)-like orientation used throughout: θ = arccos(1/√3) from
    /// the surface normal, azimuth along +x.
    pub fn standard() -> Self {
        Self {
            theta_rad: crate::constants::NV_AXIS_TILT,
            phi_rad: 0.0,
        }
    }

    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta_rad.sin_cos();
        let (sp, cp) = self.phi_rad.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// How the scalar "field along the sensor" is computed from the wire field.
///
/// `AxisDot` projects the full vector field onto the sensor axis and is what
/// the bundled scenarios use. `ComponentAngles` evaluates
/// `(µ0·I/2π)·(z·sinφ·cosθ + x·cosφ)/(x²+z²)`, a form in which the angles
/// weight the coordinates directly; it is kept selectable because the two
/// conventions disagree away from special orientations and published
/// parameter sets do not always say which one they used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionConvention {
    AxisDot,
    ComponentAngles,
}

/// Full wire field at `pos_m`: `(µ0·I/2πr²)·(z, 0, −x)` for current +y.
pub fn b_field(pos_m: [f64; 3], wire: &WireGeometry) -> Result<[f64; 3]> {
    wire.validate()?;
    let (x, z) = wire.perpendicular_offset(pos_m)?;
    let r2 = x * x + z * z;
    let scale = MU_0 * wire.current_a / (std::f64::consts::TAU * r2);
    Ok([scale * z, 0.0, -scale * x])
}

/// `µ0·|I|/(2πr)`, r the perpendicular distance to the wire axis.
pub fn b_magnitude(pos_m: [f64; 3], wire: &WireGeometry) -> Result<f64> {
    wire.validate()?;
    let (x, z) = wire.perpendicular_offset(pos_m)?;
    Ok(MU_0 * wire.current_a.abs() / (std::f64::consts::TAU * x.hypot(z)))
}

/// Field along the sensor axis, per the chosen convention.
pub fn b_parallel(
    pos_m: [f64; 3],
    wire: &WireGeometry,
    nv: &NVOrientation,
    convention: ProjectionConvention,
) -> Result<f64> {
    match convention {
        ProjectionConvention::AxisDot => {
            let b = b_field(pos_m, wire)?;
            let n = nv.axis();
            Ok(b[0] * n[0] + b[1] * n[1] + b[2] * n[2])
        }
        ProjectionConvention::ComponentAngles => {
            wire.validate()?;
            let (x, z) = wire.perpendicular_offset(pos_m)?;
            let scale = MU_0 * wire.current_a / (std::f64::consts::TAU * (x * x + z * z));
            Ok(scale * (z * nv.phi_rad.sin() * nv.theta_rad.cos() + x * nv.phi_rad.cos()))
        }
    }
}

/// Quadrature complement of [`b_parallel`]: √(‖B‖² − B∥²). With `AxisDot`
/// this equals the norm of the vector rejection from the sensor axis.
pub fn b_perpendicular(
    pos_m: [f64; 3],
    wire: &WireGeometry,
    nv: &NVOrientation,
    convention: ProjectionConvention,
) -> Result<f64> {
    let mag = b_magnitude(pos_m, wire)?;
    let par = b_parallel(pos_m, wire, nv, convention)?;
    Ok((mag * mag - par * par).max(0.0).sqrt())
}

/// Central finite difference of [`b_parallel`] along x, T/m.
pub fn gradient_parallel(
    pos_m: [f64; 3],
    wire: &WireGeometry,
    nv: &NVOrientation,
    convention: ProjectionConvention,
    step_m: f64,
) -> Result<f64> {
    if !step_m.is_finite() || step_m <= 0.0 {
        return Err(Error::invalid(format!("finite-difference step {step_m} m")));
    }
    let mut hi = pos_m;
    let mut lo = pos_m;
    hi[0] += step_m;
    lo[0] -= step_m;
    let bh = b_parallel(hi, wire, nv, convention)?;
    let bl = b_parallel(lo, wire, nv, convention)?;
    Ok((bh - bl) / (2.0 * step_m))
}

/// Rotating-frame Rabi frequency (Hz) for a microwave current `current_a`
/// through the wire: `(γe/2π)·‖B − (B·n̂)n̂‖·drive_factor`. The microwave
/// amplitude is independent of the wire's low-frequency signal current.
pub fn rabi_frequency(
    pos_m: [f64; 3],
    wire: &WireGeometry,
    nv: &NVOrientation,
    current_a: f64,
    drive_factor: f64,
) -> Result<f64> {
    if !current_a.is_finite() {
        return Err(Error::invalid("drive current must be finite"));
    }
    if !drive_factor.is_finite() || drive_factor <= 0.0 {
        return Err(Error::invalid(format!("drive factor {drive_factor}")));
    }
    let mw = WireGeometry {
        current_a,
        ..*wire
    };
    let b = b_field(pos_m, &mw)?;
    let n = nv.axis();
    let along = b[0] * n[0] + b[1] * n[1] + b[2] * n[2];
    let perp = [
        b[0] - along * n[0],
        b[1] - along * n[1],
        b[2] - along * n[2],
    ];
    let norm = (perp[0] * perp[0] + perp[1] * perp[1] + perp[2] * perp[2]).sqrt();
    Ok(GAMMA_E_HZ_PER_T * norm * drive_factor)
}

/// Statistically polarized protons filling the half-space above the
/// diamond surface, sensed at depth `d_nv_m` below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtonBath {
    /// Proton number density, 1/m³.
    pub rho_per_m3: f64,
    /// Sensor depth below the surface, m.
    pub d_nv_m: f64,
}

impl ProtonBath {
    pub fn new(rho_per_m3: f64, d_nv_m: f64) -> Result<Self> {
        if !rho_per_m3.is_finite() || rho_per_m3 < 0.0 {
            return Err(Error::invalid(format!("proton density {rho_per_m3}")));
        }
        if !d_nv_m.is_finite() || d_nv_m <= 0.0 {
            return Err(Error::invalid(format!("sensor depth {d_nv_m} m")));
        }
        Ok(Self { rho_per_m3, d_nv_m })
    }
}

/// RMS amplitude (T) of the Larmor-precessing proton field along the
/// standard sensor axis. Quadrature-envelope convention: the instantaneous
/// field variance is `B_rms²/2`, matching [`crate::sequences::NuclearSignal`].
///
/// Closed form from summing transverse dipolar coupling variances over the
/// half-space: `B_rms² = (3/2)·(µ0·ħ·γp/4π)²·ρ·J(θ)/d³` with the angular
/// weight `J(θ) = ∫ u³·c²(1−c²) dΩ` over the upper hemisphere (u the
/// surface-normal cosine, c the sensor-axis cosine). Scales as √ρ and
/// d^(-3/2): halving the depth raises B_rms by 2√2.
pub fn proton_brms(bath: &ProtonBath) -> Result<f64> {
    proton_brms_for_axis(bath, &NVOrientation::standard())
}

/// [`proton_brms`] for an arbitrary sensor-axis polar angle; the azimuth
/// drops out by symmetry of the half-space.
pub fn proton_brms_for_axis(bath: &ProtonBath, nv: &NVOrientation) -> Result<f64> {
    ProtonBath::new(bath.rho_per_m3, bath.d_nv_m)?;
    let k = MU_0 * HBAR * GAMMA_P / (2.0 * std::f64::consts::TAU);
    let j = transverse_angular_weight(nv.theta_rad);
    Ok((1.5 * k * k * bath.rho_per_m3 * j / bath.d_nv_m.powi(3)).sqrt())
}

/// `J(α) = ∫_{u>0} u³·c²(1−c²) dΩ`, c = cos between ω̂ and an axis at polar
/// angle α. Gauss-Legendre in u and a trapezoid in azimuth; the integrand
/// is a low-order trig polynomial, so both rules are exact here.
fn transverse_angular_weight(alpha: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    const N_PHI: usize = 32;
    let (sa, ca) = alpha.sin_cos();
    let mut total = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let u = 0.5 * (t + 1.0);
        let s = (1.0 - u * u).sqrt();
        let mut ring = 0.0;
        for i in 0..N_PHI {
            let phi = std::f64::consts::TAU * i as f64 / N_PHI as f64;
            let c = ca * u + sa * s * phi.cos();
            ring += c * c * (1.0 - c * c);
        }
        total += 0.5 * w * u.powi(3) * (ring / N_PHI as f64) * std::f64::consts::TAU;
    }
    total
}
