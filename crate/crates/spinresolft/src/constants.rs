//! Physical constants (SI units, CODATA 2018 values).
//!
//! Gyromagnetic ratios are magnitudes; precession sense never matters for
//! the observables modeled here.

/// Electron gyromagnetic ratio, rad s^-1 T^-1.
pub const GAMMA_E: f64 = 1.760_859_630_23e11;

/// Electron gyromagnetic ratio over 2π, Hz T^-1 (28.0 GHz/T).
pub const GAMMA_E_HZ_PER_T: f64 = GAMMA_E / TAU;

/// Proton gyromagnetic ratio, rad s^-1 T^-1.
pub const GAMMA_P: f64 = 2.675_221_874_4e8;

/// Proton gyromagnetic ratio over 2π, Hz T^-1 (42.58 MHz/T).
pub const GAMMA_P_HZ_PER_T: f64 = GAMMA_P / TAU;

/// Vacuum permeability, N A^-2.
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// NV axis polar angle for a (100)-cut diamond, radians (arccos(1/√3)).
pub const NV_AXIS_TILT: f64 = 0.955_316_618_124_509_3;

/// Tesla per gauss.
pub const TESLA_PER_GAUSS: f64 = 1e-4;

const TAU: f64 = std::f64::consts::TAU;
