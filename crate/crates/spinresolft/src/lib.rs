//! Forward simulator and fitting toolkit for doughnut-repolarization
//! ("spin-RESOLFT") imaging and magnetometry with nitrogen-vacancy centers.
//!
//! The crate is organized around the physical pipeline of the experiment:
//!
//! * [`photophysics`] — five-level NV rate-equation model: optical pumping,
//!   spin polarization, and fluorescence readout under piecewise-constant
//!   illumination.
//! * [`optics`] — doughnut and Gaussian beam profiles and the resolution
//!   scaling of repolarization imaging.
//! * [`sequences`] — microwave pulse sequences (Hahn echo, XY8 trains),
//!   echo phase accumulation, coherence envelopes, and the narrowband
//!   filter kernel used for nuclear-signal detection.
//! * [`fields`] — magnetostatics of the microwave/AC delivery wire,
//!   field projections onto the NV axis, Rabi drive estimates, and the
//!   statistically-polarized proton bath above the diamond surface.
//! * [`scanner`] — scanned-image synthesis: per-pixel photon expectations,
//!   Poisson counting noise, stage drift, and position tracking.
//! * [`fitting`] — damped least-squares engine plus the model-specific
//!   fits (PSF profiles, stretched exponentials, magnetometry fringes,
//!   nuclear dips) and the spectral response transform.
//! * [`config`] — rate-constant files and scenario descriptions (TOML).
//! * [`io`] — CSV/SVG emitters and readers with reproducibility metadata.
//! * [`oracle`] — brute-force reference implementations (ODE integration,
//!   Monte Carlo dephasing, segment-summed magnetostatics) used by the
//!   validation suite. Kept algorithmically independent of the main paths.
//!
//! Units: lengths in nm, durations in ns or µs as documented per function,
//! magnetic fields in tesla internally (µT in emitted tables), currents in
//! ampere internally (mA in tables). All randomness flows through
//! explicitly seeded counter-based streams so simulated datasets are
//! byte-reproducible.

pub mod config;
pub mod constants;
mod error;
pub mod fields;
pub mod fitting;
pub mod io;
pub mod numeric;
pub mod optics;
pub mod oracle;
pub mod photophysics;
pub mod scanner;
pub mod sequences;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
