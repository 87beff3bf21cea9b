//! Scenario files.
//!
//! A scenario is one TOML document bundling everything a run needs: rate
//! constants, beam parameters, shot timing, and one optional section per
//! experiment kind. Commands take a scenario plus a seed and an output
//! path, so a result is reproducible from the file alone. The SHA-256 of
//! the scenario bytes is stamped into every output header for that reason.
//!
//! Units follow the instrument conventions: grids and distances in nm or
//! µm as named, durations in ns or µs as named, currents in mA, fields in
//! µT or gauss as named. Everything is converted to SI at the module
//! boundaries.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::Result;
use crate::fields::{NVOrientation, ProjectionConvention, ProtonBath, WireGeometry};
use crate::photophysics::RateConstants;
use crate::scanner::{
    BeamSet, DriftModel, NvEmitter, ScanConfig, ShotCycle, TrackingPolicy,
};

/// Inclusive grid written as `{ start, stop, n }`, geometric when
/// `log = true`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

impl GridSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config("grid endpoints must be finite".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("grid needs at least one point".into()));
        }
        if self.n == 1 {
            if self.start != self.stop {
                return Err(Error::Config(
                    "single-point grid must have start = stop".into(),
                ));
            }
            return Ok(vec![self.start]);
        }
        if self.log {
            if self.start <= 0.0 || self.stop <= 0.0 {
                return Err(Error::Config(
                    "log grid endpoints must be positive".into(),
                ));
            }
            let ratio = (self.stop / self.start).ln() / (self.n - 1) as f64;
            return Ok((0..self.n)
                .map(|i| self.start * (ratio * i as f64).exp())
                .collect());
        }
        let step = (self.stop - self.start) / (self.n - 1) as f64;
        Ok((0..self.n).map(|i| self.start + step * i as f64).collect())
    }
}

fn default_psf_tau() -> Vec<f64> {
    vec![0.2, 0.5, 1.0, 2.1, 5.0]
}

fn default_psf_grid() -> GridSpec {
    GridSpec {
        start: 0.0,
        stop: 150.0,
        n: 151,
        log: false,
    }
}

fn default_epsilon_compare() -> Vec<f64> {
    vec![1e-3, 2e-2]
}

/// Imaging-response curves: one profile per doughnut duration, plus a
/// residual-intensity comparison at the last duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsfSection {
    /// Doughnut durations, µs.
    pub tau_d_us: Vec<f64>,
    /// Radial grid, nm.
    pub r_nm: GridSpec,
    /// Center leakage values for the comparison output.
    pub epsilon_compare: Vec<f64>,
}

impl Default for PsfSection {
    fn default() -> Self {
        Self {
            tau_d_us: default_psf_tau(),
            r_nm: default_psf_grid(),
            epsilon_compare: default_epsilon_compare(),
        }
    }
}

impl PsfSection {
    pub fn validate(&self) -> Result<()> {
        if self.tau_d_us.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::Config("psf durations must be positive".into()));
        }
        if self.epsilon_compare.len() != 2 {
            return Err(Error::Config(
                "epsilon_compare needs exactly two values".into(),
            ));
        }
        self.r_nm.expand().map(|_| ())
    }
}

/// Scan grid and budget. Beams and shot timing come from the scenario's
/// `[beams]` and `[cycle]`, the seed from the run, so this section holds
/// only what is specific to the raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub x_nm: GridSpec,
    pub y_nm: GridSpec,
    pub reps_per_pixel: u32,
    pub photons_per_shot: f64,
    pub emitters: Vec<NvEmitter>,
    #[serde(default = "default_overhead")]
    pub overhead: f64,
    #[serde(default)]
    pub smooth_profile: bool,
}

fn default_overhead() -> f64 {
    3.0
}

impl ScanSection {
    pub fn to_scan_config(
        &self,
        beams: &BeamSet,
        cycle: &ShotCycle,
        seed: u64,
    ) -> Result<ScanConfig> {
        let config = ScanConfig {
            x_nm: self.x_nm.expand()?,
            y_nm: self.y_nm.expand()?,
            reps_per_pixel: self.reps_per_pixel,
            photons_per_shot: self.photons_per_shot,
            cycle: *cycle,
            beams: *beams,
            emitters: self.emitters.clone(),
            overhead: self.overhead,
            smooth_profile: self.smooth_profile,
            seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// One coherence channel: a stretched-exponential envelope and its weight
/// in the collected fluorescence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceNv {
    pub t2_us: f64,
    pub exponent_p: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_weight() -> f64 {
    1.0
}

/// Echo decay measurement: contrast vs total evolution time for each
/// channel, and the fluorescence-weighted mixture when several channels
/// sit in the same collection volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceSection {
    pub nv: Vec<CoherenceNv>,
    /// Total evolution time grid, µs.
    pub total_time_us: GridSpec,
    /// Detected photons per readout channel per point; 0 disables noise.
    #[serde(default)]
    pub photons_per_point: f64,
}

impl CoherenceSection {
    pub fn validate(&self) -> Result<()> {
        if self.nv.is_empty() {
            return Err(Error::Config("coherence needs at least one channel".into()));
        }
        for nv in &self.nv {
            if !nv.weight.is_finite() || nv.weight <= 0.0 {
                return Err(Error::Config(format!("channel weight {}", nv.weight)));
            }
        }
        if !self.photons_per_point.is_finite() || self.photons_per_point < 0.0 {
            return Err(Error::Config(format!(
                "photons_per_point = {}",
                self.photons_per_point
            )));
        }
        self.total_time_us.expand().map(|_| ())
    }
}

/// One sensor position in the wire's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldNv {
    pub position_um: [f64; 3],
    #[serde(default)]
    pub orientation: NVOrientation,
}

/// Current-carrying wire, sensor placement, and the conventions that map
/// wire current to the scalar field and drive strength a sensor sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub wire_center_um: [f64; 3],
    pub wire_radius_um: f64,
    pub frequency_hz: f64,
    pub nv: Vec<FieldNv>,
    #[serde(default = "default_projection")]
    pub projection: ProjectionConvention,
    /// Near-field drive enhancement applied to the Rabi calibration.
    #[serde(default = "default_drive_factor")]
    pub drive_factor: f64,
    /// Position sweep for field-profile outputs, µm.
    pub sweep_x_um: Option<GridSpec>,
    pub sweep_z_um: Option<f64>,
    /// Current used for field-profile and Rabi outputs, mA.
    #[serde(default = "default_sweep_current")]
    pub sweep_current_ma: f64,
}

fn default_projection() -> ProjectionConvention {
    ProjectionConvention::AxisDot
}

fn default_drive_factor() -> f64 {
    1.0
}

fn default_sweep_current() -> f64 {
    30.0
}

impl FieldSection {
    /// Wire geometry at `current_ma`, SI.
    pub fn wire(&self, current_ma: f64) -> Result<WireGeometry> {
        WireGeometry::new(
            [
                self.wire_center_um[0] * 1e-6,
                self.wire_center_um[1] * 1e-6,
                self.wire_center_um[2] * 1e-6,
            ],
            self.wire_radius_um * 1e-6,
            current_ma * 1e-3,
            self.frequency_hz,
        )
    }

    pub fn nv_position_m(&self, index: usize) -> Result<[f64; 3]> {
        let nv = self.nv.get(index).ok_or_else(|| {
            Error::Config(format!("field section has no sensor #{index}"))
        })?;
        Ok([
            nv.position_um[0] * 1e-6,
            nv.position_um[1] * 1e-6,
            nv.position_um[2] * 1e-6,
        ])
    }

    pub fn validate(&self) -> Result<()> {
        self.wire(1.0)?;
        if self.nv.is_empty() {
            return Err(Error::Config("field section needs a sensor".into()));
        }
        if !self.drive_factor.is_finite() || self.drive_factor <= 0.0 {
            return Err(Error::Config(format!(
                "drive_factor = {}",
                self.drive_factor
            )));
        }
        if let Some(sweep) = &self.sweep_x_um {
            sweep.expand()?;
        }
        Ok(())
    }
}

/// AC magnetometry: echo contrast vs drive current for every sensor in
/// the field section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnetometrySection {
    /// Echo free evolution (total), µs; one field period fits inside.
    pub tau_us: f64,
    /// Peak drive currents, mA.
    pub currents_ma: GridSpec,
    /// Current at which fitted fields are reported, mA.
    pub read_current_ma: f64,
    /// Stretched-exponential background of each sensor, matched by index
    /// to the field section; empty means no decay.
    #[serde(default)]
    pub background: Vec<CoherenceNv>,
    /// Detected photons per readout channel per point; 0 disables noise.
    #[serde(default)]
    pub photons_per_point: f64,
}

impl MagnetometrySection {
    pub fn validate(&self) -> Result<()> {
        if !self.tau_us.is_finite() || self.tau_us <= 0.0 {
            return Err(Error::Config(format!("tau_us = {}", self.tau_us)));
        }
        if !self.read_current_ma.is_finite() {
            return Err(Error::Config("read_current_ma must be finite".into()));
        }
        self.currents_ma.expand().map(|_| ())
    }
}

/// Nuclear-spectroscopy dip: decoupled contrast vs pulse spacing around
/// the bath precession frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmrSection {
    /// Static bias field, gauss.
    pub b0_gauss: f64,
    /// Number of π pulses in the decoupling train.
    pub n_pulses: usize,
    /// Proton number density above the surface, 1/m³.
    pub rho_per_m3: f64,
    /// Sensor depth below the surface, nm.
    pub depth_nm: f64,
    /// Bath correlation time, µs.
    pub t_c_us: f64,
    /// Pulse-spacing grid, ns.
    pub tau_ns: GridSpec,
    /// Detected photons per readout channel per point; 0 disables noise.
    #[serde(default)]
    pub photons_per_point: f64,
}

impl NmrSection {
    pub fn bath(&self) -> Result<ProtonBath> {
        ProtonBath::new(self.rho_per_m3, self.depth_nm * 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        self.bath()?;
        if !self.b0_gauss.is_finite() || self.b0_gauss <= 0.0 {
            return Err(Error::Config(format!("b0_gauss = {}", self.b0_gauss)));
        }
        if self.n_pulses == 0 {
            return Err(Error::Config("n_pulses must be positive".into()));
        }
        if !self.t_c_us.is_finite() || self.t_c_us <= 0.0 {
            return Err(Error::Config(format!("t_c_us = {}", self.t_c_us)));
        }
        self.tau_ns.expand().map(|_| ())
    }
}

/// Polarization buildup surface over pump strength and pulse duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepolarizationSection {
    /// Pump parameter grid (s = 1 is saturation).
    pub s: GridSpec,
    /// Pulse duration grid, µs.
    pub duration_us: GridSpec,
}

impl RepolarizationSection {
    pub fn validate(&self) -> Result<()> {
        self.s.expand()?;
        self.duration_us.expand().map(|_| ())
    }
}

/// A full run description. Sections are optional; each command checks for
/// the ones it needs and fails with a config error naming the missing
/// section otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Base RNG seed; stochastic outputs are undefined without one.
    pub seed: u64,
    /// Level rates; omitted means the built-in room-temperature set.
    #[serde(default = "RateConstants::room_temperature")]
    pub rates: RateConstants,
    pub beams: Option<BeamSet>,
    #[serde(default)]
    pub cycle: ShotCycle,
    #[serde(default)]
    pub drift: DriftModel,
    #[serde(default = "TrackingPolicy::disabled")]
    pub tracking: TrackingPolicy,
    pub psf: Option<PsfSection>,
    pub scan: Option<ScanSection>,
    pub coherence: Option<CoherenceSection>,
    pub field: Option<FieldSection>,
    pub magnetometry: Option<MagnetometrySection>,
    pub nmr: Option<NmrSection>,
    pub repolarization: Option<RepolarizationSection>,
}

macro_rules! section_accessor {
    ($name:ident, $ty:ty, $label:literal) => {
        pub fn $name(&self) -> Result<&$ty> {
            self.$name.as_ref().ok_or_else(|| {
                Error::Config(concat!("scenario has no [", $label, "] section").into())
            })
        }
    };
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.cycle.validate()?;
        self.drift.validate()?;
        self.tracking.validate()?;
        if let Some(psf) = &self.psf {
            psf.validate()?;
        }
        if let Some(coherence) = &self.coherence {
            coherence.validate()?;
        }
        if let Some(field) = &self.field {
            field.validate()?;
        }
        if let Some(magnetometry) = &self.magnetometry {
            magnetometry.validate()?;
        }
        if let Some(nmr) = &self.nmr {
            nmr.validate()?;
        }
        if let Some(repolarization) = &self.repolarization {
            repolarization.validate()?;
        }
        Ok(())
    }

    /// Beams are shared by several sections, so they get a named check.
    pub fn beams(&self) -> Result<&BeamSet> {
        self.beams
            .as_ref()
            .ok_or_else(|| Error::Config("scenario has no [beams] section".into()))
    }

    section_accessor!(psf, PsfSection, "psf");
    section_accessor!(scan, ScanSection, "scan");
    section_accessor!(coherence, CoherenceSection, "coherence");
    section_accessor!(field, FieldSection, "field");
    section_accessor!(magnetometry, MagnetometrySection, "magnetometry");
    section_accessor!(nmr, NmrSection, "nmr");
    section_accessor!(repolarization, RepolarizationSection, "repolarization");
}

/// Scenario identity: SHA-256 of the file bytes, lowercase hex. Hashing
/// the bytes rather than the parsed value keeps the stamp sensitive to
/// comments and formatting, which is what "same file" means here.
pub fn scenario_sha256(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Parse a scenario file, returning it with its identity hash.
pub fn load_scenario(path: &Path) -> Result<(Scenario, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let scenario = Scenario::from_toml(&text)?;
    Ok((scenario, scenario_sha256(&text)))
}
