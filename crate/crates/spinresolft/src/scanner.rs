//! Scan acquisition: the superresolved point-spread function, per-shot
//! photon statistics, stage drift, and emitter tracking.
//!
//! A pixel is acquired as many repetitions of a fixed shot cycle
//! (initialize, optional π, doughnut, readout, dead time). Because the
//! cycle leaves residual polarization for the next shot, per-shot yields
//! are computed at the cycle's stationary state rather than from a cold
//! start. Counts are Poisson draws of the expected totals; every random
//! stream is keyed to (seed, line, pixel) so a scan is reproducible
//! bit for bit.

use nalgebra::{SMatrix, SVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::numeric::expm;
use crate::optics::{BeamAlignment, DoughnutProfile, GaussianProfile};
use crate::photophysics::{
    evolve, fluorescence, rate_matrix, IlluminationSegment, PopulationState, RateConstants,
};
use crate::{Error, Result};

/// Collection window used by the readout pulse, seconds.
pub const DEFAULT_READOUT_WINDOW_S: f64 = 350e-9;

/// Pump parameter of the readout pulse in the normalized PSF model.
const PSF_READOUT_S: f64 = 1.0;

/// Below this pump parameter an emitter is effectively outside the beam
/// and contributes no photons; skipping it keeps the stationary-state
/// solve away from the degenerate dark limit.
const NEGLIGIBLE_S: f64 = 1e-9;

/// Normalized superresolution response at radial offset `r_nm` from the
/// doughnut center.
///
/// Both channels start from the green-pump polarization plateau (the pump
/// never reaches pure m_s=0; the singlet returns a third of its passages
/// to m_s=1). The signal channel gets a π pulse, both see the doughnut at
/// the local intensity for `tau_d_s`, rest in the dark until the shelving
/// singlet is empty, and read out. The response is the missing
/// fluorescence, `(F_ref0 - F_sig(r)) / F_ref0`: maximal at the doughnut
/// null, falling to zero wherever repolarization erases the π pulse's
/// imprint. Referencing the pure m_s=0 state instead would leave the
/// response pinned at the polarization gap rather than at zero.
pub fn resolft_psf(
    r_nm: f64,
    doughnut: &DoughnutProfile,
    tau_d_s: f64,
    rates: &RateConstants,
) -> Result<f64> {
    let base = crate::photophysics::relax_in_dark(
        &crate::photophysics::steady_state(PSF_READOUT_S, rates)?,
        rates,
    )?;
    let pulse = IlluminationSegment::new(doughnut.intensity(r_nm.abs()), tau_d_s)?;
    let sig = evolve(&base.apply_pi(), &[pulse], rates)?;
    let sig = crate::photophysics::relax_in_dark(&sig, rates)?;
    let reference = evolve(&base, &[pulse], rates)?;
    let reference = crate::photophysics::relax_in_dark(&reference, rates)?;
    let f_sig = fluorescence(&sig, PSF_READOUT_S, DEFAULT_READOUT_WINDOW_S, rates, 1.0)?;
    let f_ref = fluorescence(&reference, PSF_READOUT_S, DEFAULT_READOUT_WINDOW_S, rates, 1.0)?;
    Ok((f_ref - f_sig) / f_ref)
}

/// Full width at half maximum of [`resolft_psf`], nm, found by bisecting
/// the half-crossing inside the doughnut ring.
pub fn resolft_fwhm_nm(
    doughnut: &DoughnutProfile,
    tau_d_s: f64,
    rates: &RateConstants,
) -> Result<f64> {
    let peak = resolft_psf(0.0, doughnut, tau_d_s, rates)?;
    if peak <= 0.0 {
        return Err(Error::invalid("response has no central peak"));
    }
    let ring = doughnut.ring_radius_nm();
    let at_ring = resolft_psf(ring, doughnut, tau_d_s, rates)?;
    if at_ring > 0.5 * peak {
        return Err(Error::invalid(
            "repolarization too weak to reach half maximum inside the ring",
        ));
    }
    let half = crate::numeric::bisect(
        |r| resolft_psf(r, doughnut, tau_d_s, rates).unwrap_or(f64::NAN) - 0.5 * peak,
        0.0,
        ring,
        1e-4,
    )?;
    Ok(2.0 * half)
}

/// Timing of one acquisition shot. All durations in seconds.
///
/// `settle_s` is the dark wait after the initialization pulse and again
/// after the doughnut, letting the shelving singlet drain back to the
/// ground manifold before the spin is manipulated or read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotCycle {
    /// Green initialization pulse on the readout beam.
    pub init_duration_s: f64,
    /// Dark settle after the green pulses, applied twice per shot.
    pub settle_s: f64,
    /// Doughnut repolarization interval.
    pub doughnut_duration_s: f64,
    /// Fluorescence collection window on the readout beam.
    pub readout_window_s: f64,
    /// Dark interval before the next shot.
    pub dead_time_s: f64,
}

impl Default for ShotCycle {
    fn default() -> Self {
        Self {
            init_duration_s: 5e-6,
            settle_s: 1e-6,
            doughnut_duration_s: 2.1e-6,
            readout_window_s: DEFAULT_READOUT_WINDOW_S,
            dead_time_s: 10.55e-6,
        }
    }
}

impl ShotCycle {
    pub fn duration_s(&self) -> f64 {
        self.init_duration_s
            + 2.0 * self.settle_s
            + self.doughnut_duration_s
            + self.readout_window_s
            + self.dead_time_s
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("init_duration_s", self.init_duration_s),
            ("settle_s", self.settle_s),
            ("doughnut_duration_s", self.doughnut_duration_s),
            ("readout_window_s", self.readout_window_s),
            ("dead_time_s", self.dead_time_s),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!("{name} = {v}")));
            }
        }
        if self.readout_window_s == 0.0 {
            return Err(Error::invalid("readout window must be positive"));
        }
        Ok(())
    }
}

/// The two co-scanned beams and their relative misalignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSet {
    pub readout: GaussianProfile,
    pub doughnut: DoughnutProfile,
    #[serde(default)]
    pub alignment: BeamAlignment,
}

fn default_brightness() -> f64 {
    1.0
}

/// One emitter in the field of view. `brightness` scales its collected
/// photon rate relative to a nominal center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvEmitter {
    pub position_nm: [f64; 2],
    #[serde(default)]
    pub orientation: crate::fields::NVOrientation,
    #[serde(default = "default_brightness")]
    pub brightness: f64,
}

fn default_reps() -> u32 {
    20_000
}

fn default_photons_per_shot() -> f64 {
    0.02
}

fn default_overhead() -> f64 {
    3.0
}

/// Scan grid, shot budget, and photon calibration.
///
/// `photons_per_shot` pins the detected yield of the brightest reference
/// pixel on the undrifted grid; everything else scales mechanistically
/// from the level populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub x_nm: Vec<f64>,
    pub y_nm: Vec<f64>,
    #[serde(default = "default_reps")]
    pub reps_per_pixel: u32,
    #[serde(default = "default_photons_per_shot")]
    pub photons_per_shot: f64,
    #[serde(default)]
    pub cycle: ShotCycle,
    pub beams: BeamSet,
    pub emitters: Vec<NvEmitter>,
    /// Wall-clock time per ideal acquisition second (tracking, stage
    /// settling, software).
    #[serde(default = "default_overhead")]
    pub overhead: f64,
    /// Two-pixel running average applied to the derived profile.
    #[serde(default)]
    pub smooth_profile: bool,
    pub seed: u64,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.x_nm.is_empty() && !self.y_nm.is_empty() {
            return Err(Error::invalid("scan has lines but no pixels"));
        }
        for v in self.x_nm.iter().chain(&self.y_nm) {
            if !v.is_finite() {
                return Err(Error::invalid("scan grid must be finite"));
            }
        }
        if self.reps_per_pixel == 0 {
            return Err(Error::invalid("reps_per_pixel must be positive"));
        }
        if !self.photons_per_shot.is_finite() || self.photons_per_shot <= 0.0 {
            return Err(Error::invalid(format!(
                "photons_per_shot = {}",
                self.photons_per_shot
            )));
        }
        if !self.overhead.is_finite() || self.overhead < 1.0 {
            return Err(Error::invalid(format!("overhead = {}", self.overhead)));
        }
        if self.emitters.is_empty() {
            return Err(Error::invalid("scan needs at least one emitter"));
        }
        for e in &self.emitters {
            if !e.brightness.is_finite() || e.brightness < 0.0 {
                return Err(Error::invalid(format!("brightness = {}", e.brightness)));
            }
        }
        self.cycle.validate()
    }

    pub fn pixel_count(&self) -> usize {
        self.x_nm.len() * self.y_nm.len()
    }
}

/// Ideal and wall-clock acquisition times for a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionBudget {
    pub ideal_s: f64,
    pub actual_s: f64,
}

/// Shot-limited acquisition time and the wall-clock time after overhead.
/// An empty grid costs nothing.
pub fn acquisition_budget(config: &ScanConfig) -> AcquisitionBudget {
    let ideal_s =
        config.pixel_count() as f64 * config.reps_per_pixel as f64 * config.cycle.duration_s();
    AcquisitionBudget {
        ideal_s,
        actual_s: ideal_s * config.overhead,
    }
}

fn default_jitter() -> f64 {
    11.0
}

/// Slow displacement of the sample relative to the beams along the scan
/// axis. `Stabilized` is feedback-limited white jitter; temperature
/// coupling follows a sinusoidal lab-temperature trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftModel {
    Stabilized {
        #[serde(default = "default_jitter")]
        jitter_nm: f64,
    },
    TemperatureCoupled {
        coupling_nm_per_k: f64,
        amplitude_k: f64,
        period_s: f64,
    },
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel::Stabilized {
            jitter_nm: default_jitter(),
        }
    }
}

impl DriftModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DriftModel::Stabilized { jitter_nm } => {
                if !jitter_nm.is_finite() || *jitter_nm < 0.0 {
                    return Err(Error::invalid(format!("jitter = {jitter_nm} nm")));
                }
            }
            DriftModel::TemperatureCoupled {
                coupling_nm_per_k,
                amplitude_k,
                period_s,
            } => {
                if !coupling_nm_per_k.is_finite()
                    || !amplitude_k.is_finite()
                    || *amplitude_k < 0.0
                    || !period_s.is_finite()
                    || *period_s <= 0.0
                {
                    return Err(Error::invalid(
                        "temperature coupling needs finite coupling, amplitude >= 0, period > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Lab temperature excursion at time `t_s`, K (zero when stabilized).
    pub fn temperature_k(&self, t_s: f64) -> f64 {
        match self {
            DriftModel::Stabilized { .. } => 0.0,
            DriftModel::TemperatureCoupled {
                amplitude_k,
                period_s,
                ..
            } => amplitude_k * (std::f64::consts::TAU * t_s / period_s).sin(),
        }
    }
}

/// What the recentering routine locks onto. The localization precision is
/// the same for all three in this model; the reference matters for which
/// emitter the correction is valid for, which the caller encodes in the
/// emitter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingReference {
    SelfEmitter,
    ReferenceNv,
    GoldParticle,
}

fn default_precision() -> f64 {
    5.0
}

/// Periodic recentering between scan lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingPolicy {
    /// Recenter before every n-th line; 0 disables tracking.
    pub recenter_every_lines: u32,
    /// 1σ localization error of one recentering, nm.
    #[serde(default = "default_precision")]
    pub precision_nm: f64,
    pub reference: TrackingReference,
}

impl TrackingPolicy {
    pub fn disabled() -> Self {
        Self {
            recenter_every_lines: 0,
            precision_nm: default_precision(),
            reference: TrackingReference::SelfEmitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.precision_nm.is_finite() || self.precision_nm < 0.0 {
            return Err(Error::invalid(format!(
                "tracking precision = {} nm",
                self.precision_nm
            )));
        }
        Ok(())
    }
}

/// Raw counts and derived profile of one scan, row-major over
/// (line, pixel), with the per-line displacement actually applied.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub x_nm: Vec<f64>,
    pub y_nm: Vec<f64>,
    pub sig_counts: Vec<u64>,
    pub ref0_counts: Vec<u64>,
    /// ref0 − sig per pixel, after optional smoothing.
    pub profile: Vec<f64>,
    /// Net sample displacement along x during each line, nm.
    pub line_offsets_nm: Vec<f64>,
    /// Lab temperature excursion per line, K.
    pub temperature_k: Vec<f64>,
    pub elapsed_s: f64,
    pub seed: u64,
}

fn propagator(s: f64, duration_s: f64, rates: &RateConstants) -> Result<SMatrix<f64, 5, 5>> {
    expm(&(rate_matrix(s, rates) * (rates.gamma_hz * duration_s)))
}

fn pi_matrix() -> SMatrix<f64, 5, 5> {
    let mut p = SMatrix::<f64, 5, 5>::identity();
    p[(0, 0)] = 0.0;
    p[(1, 1)] = 0.0;
    p[(0, 1)] = 1.0;
    p[(1, 0)] = 1.0;
    p
}

/// Stationary state of a population-conserving cycle map: the eigenvector
/// of `t` at eigenvalue 1, normalized to unit total.
fn cycle_fixed_point(t: &SMatrix<f64, 5, 5>) -> Result<SVector<f64, 5>> {
    let mut a = t - SMatrix::<f64, 5, 5>::identity();
    for j in 0..5 {
        a[(4, j)] = 1.0;
    }
    let b = SVector::<f64, 5>::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 1.0]);
    let n = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem("shot cycle has no unique stationary state"))?;
    Ok(n)
}

fn state_from(v: SVector<f64, 5>) -> Result<PopulationState> {
    let total: f64 = v.iter().sum();
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::invalid("population vector lost normalization"));
    }
    let mut arr = [0.0; 5];
    for i in 0..5 {
        arr[i] = (v[i] / total).max(0.0);
    }
    let norm: f64 = arr.iter().sum();
    for a in &mut arr {
        *a /= norm;
    }
    PopulationState::new(arr)
}

/// Expected detected photons per shot at one pixel for the signal (with π)
/// and reference (without π) channels, at collection efficiency 1.
fn shot_yields(
    pixel_nm: [f64; 2],
    sample_shift_nm: f64,
    config: &ScanConfig,
    m_dead: &SMatrix<f64, 5, 5>,
    pi: &SMatrix<f64, 5, 5>,
    rates: &RateConstants,
) -> Result<(f64, f64)> {
    let beams = &config.beams;
    let cycle = &config.cycle;
    let mut e_sig = 0.0;
    let mut e_ref = 0.0;
    for emitter in &config.emitters {
        let ex = emitter.position_nm[0] + sample_shift_nm;
        let ey = emitter.position_nm[1];
        let r_gauss = f64::hypot(
            ex - (pixel_nm[0] + beams.alignment.gaussian_offset_nm[0]),
            ey - (pixel_nm[1] + beams.alignment.gaussian_offset_nm[1]),
        );
        let s_gauss = beams.readout.intensity(r_gauss);
        if s_gauss < NEGLIGIBLE_S {
            continue;
        }
        let r_dough = f64::hypot(
            ex - (pixel_nm[0] + beams.alignment.doughnut_offset_nm[0]),
            ey - (pixel_nm[1] + beams.alignment.doughnut_offset_nm[1]),
        );
        let s_dough = beams.doughnut.intensity(r_dough);

        let m_init = propagator(s_gauss, cycle.init_duration_s, rates)?;
        let m_settle = propagator(0.0, cycle.settle_s, rates)?;
        let m_dough = propagator(s_dough, cycle.doughnut_duration_s, rates)?;
        let m_read = propagator(s_gauss, cycle.readout_window_s, rates)?;

        let pre_read_sig = m_settle * m_dough * pi * m_settle * m_init;
        let pre_read_ref = m_settle * m_dough * m_settle * m_init;
        let t_sig = m_dead * m_read * pre_read_sig;
        let t_ref = m_dead * m_read * pre_read_ref;

        let start_sig = cycle_fixed_point(&t_sig)?;
        let start_ref = cycle_fixed_point(&t_ref)?;
        let f_sig = fluorescence(
            &state_from(pre_read_sig * start_sig)?,
            s_gauss,
            cycle.readout_window_s,
            rates,
            1.0,
        )?;
        let f_ref = fluorescence(
            &state_from(pre_read_ref * start_ref)?,
            s_gauss,
            cycle.readout_window_s,
            rates,
            1.0,
        )?;
        e_sig += emitter.brightness * f_sig;
        e_ref += emitter.brightness * f_ref;
    }
    Ok((e_sig, e_ref))
}

/// Collection efficiency that pins the brightest reference pixel of the
/// undrifted grid at `photons_per_shot`.
fn calibrate_efficiency(
    config: &ScanConfig,
    m_dead: &SMatrix<f64, 5, 5>,
    pi: &SMatrix<f64, 5, 5>,
    rates: &RateConstants,
) -> Result<f64> {
    let mut brightest: f64 = 0.0;
    for y in &config.y_nm {
        for x in &config.x_nm {
            let (_, e_ref) = shot_yields([*x, *y], 0.0, config, m_dead, pi, rates)?;
            brightest = brightest.max(e_ref);
        }
    }
    if brightest <= 0.0 {
        return Err(Error::invalid(
            "no emitter is inside the scan range; cannot calibrate photon yield",
        ));
    }
    Ok(config.photons_per_shot / brightest)
}

fn poisson_count(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map_or(0, |p| p.sample(rng) as u64)
}

fn line_rng(seed: u64, line: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((line as u64) << 32) | 0xffff_ffff);
    rng
}

fn pixel_rng(seed: u64, line: usize, pixel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((line as u64) << 32) | pixel as u64);
    rng
}

/// Acquire a full scan: per-line drift and tracking, per-pixel stationary
/// shot cycles, Poisson counts, and the derived (ref0 − sig) profile.
pub fn simulate_scan(
    config: &ScanConfig,
    drift: &DriftModel,
    tracking: &TrackingPolicy,
    rates: &RateConstants,
) -> Result<ScanResult> {
    config.validate()?;
    drift.validate()?;
    tracking.validate()?;
    rates.validate()?;

    let m_dead = propagator(0.0, config.cycle.dead_time_s, rates)?;
    let pi = pi_matrix();
    let efficiency = calibrate_efficiency(config, &m_dead, &pi, rates)?;

    let nx = config.x_nm.len();
    let reps = config.reps_per_pixel as f64;
    let line_wall_s =
        nx as f64 * reps * config.cycle.duration_s() * config.overhead;

    let mut sig_counts = Vec::with_capacity(config.pixel_count());
    let mut ref0_counts = Vec::with_capacity(config.pixel_count());
    let mut line_offsets = Vec::with_capacity(config.y_nm.len());
    let mut temperatures = Vec::with_capacity(config.y_nm.len());
    let mut correction_nm = 0.0;

    for (line, y) in config.y_nm.iter().enumerate() {
        let t_line = line as f64 * line_wall_s;
        let mut lrng = line_rng(config.seed, line);
        let raw_nm = match drift {
            DriftModel::Stabilized { jitter_nm } => {
                if *jitter_nm > 0.0 {
                    Normal::new(0.0, *jitter_nm)
                        .map_err(|_| Error::invalid("jitter"))?
                        .sample(&mut lrng)
                } else {
                    0.0
                }
            }
            DriftModel::TemperatureCoupled {
                coupling_nm_per_k, ..
            } => coupling_nm_per_k * drift.temperature_k(t_line),
        };
        if tracking.recenter_every_lines > 0
            && line % tracking.recenter_every_lines as usize == 0
        {
            // The tracker measures the current displacement and re-zeros
            // it, up to its localization error.
            let err = if tracking.precision_nm > 0.0 {
                Normal::new(0.0, tracking.precision_nm)
                    .map_err(|_| Error::invalid("precision"))?
                    .sample(&mut lrng)
            } else {
                0.0
            };
            correction_nm = raw_nm + err;
        }
        let net_nm = raw_nm - correction_nm;
        line_offsets.push(net_nm);
        temperatures.push(drift.temperature_k(t_line));

        for (ix, x) in config.x_nm.iter().enumerate() {
            let (e_sig, e_ref) = shot_yields([*x, *y], net_nm, config, &m_dead, &pi, rates)?;
            let mut prng = pixel_rng(config.seed, line, ix);
            sig_counts.push(poisson_count(&mut prng, reps * efficiency * e_sig));
            ref0_counts.push(poisson_count(&mut prng, reps * efficiency * e_ref));
        }
    }

    let mut profile: Vec<f64> = sig_counts
        .iter()
        .zip(&ref0_counts)
        .map(|(s, r)| *r as f64 - *s as f64)
        .collect();
    if config.smooth_profile && nx > 1 {
        // Two-pixel running average along the scan direction, in place,
        // walking backwards so each pixel pairs with its original-left
        // neighbor.
        for line in 0..config.y_nm.len() {
            let base = line * nx;
            for i in (1..nx).rev() {
                profile[base + i] = 0.5 * (profile[base + i] + profile[base + i - 1]);
            }
        }
    }

    Ok(ScanResult {
        x_nm: config.x_nm.clone(),
        y_nm: config.y_nm.clone(),
        sig_counts,
        ref0_counts,
        profile,
        line_offsets_nm: line_offsets,
        temperature_k: temperatures,
        elapsed_s: acquisition_budget(config).actual_s,
        seed: config.seed,
    })
}

/// Photon-limited estimate of a contrast curve.
///
/// Each sweep point is measured as two Poisson channels with expectations
/// `B(1 ± C)/2` and estimated as `(F0 - F1)/(F0 + F1)`;
/// `photons_per_point` is the total budget B per point. A non-finite
/// budget returns the model exactly.
pub fn simulate_coherence_experiment(
    xs: &[f64],
    contrast_model: impl Fn(f64) -> Result<f64>,
    photons_per_point: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if photons_per_point.is_finite() && photons_per_point <= 0.0 {
        return Err(Error::invalid(format!(
            "photon budget {photons_per_point}"
        )));
    }
    let mut out = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        let c = contrast_model(*x)?;
        if !(-1.0..=1.0).contains(&c) {
            return Err(Error::invalid(format!(
                "model contrast {c} outside [-1, 1]"
            )));
        }
        if !photons_per_point.is_finite() {
            out.push(c);
            continue;
        }
        let mut rng = pixel_rng(seed, 0, i);
        let f0 = poisson_count(&mut rng, photons_per_point * (1.0 + c) / 2.0);
        let f1 = poisson_count(&mut rng, photons_per_point * (1.0 - c) / 2.0);
        let total = f0 + f1;
        out.push(if total == 0 {
            0.0
        } else {
            (f0 as f64 - f1 as f64) / total as f64
        });
    }
    Ok(out)
}

/// Uniformly spaced grid including both endpoints.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
