//! Five-level rate-equation model of NV- optical pumping and readout.
//!
//! Levels: `n1` ground m_s=0, `n2` ground m_s=-1, `n3` excited m_s=0,
//! `n4` excited m_s=-1, `n5` singlet shelf. With time measured in units of
//! the radiative rate γ (θ = γ·t) and pump parameter `s` the populations
//! obey
//!
//! ```text
//! dn1/dθ = -s·n1 + n3 + a51·n5
//! dn2/dθ = -s·n2 + n4 + a52·n5
//! dn3/dθ =  s·n1 - (1 + a35)·n3
//! dn4/dθ =  s·n2 - (1 + a45)·n4
//! dn5/dθ =  a35·n3 + a45·n4 - (a51 + a52)·n5
//! ```
//!
//! Every column of the generator sums to zero, so total population is
//! conserved exactly; the propagator over a constant-illumination segment
//! is the matrix exponential of the generator. Spin-dependent shelving
//! (`a45 > a35`) gives both the fluorescence contrast and, through the
//! singlet branching, the optical spin polarization that doughnut
//! repolarization imaging exploits.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::numeric::expm;
use crate::{Error, Result};

/// Population below which a level counts as numerically empty.
/// Matrix-exponential round-off can produce entries slightly below zero;
/// anything more negative than this indicates a real error.
const NEGATIVE_TOL: f64 = 1e-12;

/// Residual optical population below which the system counts as relaxed.
const RELAXED_TOL: f64 = 1e-9;

/// Optical rate constants relative to the radiative decay rate.
///
/// Loaded from a TOML parameter file (see `data/` for the shipped
/// room-temperature default and the schema documentation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConstants {
    /// Radiative decay rate of the excited triplet, 1/s.
    pub gamma_hz: f64,
    /// Singlet shelving from excited m_s=0, relative to `gamma_hz`.
    pub a35: f64,
    /// Singlet shelving from excited m_s=-1, relative to `gamma_hz`.
    pub a45: f64,
    /// Singlet decay into ground m_s=0, relative to `gamma_hz`.
    pub a51: f64,
    /// Singlet decay into ground m_s=-1, relative to `gamma_hz`.
    pub a52: f64,
    /// Cross-section over photon energy, m^2/J: s = sigma_scale·I/gamma_hz.
    pub sigma_scale: f64,
}

impl RateConstants {
    /// Shipped room-temperature defaults.
    pub fn room_temperature() -> Self {
        static CACHE: OnceLock<RateConstants> = OnceLock::new();
        *CACHE.get_or_init(|| {
            toml::from_str(include_str!("../data/nv_rates_room_temperature.toml"))
                .expect("bundled rate file parses")
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_hz", self.gamma_hz),
            ("a35", self.a35),
            ("a45", self.a45),
            ("a51", self.a51),
            ("a52", self.a52),
            ("sigma_scale", self.sigma_scale),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "rate constant {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.gamma_hz == 0.0 {
            return Err(Error::invalid("gamma_hz must be positive"));
        }
        if self.a51 + self.a52 == 0.0 {
            return Err(Error::invalid(
                "singlet must decay: a51 + a52 must be positive",
            ));
        }
        Ok(())
    }

    /// Dimensionless pump parameter for a beam intensity in W/m^2.
    pub fn pump_parameter(&self, intensity_w_m2: f64) -> f64 {
        self.sigma_scale * intensity_w_m2 / self.gamma_hz
    }
}

/// Populations of the five levels. Non-negative, sums to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState([f64; 5]);

impl PopulationState {
    pub fn new(populations: [f64; 5]) -> Result<Self> {
        for (i, n) in populations.iter().enumerate() {
            if !n.is_finite() || *n < -NEGATIVE_TOL || *n > 1.0 + 1e-9 {
                return Err(Error::invalid(format!(
                    "population n{} = {n} outside [0, 1]",
                    i + 1
                )));
            }
        }
        let total: f64 = populations.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "populations sum to {total}, expected 1"
            )));
        }
        let mut p = populations;
        for n in &mut p {
            if *n < 0.0 {
                *n = 0.0;
            }
        }
        Ok(Self(p))
    }

    /// Fully polarized ground m_s=0 state.
    pub fn polarized() -> Self {
        Self([1.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// Fully inverted ground m_s=-1 state (polarized followed by a π pulse).
    pub fn inverted() -> Self {
        Self([0.0, 1.0, 0.0, 0.0, 0.0])
    }

    /// Equal ground-state mixture, the thermal starting point.
    pub fn mixed() -> Self {
        Self([0.5, 0.5, 0.0, 0.0, 0.0])
    }

    /// Resonant microwave π rotation on the ground-state spin: swaps the
    /// two ground populations. Optical populations are untouched; within
    /// the sequences built here pulses are only applied when those are
    /// empty.
    pub fn apply_pi(&self) -> Self {
        let [n1, n2, n3, n4, n5] = self.0;
        Self([n2, n1, n3, n4, n5])
    }

    pub fn ground_ms0(&self) -> f64 {
        self.0[0]
    }

    pub fn ground_ms1(&self) -> f64 {
        self.0[1]
    }

    pub fn excited_ms0(&self) -> f64 {
        self.0[2]
    }

    pub fn excited_ms1(&self) -> f64 {
        self.0[3]
    }

    pub fn singlet(&self) -> f64 {
        self.0[4]
    }

    /// Total population outside the two ground states.
    pub fn optical_population(&self) -> f64 {
        self.0[2] + self.0[3] + self.0[4]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }

    fn from_vector(v: SVector<f64, 5>) -> Result<Self> {
        let mut p = [0.0; 5];
        for i in 0..5 {
            let n = v[i];
            if !n.is_finite() {
                return Err(Error::invalid("propagation produced non-finite population"));
            }
            if n < -NEGATIVE_TOL {
                return Err(Error::invalid(format!(
                    "propagation produced n{} = {n:e}, below -{NEGATIVE_TOL:e}",
                    i + 1
                )));
            }
            p[i] = n.max(0.0);
        }
        Ok(Self(p))
    }
}

/// One piecewise-constant illumination interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IlluminationSegment {
    /// Dimensionless pump parameter (1 = saturation).
    pub s: f64,
    /// Duration in seconds.
    pub duration_s: f64,
}

impl IlluminationSegment {
    pub fn new(s: f64, duration_s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::invalid(format!("pump parameter s = {s}")));
        }
        if !duration_s.is_finite() || duration_s < 0.0 {
            return Err(Error::invalid(format!("segment duration {duration_s} s")));
        }
        Ok(Self { s, duration_s })
    }
}

/// Generator of the rate equations in dimensionless time θ = γ·t.
pub fn rate_matrix(s: f64, rates: &RateConstants) -> SMatrix<f64, 5, 5> {
    let &RateConstants {
        a35,
        a45,
        a51,
        a52,
        ..
    } = rates;
    SMatrix::<f64, 5, 5>::from_row_slice(&[
        -s, 0.0, 1.0, 0.0, a51, //
        0.0, -s, 0.0, 1.0, a52, //
        s, 0.0, -(1.0 + a35), 0.0, 0.0, //
        0.0, s, 0.0, -(1.0 + a45), 0.0, //
        0.0, 0.0, a35, a45, -(a51 + a52),
    ])
}

/// Propagate a population state through a sequence of constant-illumination
/// segments with the exact matrix exponential of each generator.
pub fn evolve(
    state: &PopulationState,
    segments: &[IlluminationSegment],
    rates: &RateConstants,
) -> Result<PopulationState> {
    rates.validate()?;
    let mut v = SVector::<f64, 5>::from_column_slice(&state.0);
    for seg in segments {
        // Re-validate: segments may come from deserialized scenario files.
        IlluminationSegment::new(seg.s, seg.duration_s)?;
        let theta = rates.gamma_hz * seg.duration_s;
        if theta == 0.0 {
            continue;
        }
        let propagator = expm(&(rate_matrix(seg.s, rates) * theta))?;
        v = propagator * v;
    }
    PopulationState::from_vector(v)
}

/// Steady state under constant pumping, the normalized null vector of the
/// generator. Requires s > 0: at s = 0 every ground-state mixture is
/// stationary and the state is not unique.
pub fn steady_state(s: f64, rates: &RateConstants) -> Result<PopulationState> {
    rates.validate()?;
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::invalid(format!(
            "steady state requires s > 0, got {s}"
        )));
    }
    let m = rate_matrix(s, rates);
    // Replace the redundant last balance equation by normalization.
    let mut a = m;
    for j in 0..5 {
        a[(4, j)] = 1.0;
    }
    let b = SVector::<f64, 5>::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 1.0]);
    let n = a
        .lu()
        .solve(&b)
        .ok_or(Error::SingularSystem("steady-state balance"))?;
    let residual = (m * n).amax();
    if residual > 1e-10 {
        return Err(Error::SingularSystem("steady-state residual too large"));
    }
    PopulationState::from_vector(n)
}

/// Pump the state for `duration_s` at pump parameter `s`, then let it relax
/// in the dark until the optical levels are empty (< 1e-9). Returns the
/// ground m_s=0 occupancy, the polarization figure used throughout.
pub fn polarization(
    state: &PopulationState,
    s: f64,
    duration_s: f64,
    rates: &RateConstants,
) -> Result<f64> {
    let pumped = evolve(state, &[IlluminationSegment::new(s, duration_s)?], rates)?;
    Ok(relax_in_dark(&pumped, rates)?.ground_ms0())
}

/// Propagate at s = 0 until the optical population has decayed below 1e-9.
pub fn relax_in_dark(state: &PopulationState, rates: &RateConstants) -> Result<PopulationState> {
    rates.validate()?;
    // Chunked dark propagation; the slowest dark rate is the singlet decay.
    let theta_chunk = 25.0;
    let chunk = expm(&(rate_matrix(0.0, rates) * theta_chunk))?;
    let mut v = SVector::<f64, 5>::from_column_slice(&state.0);
    for _ in 0..10_000 {
        if v[2] + v[3] + v[4] < RELAXED_TOL {
            return PopulationState::from_vector(v);
        }
        v = chunk * v;
    }
    Err(Error::invalid(
        "optical population failed to relax; check rate constants",
    ))
}

/// Expected number of detected photons from a readout window of
/// `window_s` seconds at pump parameter `s`.
///
/// The emitted-photon count is the time integral of the excited-state
/// population times γ, accumulated exactly by augmenting the generator
/// with a photon-counting row; `efficiency` is the fraction of emitted
/// photons that reach the detector.
pub fn fluorescence(
    state: &PopulationState,
    s: f64,
    window_s: f64,
    rates: &RateConstants,
    efficiency: f64,
) -> Result<f64> {
    rates.validate()?;
    IlluminationSegment::new(s, window_s)?;
    if !efficiency.is_finite() || efficiency < 0.0 {
        return Err(Error::invalid(format!("collection efficiency {efficiency}")));
    }
    let m = rate_matrix(s, rates);
    let mut aug = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..5 {
        for j in 0..5 {
            aug[(i, j)] = m[(i, j)];
        }
    }
    // d(count)/dθ = n3 + n4; in θ units the rate γ is already absorbed.
    aug[(5, 2)] = 1.0;
    aug[(5, 3)] = 1.0;

    let theta = rates.gamma_hz * window_s;
    let propagator = expm(&(aug * theta))?;
    let mut v = SVector::<f64, 6>::zeros();
    for i in 0..5 {
        v[i] = state.0[i];
    }
    let emitted = (propagator * v)[5];
    Ok(efficiency * emitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rates() -> RateConstants {
        RateConstants::room_temperature()
    }

    #[test]
    fn bundled_rate_file_is_valid() {
        let r = rates();
        r.validate().unwrap();
        // Spin-dependent shelving is the whole point of the model.
        assert!(r.a45 > r.a35);
    }

    #[test]
    fn generator_columns_sum_to_zero() {
        for &s in &[0.0, 0.3, 1.0, 7.5] {
            let m = rate_matrix(s, &rates());
            for j in 0..5 {
                let col: f64 = (0..5).map(|i| m[(i, j)]).sum();
                assert!(col.abs() < 1e-15, "column {j} sums to {col} at s={s}");
            }
        }
    }

    #[test]
    fn zero_duration_is_identity() {
        let state = PopulationState::mixed();
        let out = evolve(
            &state,
            &[IlluminationSegment::new(1.0, 0.0).unwrap()],
            &rates(),
        )
        .unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn rejects_bad_segments() {
        assert!(IlluminationSegment::new(-0.1, 1e-6).is_err());
        assert!(IlluminationSegment::new(1.0, -1e-6).is_err());
        assert!(IlluminationSegment::new(f64::NAN, 1e-6).is_err());
        assert!(IlluminationSegment::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn rejects_bad_population_state() {
        assert!(PopulationState::new([0.5, 0.5, 0.1, 0.0, 0.0]).is_err());
        assert!(PopulationState::new([1.5, -0.5, 0.0, 0.0, 0.0]).is_err());
        assert!(PopulationState::new([f64::NAN, 1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn population_is_conserved_through_pumping() {
        let mut state = PopulationState::inverted();
        for i in 0..200 {
            let s = 0.05 + (i % 7) as f64;
            let dt = 10e-9 * (1 + i % 13) as f64;
            state = evolve(
                &state,
                &[IlluminationSegment::new(s, dt).unwrap()],
                &rates(),
            )
            .unwrap();
        }
        assert!((state.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_annihilated_by_generator() {
        for &s in &[0.01, 0.3, 1.0, 10.0] {
            let ss = steady_state(s, &rates()).unwrap();
            let m = rate_matrix(s, &rates());
            let v = SVector::<f64, 5>::from_column_slice(&ss.as_array());
            assert!((m * v).amax() < 1e-10);
            assert_relative_eq!(ss.total(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_needs_pumping() {
        assert!(steady_state(0.0, &rates()).is_err());
        assert!(steady_state(-1.0, &rates()).is_err());
    }

    #[test]
    fn long_evolution_reaches_steady_state() {
        let s = 0.8;
        let evolved = evolve(
            &PopulationState::inverted(),
            &[IlluminationSegment::new(s, 1e-3).unwrap()],
            &rates(),
        )
        .unwrap();
        let ss = steady_state(s, &rates()).unwrap();
        for (a, b) in evolved.as_array().iter().zip(ss.as_array()) {
            assert_relative_eq!(a, &b, epsilon = 1e-9);
        }
    }

    #[test]
    fn dark_relaxation_from_excited_ms0_matches_branching() {
        // From n3 = 1 the decay tree gives the ground m_s=0 occupancy
        // 1/(1+a35) + a35/(1+a35) · a51/(a51+a52) in closed form.
        let r = rates();
        let start = PopulationState::new([0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let relaxed = relax_in_dark(&start, &r).unwrap();
        let direct = 1.0 / (1.0 + r.a35);
        let via_singlet = r.a35 / (1.0 + r.a35) * r.a51 / (r.a51 + r.a52);
        assert_relative_eq!(relaxed.ground_ms0(), direct + via_singlet, epsilon = 1e-8);
        assert!(relaxed.optical_population() < 1e-9);
    }

    #[test]
    fn polarization_grows_with_duration() {
        let r = rates();
        let mut last = 0.0;
        // Tolerance covers propagator round-off once the plateau is reached.
        for &t in &[1e-6, 5e-6, 20e-6, 100e-6, 5e-3] {
            let p = polarization(&PopulationState::mixed(), 0.05, t, &r).unwrap();
            assert!(p >= last - 1e-9, "polarization not monotone at t={t}");
            last = p;
        }
    }

    #[test]
    fn polarization_is_nonlinear_in_pump() {
        let r = rates();
        let p1 = polarization(&PopulationState::mixed(), 0.02, 20e-6, &r).unwrap();
        let p2 = polarization(&PopulationState::mixed(), 0.04, 20e-6, &r).unwrap();
        assert!((p2 - 2.0 * p1).abs() > 1e-3);
    }

    #[test]
    fn long_weak_pulse_beats_short_pulse_plateau() {
        // A 5 ms pulse at 5% of saturation exceeds the 70% level that
        // caps short-pulse polarization, and is at least as good as a
        // 100 µs pulse at the same intensity.
        let r = rates();
        let long = polarization(&PopulationState::mixed(), 0.05, 5e-3, &r).unwrap();
        let short = polarization(&PopulationState::mixed(), 0.05, 100e-6, &r).unwrap();
        assert!(long > 0.70, "long weak pulse polarization {long}");
        assert!(long >= short - 1e-9);
    }

    #[test]
    fn ms0_is_brighter_than_ms1() {
        let r = rates();
        for &window in &[50e-9, 200e-9, 350e-9, 1e-6] {
            let bright = fluorescence(&PopulationState::polarized(), 1.0, window, &r, 1.0).unwrap();
            let dark = fluorescence(&PopulationState::inverted(), 1.0, window, &r, 1.0).unwrap();
            assert!(
                bright > dark,
                "no readout contrast for window {window}: {bright} vs {dark}"
            );
        }
    }

    #[test]
    fn fluorescence_scales_with_efficiency_and_rejects_negative() {
        let r = rates();
        let f1 = fluorescence(&PopulationState::polarized(), 1.0, 350e-9, &r, 1.0).unwrap();
        let f2 = fluorescence(&PopulationState::polarized(), 1.0, 350e-9, &r, 0.25).unwrap();
        assert_relative_eq!(f2, 0.25 * f1, max_relative = 1e-12);
        assert!(fluorescence(&PopulationState::polarized(), 1.0, 350e-9, &r, -0.1).is_err());
    }

    #[test]
    fn pi_pulse_swaps_ground_states() {
        let s = PopulationState::new([0.7, 0.1, 0.1, 0.05, 0.05]).unwrap();
        let p = s.apply_pi();
        assert_eq!(p.ground_ms0(), 0.1);
        assert_eq!(p.ground_ms1(), 0.7);
        assert_eq!(p.singlet(), s.singlet());
    }

    #[test]
    fn rate_file_round_trips_bit_exact() {
        let r = rates();
        let text = toml::to_string(&r).unwrap();
        let back: RateConstants = toml::from_str(&text).unwrap();
        assert_eq!(r, back);
    }
}
