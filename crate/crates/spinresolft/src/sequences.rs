//! Microwave pulse sequences, echo phase accumulation, coherence decay,
//! and the narrowband filter kernel for nuclear-signal detection.
//!
//! Sequences are element lists with durations in ns. Microwave rotations
//! are treated as instantaneous; their X/Y phases follow the published
//! pattern (they matter for pulse-error robustness in the lab, not for
//! the ideal toggling-frame model used here).

use serde::{Deserialize, Serialize};

use crate::constants::{GAMMA_E, GAMMA_P_HZ_PER_T};
use crate::sequences::PulseElement::{FreeEvolution, GreenPulse, MicrowavePulse, Readout};
use crate::{Error, Result};

const NS: f64 = 1e-9;

/// Which beam a green-light element uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamKind {
    Gaussian,
    Doughnut,
}

/// Microwave rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    PiHalf,
    Pi,
}

/// Microwave drive axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAxis {
    X,
    Y,
}

/// One element of a pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseElement {
    GreenPulse { beam: BeamKind, duration_ns: f64 },
    MicrowavePulse { pulse: PulseKind, axis: PhaseAxis },
    FreeEvolution { duration_ns: f64 },
    Readout { duration_ns: f64 },
}

impl PulseElement {
    pub fn duration_ns(&self) -> f64 {
        match *self {
            GreenPulse { duration_ns, .. } => duration_ns,
            MicrowavePulse { .. } => 0.0,
            FreeEvolution { duration_ns } => duration_ns,
            Readout { duration_ns } => duration_ns,
        }
    }
}

/// An ordered pulse sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    #[serde(rename = "element")]
    pub elements: Vec<PulseElement>,
}

/// One sign window of the toggling function, ns from sequence start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TogglingWindow {
    pub sign: f64,
    pub start_ns: f64,
    pub end_ns: f64,
}

impl PulseSequence {
    pub fn new(elements: Vec<PulseElement>) -> Result<Self> {
        let seq = Self { elements };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.elements {
            let d = e.duration_ns();
            if !d.is_finite() || d < 0.0 {
                return Err(Error::invalid(format!("element duration {d} ns")));
            }
        }
        Ok(())
    }

    /// Wall-clock duration of the whole sequence, ns.
    pub fn total_duration_ns(&self) -> f64 {
        self.elements.iter().map(|e| e.duration_ns()).sum()
    }

    /// Free evolution between the opening and closing π/2 pulses, ns.
    pub fn total_free_evolution_ns(&self) -> Result<f64> {
        Ok(self
            .toggling_function()?
            .iter()
            .map(|w| w.end_ns - w.start_ns)
            .sum())
    }

    /// Sign windows of the phase-accumulation (toggling) function: +1 after
    /// the opening π/2, flipped by every π pulse, ended by the closing π/2.
    ///
    /// Green light inside the coherent window is rejected: it destroys the
    /// coherence the toggling frame describes.
    pub fn toggling_function(&self) -> Result<Vec<TogglingWindow>> {
        self.validate()?;
        let mut windows = Vec::new();
        let mut t = 0.0;
        let mut sign = 0.0;
        let mut open = false;
        let mut closed = false;
        for e in &self.elements {
            match *e {
                MicrowavePulse { pulse, .. } => match (pulse, open, closed) {
                    (PulseKind::PiHalf, false, false) => {
                        open = true;
                        sign = 1.0;
                    }
                    (PulseKind::PiHalf, true, false) => {
                        open = false;
                        closed = true;
                    }
                    (PulseKind::PiHalf, _, true) => {
                        return Err(Error::invalid("more than two π/2 pulses"));
                    }
                    (PulseKind::Pi, true, _) => sign = -sign,
                    // π outside the coherent window rotates populations but
                    // accumulates no phase; nothing to record.
                    (PulseKind::Pi, false, _) => {}
                },
                FreeEvolution { duration_ns } => {
                    if open && duration_ns > 0.0 {
                        windows.push(TogglingWindow {
                            sign,
                            start_ns: t,
                            end_ns: t + duration_ns,
                        });
                    }
                    t += duration_ns;
                }
                GreenPulse { duration_ns, .. } => {
                    if open {
                        return Err(Error::invalid(
                            "green pulse inside the coherent window",
                        ));
                    }
                    t += duration_ns;
                }
                Readout { duration_ns } => {
                    if open {
                        return Err(Error::invalid("readout inside the coherent window"));
                    }
                    t += duration_ns;
                }
            }
        }
        if open || !closed {
            return Err(Error::invalid(
                "sequence does not contain a closed π/2 ... π/2 block",
            ));
        }
        Ok(windows)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let seq: Self = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        seq.validate()?;
        Ok(seq)
    }
}

/// Default fluorescence readout window, ns.
pub const DEFAULT_READOUT_NS: f64 = 350.0;

/// Hahn echo: π/2 — τ — π — τ — π/2, then readout. `tau_ns` is the free
/// interval on each side of the refocusing pulse; total free evolution 2τ.
pub fn build_hahn_echo(tau_ns: f64) -> Result<PulseSequence> {
    check_tau(tau_ns)?;
    PulseSequence::new(vec![
        MicrowavePulse {
            pulse: PulseKind::PiHalf,
            axis: PhaseAxis::X,
        },
        FreeEvolution { duration_ns: tau_ns },
        MicrowavePulse {
            pulse: PulseKind::Pi,
            axis: PhaseAxis::Y,
        },
        FreeEvolution { duration_ns: tau_ns },
        MicrowavePulse {
            pulse: PulseKind::PiHalf,
            axis: PhaseAxis::X,
        },
        Readout {
            duration_ns: DEFAULT_READOUT_NS,
        },
    ])
}

/// XY8-k: π/2 — τ/2 — [π train, inter-pulse τ, phases XYXYYXYX per block,
/// 8k pulses] — τ/2 — π/2, then readout. Total free evolution 8kτ; the
/// train filters at frequency 1/(2τ).
pub fn build_xy8(k: usize, tau_ns: f64) -> Result<PulseSequence> {
    check_tau(tau_ns)?;
    if k == 0 {
        return Err(Error::invalid("XY8 repetition count must be at least 1"));
    }
    const BLOCK: [PhaseAxis; 8] = [
        PhaseAxis::X,
        PhaseAxis::Y,
        PhaseAxis::X,
        PhaseAxis::Y,
        PhaseAxis::Y,
        PhaseAxis::X,
        PhaseAxis::Y,
        PhaseAxis::X,
    ];
    let mut elements = vec![
        MicrowavePulse {
            pulse: PulseKind::PiHalf,
            axis: PhaseAxis::X,
        },
        FreeEvolution {
            duration_ns: tau_ns / 2.0,
        },
    ];
    let n = 8 * k;
    for i in 0..n {
        elements.push(MicrowavePulse {
            pulse: PulseKind::Pi,
            axis: BLOCK[i % 8],
        });
        elements.push(FreeEvolution {
            duration_ns: if i + 1 == n { tau_ns / 2.0 } else { tau_ns },
        });
    }
    elements.push(MicrowavePulse {
        pulse: PulseKind::PiHalf,
        axis: PhaseAxis::X,
    });
    elements.push(Readout {
        duration_ns: DEFAULT_READOUT_NS,
    });
    PulseSequence::new(elements)
}

fn check_tau(tau_ns: f64) -> Result<()> {
    if !tau_ns.is_finite() || tau_ns <= 0.0 {
        return Err(Error::invalid(format!("free interval τ = {tau_ns} ns")));
    }
    Ok(())
}

/// Insert the doughnut repolarization pulse immediately before the readout,
/// turning a sensing sequence into its spin-RESOLFT variant. Microwave
/// timing is untouched, so the accumulated phase is identical.
pub fn wrap_spin_resolft(seq: &PulseSequence, doughnut_ns: f64) -> Result<PulseSequence> {
    if !doughnut_ns.is_finite() || doughnut_ns < 0.0 {
        return Err(Error::invalid(format!(
            "doughnut duration {doughnut_ns} ns"
        )));
    }
    let readout_at = seq
        .elements
        .iter()
        .rposition(|e| matches!(e, Readout { .. }))
        .ok_or_else(|| Error::invalid("sequence has no readout to precede"))?;
    let mut elements = seq.elements.clone();
    elements.insert(
        readout_at,
        GreenPulse {
            beam: BeamKind::Doughnut,
            duration_ns: doughnut_ns,
        },
    );
    PulseSequence::new(elements)
}

/// Sinusoidal test field `B(t) = amplitude·sin(2πft + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ACField {
    /// Peak amplitude, tesla.
    pub amplitude_t: f64,
    pub frequency_hz: f64,
    pub phase_rad: f64,
}

impl ACField {
    pub fn new(amplitude_t: f64, frequency_hz: f64, phase_rad: f64) -> Result<Self> {
        if !amplitude_t.is_finite() || !frequency_hz.is_finite() || !phase_rad.is_finite() {
            return Err(Error::invalid("AC field parameters must be finite"));
        }
        if frequency_hz < 0.0 {
            return Err(Error::invalid(format!("frequency {frequency_hz} Hz")));
        }
        Ok(Self {
            amplitude_t,
            frequency_hz,
            phase_rad,
        })
    }

    /// ∫ B dt over [t0, t1] (seconds), closed form.
    fn integral(&self, t0: f64, t1: f64) -> f64 {
        let w = std::f64::consts::TAU * self.frequency_hz;
        if w == 0.0 {
            return self.amplitude_t * self.phase_rad.sin() * (t1 - t0);
        }
        self.amplitude_t / w * ((w * t0 + self.phase_rad).cos() - (w * t1 + self.phase_rad).cos())
    }
}

/// Phase accumulated by the electron spin over the sequence's toggling
/// windows, `φ = γ_e ∫ s(t)·B(t) dt`, in rad. Closed form per window.
pub fn echo_phase(seq: &PulseSequence, field: &ACField) -> Result<f64> {
    let windows = seq.toggling_function()?;
    let mut phi = 0.0;
    for w in &windows {
        phi += w.sign * field.integral(w.start_ns * NS, w.end_ns * NS);
    }
    Ok(GAMMA_E * phi)
}

/// Stretched-exponential coherence envelope `A·exp(-(t/T2)^p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceModel {
    pub amplitude: f64,
    pub t2_s: f64,
    pub exponent_p: f64,
}

impl CoherenceModel {
    pub fn new(amplitude: f64, t2_s: f64, exponent_p: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude <= 0.0 || amplitude > 1.2 {
            return Err(Error::invalid(format!("coherence amplitude {amplitude}")));
        }
        if !t2_s.is_finite() || t2_s <= 0.0 {
            return Err(Error::invalid(format!("T2 = {t2_s} s")));
        }
        if !exponent_p.is_finite() || exponent_p <= 0.5 || exponent_p > 6.0 {
            return Err(Error::invalid(format!(
                "stretch exponent p = {exponent_p} outside (0.5, 6]"
            )));
        }
        Ok(Self {
            amplitude,
            t2_s,
            exponent_p,
        })
    }

    pub fn envelope(&self, t_s: f64) -> f64 {
        if t_s <= 0.0 {
            return self.amplitude;
        }
        self.amplitude * (-(t_s / self.t2_s).powf(self.exponent_p)).exp()
    }
}

/// Echo contrast for a peak field `B_pk` applied through `field`'s waveform:
/// the coherence envelope at the sequence's free-evolution time times the
/// cosine of the accumulated phase.
pub fn magnetometry_contrast(
    seq: &PulseSequence,
    field: &ACField,
    coherence: &CoherenceModel,
) -> Result<f64> {
    let t_free = seq.total_free_evolution_ns()? * NS;
    let phase = echo_phase(seq, field)?;
    Ok(coherence.envelope(t_free) * phase.cos())
}

/// On-resonance filter kernel for a π train demodulating an exponentially
/// correlated signal of correlation time `t_c`:
/// `K(T) = t_c·T - t_c²·(1 - exp(-T/t_c))`, with T the total evolution time.
/// Limits: T ≪ t_c gives T²/2 (coherent), T ≫ t_c gives t_c·T (diffusive).
pub fn filter_kernel(total_time_s: f64, t_c_s: f64) -> Result<f64> {
    check_kernel_args(total_time_s, t_c_s)?;
    Ok(t_c_s * total_time_s - t_c_s * t_c_s * (1.0 - (-total_time_s / t_c_s).exp()))
}

/// Detuned generalization of [`filter_kernel`]: the demodulated envelope is
/// read at offset `detuning_rad_s` from the signal's center frequency,
/// `K_δ(T) = Re[T/a - (1 - exp(-aT))/a²]` with `a = 1/t_c - i·δ`.
/// Reduces exactly to the on-resonance kernel at δ = 0; even in δ.
pub fn filter_kernel_detuned(total_time_s: f64, t_c_s: f64, detuning_rad_s: f64) -> Result<f64> {
    check_kernel_args(total_time_s, t_c_s)?;
    if !detuning_rad_s.is_finite() {
        return Err(Error::invalid("detuning must be finite"));
    }
    let (t, p, d) = (total_time_s, 1.0 / t_c_s, detuning_rad_s);
    let a2 = p * p + d * d;
    // Re[T/a] with 1/a = (p + i·d)/|a|².
    let term1 = t * p / a2;
    // e^{-aT} = e^{-pT}(cos dT + i sin dT); 1/a² = (p² - d² + 2ipd)/|a|⁴.
    let e = (-p * t).exp();
    let (re_num, im_num) = (1.0 - e * (d * t).cos(), -e * (d * t).sin());
    let (re_inv, im_inv) = ((p * p - d * d) / (a2 * a2), 2.0 * p * d / (a2 * a2));
    let term2 = re_num * re_inv - im_num * im_inv;
    Ok(term1 - term2)
}

fn check_kernel_args(total_time_s: f64, t_c_s: f64) -> Result<()> {
    if !total_time_s.is_finite() || total_time_s < 0.0 {
        return Err(Error::invalid(format!("evolution time {total_time_s} s")));
    }
    if !t_c_s.is_finite() || t_c_s <= 0.0 {
        return Err(Error::invalid(format!("correlation time {t_c_s} s")));
    }
    Ok(())
}

/// A narrowband statistical signal at the nuclear Larmor frequency.
///
/// `b_rms_t` is the RMS amplitude of the resonant envelope (quadrature sum:
/// the instantaneous field variance is `b_rms²/2`). That convention makes
/// the contrast formula below exact for Gaussian-envelope signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearSignal {
    pub nu_center_hz: f64,
    pub b_rms_t: f64,
    pub t_c_s: f64,
}

impl NuclearSignal {
    pub fn new(nu_center_hz: f64, b_rms_t: f64, t_c_s: f64) -> Result<Self> {
        if !nu_center_hz.is_finite() || nu_center_hz <= 0.0 {
            return Err(Error::invalid(format!("center frequency {nu_center_hz}")));
        }
        if !b_rms_t.is_finite() || b_rms_t < 0.0 {
            return Err(Error::invalid(format!("B_rms = {b_rms_t} T")));
        }
        if !t_c_s.is_finite() || t_c_s <= 0.0 {
            return Err(Error::invalid(format!("correlation time {t_c_s} s")));
        }
        Ok(Self {
            nu_center_hz,
            b_rms_t,
            t_c_s,
        })
    }
}

/// Coherence surviving an `n_pulses` π train at inter-pulse spacing `tau_s`
/// in the presence of a nuclear signal:
/// `C(τ) = exp(-(2/π²)·γ_e²·B_rms²·K_δ(N·τ))`,
/// with the detuning δ = 2π·(1/(2τ) - ν_center) of the train's passband
/// from the signal. The dip bottoms out exactly at τ = 1/(2·ν_center).
/// Multiply by a [`CoherenceModel`] envelope via `background` if the data
/// are not baseline-normalized.
pub fn nmr_contrast(
    tau_s: f64,
    n_pulses: usize,
    signal: &NuclearSignal,
    background: Option<&CoherenceModel>,
) -> Result<f64> {
    nmr_contrast_with_kernel(tau_s, n_pulses, signal, background, filter_kernel_detuned)
}

/// [`nmr_contrast`] with a caller-supplied kernel `K(T, t_c, δ)`; the
/// pluggable point for non-exponential bath correlation models.
pub fn nmr_contrast_with_kernel(
    tau_s: f64,
    n_pulses: usize,
    signal: &NuclearSignal,
    background: Option<&CoherenceModel>,
    kernel: impl Fn(f64, f64, f64) -> Result<f64>,
) -> Result<f64> {
    if !tau_s.is_finite() || tau_s <= 0.0 {
        return Err(Error::invalid(format!("inter-pulse spacing {tau_s} s")));
    }
    if n_pulses == 0 {
        return Err(Error::invalid("π train needs at least one pulse"));
    }
    let total = n_pulses as f64 * tau_s;
    let detuning = std::f64::consts::TAU * (0.5 / tau_s - signal.nu_center_hz);
    let k = kernel(total, signal.t_c_s, detuning)?;
    let chi = 2.0 / (std::f64::consts::PI * std::f64::consts::PI)
        * (GAMMA_E * signal.b_rms_t).powi(2)
        * k;
    let base = match background {
        Some(c) => c.envelope(total),
        None => 1.0,
    };
    Ok(base * (-chi).exp())
}

/// Proton Larmor frequency in a static field `b0_t` (tesla), in Hz.
pub fn larmor_frequency(b0_t: f64) -> Result<f64> {
    if !b0_t.is_finite() || b0_t < 0.0 {
        return Err(Error::invalid(format!("static field {b0_t} T")));
    }
    Ok(GAMMA_P_HZ_PER_T * b0_t)
}

/// Weighted combination of per-emitter signal curves; weights need not be
/// normalized but must not all vanish.
pub fn ensemble_signal(signals: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
    if signals.is_empty() {
        return Err(Error::invalid("ensemble of zero signals"));
    }
    let len = signals[0].0.len();
    let mut total_weight = 0.0;
    for (curve, w) in signals {
        if curve.len() != len {
            return Err(Error::invalid("ensemble curves differ in length"));
        }
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::invalid(format!("ensemble weight {w}")));
        }
        total_weight += w;
    }
    if total_weight <= 0.0 {
        return Err(Error::invalid("ensemble weights sum to zero"));
    }
    let mut out = vec![0.0; len];
    for (curve, w) in signals {
        for (o, c) in out.iter_mut().zip(curve) {
            *o += w / total_weight * c;
        }
    }
    Ok(out)
}
