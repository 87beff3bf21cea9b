//! Reference implementations used by the test suites: independent
//! integrators and Monte Carlo estimators that cross-check the closed-form
//! and matrix-exponential paths elsewhere in the crate. Everything here
//! favors transparency over speed and shares no code with the paths it
//! verifies beyond the constants module.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constants::{GAMMA_E, GAMMA_P, HBAR, MU_0};
use crate::fields::{NVOrientation, ProtonBath};
use crate::numeric::gauss_legendre;
use crate::photophysics::RateConstants;

/// Final state and accumulated optical-level occupancy from a fixed-step
/// integration of the five-level rate equations.
#[derive(Debug, Clone, Copy)]
pub struct Rk4Outcome {
    pub state: [f64; 5],
    /// ∫(n3 + n4) dθ over the integrated span, θ in lifetime units.
    pub optical_time_integral: f64,
}

/// Classic RK4 on the five-level rate equations, written out term by term
/// rather than through the generator matrix. `theta` is the dimensionless
/// duration (physical time × gamma), `s` the pump parameter.
pub fn rk4_rate_equations(
    start: [f64; 5],
    s: f64,
    theta: f64,
    rates: &RateConstants,
    n_steps: usize,
) -> Rk4Outcome {
    assert!(n_steps > 0, "need at least one step");
    let deriv = |n: [f64; 6]| -> [f64; 6] {
        [
            -s * n[0] + n[2] + rates.a51 * n[4],
            -s * n[1] + n[3] + rates.a52 * n[4],
            s * n[0] - (1.0 + rates.a35) * n[2],
            s * n[1] - (1.0 + rates.a45) * n[3],
            rates.a35 * n[2] + rates.a45 * n[3] - (rates.a51 + rates.a52) * n[4],
            n[2] + n[3],
        ]
    };
    let h = theta / n_steps as f64;
    let mut y = [start[0], start[1], start[2], start[3], start[4], 0.0];
    for _ in 0..n_steps {
        let k1 = deriv(y);
        let k2 = deriv(step(y, k1, h / 2.0));
        let k3 = deriv(step(y, k2, h / 2.0));
        let k4 = deriv(step(y, k3, h));
        for i in 0..6 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Rk4Outcome {
        state: [y[0], y[1], y[2], y[3], y[4]],
        optical_time_integral: y[5],
    }
}

fn step(y: [f64; 6], k: [f64; 6], h: f64) -> [f64; 6] {
    let mut out = y;
    for i in 0..6 {
        out[i] += h * k[i];
    }
    out
}

/// Monte Carlo echo contrast ⟨cos φ⟩ for a π train dephased by a narrowband
/// field `B(t) = B_rms·[x(t)·cos(2πνt) + y(t)·sin(2πνt)]/√2` with x, y
/// independent unit-variance Ornstein-Uhlenbeck processes of correlation
/// time `t_c_s`. The train has `n_pulses` π pulses at spacing `tau_s` with
/// τ/2 lead-in and lead-out, matching the toggling function of an XY-style
/// sequence. Envelope frozen at sub-interval midpoints (16 per τ), carrier
/// integrated in closed form; OU updates are exact for any step.
#[allow(clippy::too_many_arguments)]
pub fn ou_dephasing_contrast(
    b_rms_t: f64,
    carrier_hz: f64,
    t_c_s: f64,
    tau_s: f64,
    n_pulses: usize,
    n_realizations: usize,
    seed: u64,
) -> f64 {
    assert!(n_pulses >= 1 && n_realizations >= 1);
    let mut bounds = vec![0.0, 0.5 * tau_s];
    for i in 1..n_pulses {
        bounds.push((i as f64 + 0.5) * tau_s);
    }
    bounds.push(n_pulses as f64 * tau_s);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = std::f64::consts::TAU * carrier_hz;
    let scale = GAMMA_E * b_rms_t / 2f64.sqrt();
    let mut sum_cos = 0.0;
    for _ in 0..n_realizations {
        let mut x: f64 = rng.sample(StandardNormal);
        let mut y: f64 = rng.sample(StandardNormal);
        let mut t_state = 0.0;
        let mut phi = 0.0;
        for (idx, pair) in bounds.windows(2).enumerate() {
            let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
            let dur = pair[1] - pair[0];
            let n_sub = ((dur / tau_s) * 16.0).ceil() as usize;
            let dt = dur / n_sub as f64;
            for k in 0..n_sub {
                let t0 = pair[0] + k as f64 * dt;
                let t1 = t0 + dt;
                let tm = 0.5 * (t0 + t1);
                let decay = (-(tm - t_state) / t_c_s).exp();
                let kick = (1.0 - decay * decay).sqrt();
                x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
                y = y * decay + kick * rng.sample::<f64, _>(StandardNormal);
                t_state = tm;
                let int_cos = ((w * t1).sin() - (w * t0).sin()) / w;
                let int_sin = ((w * t0).cos() - (w * t1).cos()) / w;
                phi += sign * (x * int_cos + y * int_sin);
            }
        }
        sum_cos += (scale * phi).cos();
    }
    sum_cos / n_realizations as f64
}

/// Biot-Savart field of a straight wire of finite half-length along +y
/// through `center_m`, evaluated by quadrature of `dl̂ × R̂ / R²` with nodes
/// placed by the angle subtended at the field point. Converges to the
/// infinite-wire field as `half_length_m` grows.
pub fn biot_savart_wire(
    pos_m: [f64; 3],
    center_m: [f64; 3],
    current_a: f64,
    half_length_m: f64,
    n_segments: usize,
) -> [f64; 3] {
    let x = pos_m[0] - center_m[0];
    let y0 = pos_m[1] - center_m[1];
    let z = pos_m[2] - center_m[2];
    let r = x.hypot(z);
    assert!(r > 0.0, "field point on the wire axis");
    // Source at height y contributes (ŷ × R̂)/R² dy with R̂ independent of
    // the in-plane direction: ŷ × R = (z, 0, −x) for every source point.
    let lo = ((-half_length_m - y0) / r).atan();
    let hi = ((half_length_m - y0) / r).atan();
    let (nodes, weights) = gauss_legendre(n_segments);
    let mut integral = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let psi = 0.5 * ((hi - lo) * t + hi + lo);
        integral += 0.5 * (hi - lo) * w * psi.cos();
    }
    let scale = MU_0 * current_a / (2.0 * std::f64::consts::TAU * r * r) * integral / r;
    [scale * z * r, 0.0, -scale * x * r]
}

/// Monte Carlo estimate of the RMS transverse-coupling field (T, quadrature
/// envelope convention) from statistically polarized protons filling the
/// half-space above the surface, sensor at depth `bath.d_nv_m`. Positions
/// are importance-sampled: uniform direction on the upper hemisphere, then
/// radius from p(r) ∝ r⁻⁴ beyond the surface-entry distance, which cancels
/// the r⁻⁶ of the squared coupling and leaves only angular variance.
pub fn dipolar_brms_mc(
    bath: &ProtonBath,
    nv: &NVOrientation,
    n_samples: usize,
    seed: u64,
) -> f64 {
    assert!(n_samples > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = MU_0 * HBAR * GAMMA_P / (2.0 * std::f64::consts::TAU);
    let n = nv.axis();
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let phi = std::f64::consts::TAU * rng.gen::<f64>();
        let sin_polar = (1.0 - u * u).sqrt();
        let dir = [sin_polar * phi.cos(), sin_polar * phi.sin(), u];
        let r_min = bath.d_nv_m / u;
        let r = r_min * (1.0 - rng.gen::<f64>()).powf(-1.0 / 3.0);
        // Coupling vector a = K/r³·(3(n̂·r̂)r̂ − n̂); transverse part drives
        // the Larmor-frequency field.
        let c = n[0] * dir[0] + n[1] * dir[1] + n[2] * dir[2];
        let kr3 = k / (r * r * r);
        let a = [
            kr3 * (3.0 * c * dir[0] - n[0]),
            kr3 * (3.0 * c * dir[1] - n[1]),
            kr3 * (3.0 * c * dir[2] - n[2]),
        ];
        let a_par = a[0] * n[0] + a[1] * n[1] + a[2] * n[2];
        let a_perp2 = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] - a_par * a_par).max(0.0);
        // Inverse sampling density over the half-space volume.
        let weight = std::f64::consts::TAU * r.powi(6) / (3.0 * r_min.powi(3));
        acc += bath.rho_per_m3 * 0.5 * a_perp2 * weight;
    }
    (acc / n_samples as f64).sqrt()
}

/// Ordinary least squares through the normal equations, for cross-checking
/// iterative fits on linear sub-problems. `design` is row-major (one row
/// per observation).
pub fn linear_least_squares(design: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    assert!(!design.is_empty() && design.len() == y.len());
    let n_par = design[0].len();
    let a = DMatrix::from_fn(design.len(), n_par, |i, j| design[i][j]);
    let rhs = DMatrix::from_fn(y.len(), 1, |i, _| y[i]);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * rhs;
    let sol = ata
        .lu()
        .solve(&atb)
        .expect("normal equations singular");
    sol.column(0).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{b_field, WireGeometry};
    use crate::photophysics::{evolve, IlluminationSegment, PopulationState};
    use approx::assert_relative_eq;

    #[test]
    fn rk4_matches_single_level_decay() {
        let rates = RateConstants::room_temperature();
        // Dark decay of the m_s=0 excited level: n3(θ) = exp(-(1+a35)·θ).
        let out = rk4_rate_equations([0.0, 0.0, 1.0, 0.0, 0.0], 0.0, 0.8, &rates, 400);
        assert_relative_eq!(
            out.state[2],
            (-(1.0 + rates.a35) * 0.8f64).exp(),
            max_relative = 1e-10
        );
        let total: f64 = out.state.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn rk4_agrees_with_matrix_exponential_path() {
        let rates = RateConstants::room_temperature();
        let start = PopulationState::mixed();
        let seg = IlluminationSegment::new(2.5, 40e-9).unwrap();
        let evolved = evolve(&start, &[seg], &rates).unwrap();
        let theta = rates.gamma_hz * 40e-9;
        let out = rk4_rate_equations(start.as_array(), 2.5, theta, &rates, 20_000);
        for (a, b) in evolved.as_array().iter().zip(&out.state) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn biot_savart_converges_to_infinite_wire() {
        let wire = WireGeometry::new([1e-6, 0.0, -2e-6], 12.5e-6, 7e-3, 8.3e3).unwrap();
        let pos = [24e-6, 3e-6, 24e-6];
        let exact = b_field(pos, &wire).unwrap();
        let oracle = biot_savart_wire(pos, wire.center_m, wire.current_a, 10.0, 96);
        for (a, b) in exact.iter().zip(&oracle) {
            assert_relative_eq!(a, b, epsilon = exact[0].abs() * 1e-10);
        }
    }

    #[test]
    fn dipolar_mc_is_seed_deterministic_and_converges() {
        let bath = ProtonBath::new(5e28, 3e-9).unwrap();
        let nv = NVOrientation::standard();
        let a = dipolar_brms_mc(&bath, &nv, 50_000, 11);
        let b = dipolar_brms_mc(&bath, &nv, 50_000, 11);
        assert_eq!(a, b);
        let wide = dipolar_brms_mc(&bath, &nv, 200_000, 12);
        assert_relative_eq!(a, wide, max_relative = 0.01);
    }

    #[test]
    fn ou_contrast_trivial_cases() {
        // Zero field: no dephasing.
        let c = ou_dephasing_contrast(0.0, 1.2e6, 20e-6, 416e-9, 8, 50, 3);
        assert_eq!(c, 1.0);
        // Weak field: still near unity.
        let c = ou_dephasing_contrast(1e-9, 1.2e6, 20e-6, 416e-9, 8, 200, 3);
        assert!(c > 0.999);
    }

    #[test]
    fn least_squares_recovers_exact_line() {
        let design: Vec<Vec<f64>> = (0..7).map(|i| vec![1.0, i as f64]).collect();
        let y: Vec<f64> = (0..7).map(|i| 2.0 - 0.5 * i as f64).collect();
        let sol = linear_least_squares(&design, &y);
        assert_relative_eq!(sol[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(sol[1], -0.5, max_relative = 1e-12);
    }
}
