//! The narrowband filter kernel against the Ornstein-Uhlenbeck Monte Carlo,
//! across the coherent-to-diffusive crossover.

use spinresolft::constants::GAMMA_E;
use spinresolft::oracle::ou_dephasing_contrast;
use spinresolft::sequences::filter_kernel;

/// Field amplitude that puts the dephasing exponent at `chi` for kernel
/// value `k`, so every grid point is measured at comparable contrast.
fn field_for_exponent(chi: f64, k: f64) -> f64 {
    std::f64::consts::PI / GAMMA_E * (chi / (2.0 * k)).sqrt()
}

#[test]
fn filter_kernel_matches_ou_monte_carlo_across_crossover() {
    let tau = 416.43e-9;
    let carrier = 0.5 / tau;
    let n_pulses = 16;
    let total = n_pulses as f64 * tau;
    for (i, ratio) in [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0].iter().enumerate() {
        let t_c = total / ratio;
        let k = filter_kernel(total, t_c).unwrap();
        let b = field_for_exponent(0.5, k);
        let contrast = ou_dephasing_contrast(b, carrier, t_c, tau, n_pulses, 20_000, 40 + i as u64);
        let k_mc = -contrast.ln() * std::f64::consts::PI.powi(2) / (2.0 * (GAMMA_E * b).powi(2));
        let rel = (k_mc - k).abs() / k;
        assert!(
            rel < 0.05,
            "T/t_c = {ratio}: kernel {k:.3e}, Monte Carlo {k_mc:.3e}, off by {:.1}%",
            rel * 100.0
        );
    }
}

#[test]
fn kernel_limits_bracket_the_monte_carlo() {
    // Deep coherent regime: K ≈ T²/2 regardless of t_c.
    let tau = 416.43e-9;
    let n_pulses = 4;
    let total = n_pulses as f64 * tau;
    let t_c = 400.0 * total;
    let k = filter_kernel(total, t_c).unwrap();
    assert!((k - total * total / 2.0).abs() / k < 2e-3);
    let b = field_for_exponent(0.5, k);
    let contrast = ou_dephasing_contrast(b, 0.5 / tau, t_c, tau, n_pulses, 20_000, 7);
    let k_mc = -contrast.ln() * std::f64::consts::PI.powi(2) / (2.0 * (GAMMA_E * b).powi(2));
    assert!((k_mc - k).abs() / k < 0.05);
}
