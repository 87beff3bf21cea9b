//! Release gate: one test per shipping criterion, each against its stated
//! tolerance and runtime budget. The numbers come from the bundled
//! scenarios, so what passes here is exactly what the binary ships.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use spinresolft::config::load_scenario;
use spinresolft::constants::GAMMA_E;
use spinresolft::fields::{
    b_magnitude, b_parallel, gradient_parallel, proton_brms, rabi_frequency, ProjectionConvention,
    ProtonBath,
};
use spinresolft::fitting::{
    dominant_peak, fit_double_gaussian, fit_gaussian_center, fit_nmr_dip, fit_resolft_psf,
    fit_sinusoid_fixed_phase, fit_stretched_exponential, peak_separation, spectral_response,
};
use spinresolft::numeric::{correlation, mean_std};
use spinresolft::optics::{ideal_fwhm, pump_time_product_for_fwhm, DoughnutProfile};
use spinresolft::oracle::{biot_savart_wire, ou_dephasing_contrast, rk4_rate_equations};
use spinresolft::photophysics::{evolve, IlluminationSegment, PopulationState, RateConstants};
use spinresolft::scanner::{
    linear_grid, resolft_psf, simulate_coherence_experiment, simulate_scan, DriftModel,
    TrackingPolicy,
};
use spinresolft::sequences::{
    build_hahn_echo, echo_phase, filter_kernel, larmor_frequency, magnetometry_contrast,
    nmr_contrast, ACField, CoherenceModel, NuclearSignal,
};

const DOUGHNUT_S0: f64 = 13.885854495367;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn default_scenario() -> spinresolft::config::Scenario {
    load_scenario(&scenario_path("default.toml")).unwrap().0
}

#[test]
fn acceptance_01_conservation_and_oracle_equivalence() {
    let rates = RateConstants::room_temperature();
    let clock = Instant::now();

    // A 10^4-segment pump/dark/probe/readout train at pulse-length scale.
    let pattern = [(3.0, 30e-9), (0.0, 20e-9), (DOUGHNUT_S0, 45e-9), (1.0, 12e-9)];
    let train: Vec<IlluminationSegment> = (0..10_000)
        .map(|i| {
            let (s, d) = pattern[i % pattern.len()];
            IlluminationSegment::new(s, d).unwrap()
        })
        .collect();
    let end = evolve(&PopulationState::mixed(), &train, &rates).unwrap();
    let drift = (end.total() - 1.0).abs();
    assert!(drift < 1e-9, "population total drifted by {drift:.2e}");

    // Propagator against the fixed-step integrator over the pump/duration
    // grid, including the stiffest corner.
    let mut worst = 0.0f64;
    for &s in &[0.05, 0.5, 2.0, 8.0, DOUGHNUT_S0, 40.0] {
        for &theta in &[0.1, 1.0, 10.0, 138.4] {
            let seg = IlluminationSegment::new(s, theta / rates.gamma_hz).unwrap();
            let state = evolve(&PopulationState::mixed(), &[seg], &rates).unwrap();
            let n_steps = 20_000.max((theta * 1500.0) as usize);
            let oracle =
                rk4_rate_equations(PopulationState::mixed().as_array(), s, theta, &rates, n_steps);
            for (a, b) in state.as_array().iter().zip(&oracle.state) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-6, "propagator vs integrator gap {worst:.2e}");

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "ran {elapsed:.2} s, budget 1 s");
    println!(
        "criterion 01: PASS (conservation {drift:.1e}, oracle gap {worst:.1e}, {elapsed:.2} s)"
    );
}

#[test]
fn acceptance_02_resolution_formula() {
    let clock = Instant::now();

    let confocal = ideal_fwhm(532.0, 1.45, 0.0).unwrap();
    assert_eq!((confocal * 10.0).round() / 10.0, 183.4, "confocal limit");

    // Square-root law on a 50-point grid: strictly decreasing, and
    // FWHM·sqrt(1 + Γτ) is the confocal constant.
    let mut prev = f64::INFINITY;
    for i in 0..50 {
        let gamma_tau = i as f64 * 4.0;
        let f = ideal_fwhm(532.0, 1.45, gamma_tau).unwrap();
        assert!(f < prev, "not monotone at Γτ = {gamma_tau}");
        assert!((f * (1.0 + gamma_tau).sqrt() - confocal).abs() < 1e-9);
        prev = f;
    }

    // Round trip through the inverse.
    let gamma_tau_20 = pump_time_product_for_fwhm(532.0, 1.45, 20.0).unwrap();
    let back = ideal_fwhm(532.0, 1.45, gamma_tau_20).unwrap();
    assert!((back - 20.0).abs() < 1e-9, "round trip gave {back} nm");
    assert!((18.0..=22.0).contains(&back));

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 1e-3, "ran {elapsed:.2e} s, budget 1 ms");
    println!(
        "criterion 02: PASS (confocal {confocal:.1} nm, Γτ(20 nm) = {gamma_tau_20:.1}, {elapsed:.1e} s)"
    );
}

#[test]
fn acceptance_03_psf_shape_invariance_and_model_comparison() {
    let rates = RateConstants::room_temperature();
    let clock = Instant::now();

    // Center leakage rescales the profile without moving its shape, up to
    // the leak levels the instrument actually holds.
    let x = linear_grid(-150.0, 150.0, 151);
    let tau = 2.1e-6;
    let mut shapes = Vec::new();
    let mut peaks = Vec::new();
    for eps in [0.0, 2e-4] {
        let doughnut = DoughnutProfile::new(DOUGHNUT_S0, 300.0, eps).unwrap();
        let y: Vec<f64> = x
            .iter()
            .map(|&r| resolft_psf(r, &doughnut, tau, &rates).unwrap())
            .collect();
        let peak = y.iter().cloned().fold(f64::MIN, f64::max);
        shapes.push(y.iter().map(|v| v / peak).collect::<Vec<f64>>());
        peaks.push(peak);
    }
    let shape_gap = shapes[0]
        .iter()
        .zip(&shapes[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let contrast_gap = (peaks[0] - peaks[1]).abs() / peaks[0];
    assert!(shape_gap <= 0.02, "normalized shapes differ by {shape_gap:.3}");
    assert!(
        contrast_gap > 0.005,
        "contrast should differ between leak levels, gap {contrast_gap:.4}"
    );

    // At long pulses the response grows repolarization shoulders; the
    // mechanistic fit must beat a Gaussian outright on the clean curve.
    let doughnut = DoughnutProfile::new(DOUGHNUT_S0, 300.0, 5e-4).unwrap();
    let y: Vec<f64> = x
        .iter()
        .map(|&r| resolft_psf(r, &doughnut, 5e-6, &rates).unwrap())
        .collect();
    let gauss = fit_gaussian_center(&x, &y, None).unwrap();
    let physical = fit_resolft_psf(&x, &y, None, &doughnut, 5e-6, &rates).unwrap();
    assert!(
        physical.chi2 < 1e-3 * gauss.chi2,
        "Gaussian χ² {:.3e} vs mechanistic χ² {:.3e}",
        gauss.chi2,
        physical.chi2
    );

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "ran {elapsed:.2} s, budget 10 s");
    println!(
        "criterion 03: PASS (shape gap {:.2}%, contrast gap {:.2}%, χ² ratio {:.1e}, {elapsed:.2} s)",
        shape_gap * 100.0,
        contrast_gap * 100.0,
        physical.chi2 / gauss.chi2
    );
}

#[test]
fn acceptance_04_imaging_round_trip() {
    let scenario = default_scenario();
    let scan = scenario.scan().unwrap();
    let beams = scenario.beams().unwrap();
    let clock = Instant::now();

    // Per-pixel shot noise at the nominal budget: 20 000 reps at 0.02
    // photons per shot is 400 expected counts, so 5% relative. A 0.2 nm
    // grid keeps beam variation out of the statistics.
    let mut flat = scan.clone();
    flat.x_nm = spinresolft::config::GridSpec {
        start: -0.1,
        stop: 0.1,
        n: 100,
        log: false,
    };
    flat.emitters.truncate(1);
    let config = flat.to_scan_config(beams, &scenario.cycle, 3).unwrap();
    let quiet = DriftModel::Stabilized { jitter_nm: 0.0 };
    let result = simulate_scan(&config, &quiet, &TrackingPolicy::disabled(), &scenario.rates).unwrap();
    let counts: Vec<f64> = result.ref0_counts.iter().map(|&c| c as f64).collect();
    let (mean, std) = mean_std(&counts);
    let relative = std / mean;
    assert!(
        (0.045..=0.055).contains(&relative),
        "per-pixel noise = {:.2}%",
        relative * 100.0
    );

    // Two sensors 105 nm apart, 50 seeded scans: every fit resolves them
    // and the quoted uncertainty stays on the ±16 nm scale.
    let mut seps = Vec::new();
    let mut sigmas = Vec::new();
    for seed in 0..50u64 {
        let config = scan.to_scan_config(beams, &scenario.cycle, 100 + seed).unwrap();
        let result =
            simulate_scan(&config, &scenario.drift, &scenario.tracking, &scenario.rates).unwrap();
        let fit = fit_double_gaussian(&result.x_nm, &result.profile, None).unwrap();
        let (sep, sigma) = peak_separation(&fit).unwrap();
        assert!(
            (sep - 105.0).abs() <= 16.0,
            "seed {seed}: separation {sep:.1} nm outside 105 ± 16"
        );
        assert!(sigma > 0.0 && sigma <= 16.0, "seed {seed}: σ = {sigma:.1} nm");
        seps.push(sep);
        sigmas.push(sigma);
    }
    let (sep_mean, sep_std) = mean_std(&seps);
    let (sig_mean, _) = mean_std(&sigmas);
    assert!((sep_mean - 105.0).abs() < 8.0, "mean separation {sep_mean:.1} nm");
    assert!(sep_std <= 16.0, "separation scatter {sep_std:.1} nm");

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "ran {elapsed:.1} s, budget 2 min");
    println!(
        "criterion 04: PASS (noise {:.2}%, separation {sep_mean:.1} ± {sep_std:.1} nm, fit σ ≈ {sig_mean:.1} nm, {elapsed:.1} s)",
        relative * 100.0
    );
}

#[test]
fn acceptance_05_coherence_fits() {
    let clock = Instant::now();
    let ts = linear_grid(10.0, 1200.0, 41);
    let photons = 10_000.0;

    let single = CoherenceModel::new(1.0, 800e-6, 3.2).unwrap();
    let mut hits = 0;
    for seed in 0..200u64 {
        let noisy = simulate_coherence_experiment(
            &ts,
            |t_us| Ok(single.envelope(t_us * 1e-6)),
            photons,
            seed,
        )
        .unwrap();
        let fit = fit_stretched_exponential(&ts, &noisy, None).unwrap();
        if (fit.value("p").unwrap() - 3.2).abs() <= 0.3 {
            hits += 1;
        }
    }
    assert!(hits >= 120, "p within ±0.3 in {hits}/200 replications");

    // A two-sensor mixture pulls the effective exponent below both
    // constituents.
    let nv1 = CoherenceModel::new(1.0, 800e-6, 3.2).unwrap();
    let nv2 = CoherenceModel::new(1.0, 450e-6, 3.5).unwrap();
    let (w1, w2) = (0.45, 0.55);
    let mut under = 0;
    for seed in 0..200u64 {
        let noisy = simulate_coherence_experiment(
            &ts,
            |t_us| Ok(w1 * nv1.envelope(t_us * 1e-6) + w2 * nv2.envelope(t_us * 1e-6)),
            photons,
            1000 + seed,
        )
        .unwrap();
        let fit = fit_stretched_exponential(&ts, &noisy, None).unwrap();
        if fit.value("p").unwrap() < 3.2 {
            under += 1;
        }
    }
    assert!(under >= 190, "p_mix under min(p1, p2) in {under}/200 replications");

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "ran {elapsed:.1} s, budget 1 min");
    println!(
        "criterion 05: PASS (single-sensor hits {hits}/200, mixture under {under}/200, {elapsed:.1} s)"
    );
}

#[test]
fn acceptance_06_magnetometry() {
    let scenario = default_scenario();
    let field = scenario.field().unwrap();
    let mag = scenario.magnetometry().unwrap();
    let clock = Instant::now();

    // The geometry really is a ~1 nT/nm gradient at the sensor pair.
    let wire_read = field.wire(mag.read_current_ma).unwrap();
    let grad = gradient_parallel(
        field.nv_position_m(0).unwrap(),
        &wire_read,
        &field.nv[0].orientation,
        field.projection,
        1e-8,
    )
    .unwrap();
    assert!((grad.abs() - 1.0).abs() < 0.05, "gradient {grad:.3} nT/nm");

    let seq = build_hahn_echo(mag.tau_us * 1e3 / 2.0).unwrap();
    let per_tesla = echo_phase(&seq, &ACField::new(1.0, field.frequency_hz, 0.0).unwrap()).unwrap();
    let currents = mag.currents_ma.expand().unwrap();
    let sigma = vec![(1.0 / mag.photons_per_point).sqrt(); currents.len()];

    let mut fitted_ut = Vec::new();
    let mut spectral_ut = Vec::new();
    for (k, nv) in field.nv.iter().enumerate() {
        let b_read = b_parallel(
            field.nv_position_m(k).unwrap(),
            &wire_read,
            &nv.orientation,
            field.projection,
        )
        .unwrap();
        let envelope = CoherenceModel::new(
            1.0,
            mag.background[k].t2_us * 1e-6,
            mag.background[k].exponent_p,
        )
        .unwrap();
        let noisy = simulate_coherence_experiment(
            &currents,
            |i_ma| {
                let amp = b_read.abs() * i_ma / mag.read_current_ma;
                let ac = ACField::new(amp, field.frequency_hz, 0.0)?;
                magnetometry_contrast(&seq, &ac, &envelope)
            },
            mag.photons_per_point,
            500 + k as u64,
        )
        .unwrap();
        let fit = fit_sinusoid_fixed_phase(&currents, &noisy, Some(&sigma)).unwrap();
        fitted_ut.push(fit.value("rate").unwrap() * mag.read_current_ma / per_tesla * 1e6);

        let spectrum = spectral_response(&currents, &noisy, 2048).unwrap();
        let (peak_rate, _) = dominant_peak(&spectrum).unwrap();
        spectral_ut.push(peak_rate * mag.read_current_ma / per_tesla * 1e6);
    }

    let delta_nt = (fitted_ut[0] - fitted_ut[1]).abs() * 1e3;
    assert!(
        (delta_nt - 105.0).abs() <= 30.0,
        "fitted field difference {delta_nt:.1} nT"
    );
    let spectral_delta_nt = (spectral_ut[0] - spectral_ut[1]).abs() * 1e3;
    assert!(
        spectral_delta_nt > 50.0,
        "spectral peaks not separated: {spectral_delta_nt:.1} nT"
    );
    for (f, s) in fitted_ut.iter().zip(&spectral_ut) {
        assert!(
            (f - s).abs() * 1e3 < 30.0,
            "spectral peak {s:.4} µT vs fit {f:.4} µT"
        );
    }

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "ran {elapsed:.1} s, budget 1 min");
    println!(
        "criterion 06: PASS (ΔB fit {delta_nt:.1} nT, spectral {spectral_delta_nt:.1} nT, {elapsed:.1} s)"
    );
}

#[test]
fn acceptance_07_wire_model() {
    let scenario = default_scenario();
    let field = scenario.field().unwrap();
    let clock = Instant::now();

    // Closed form against straight Biot-Savart segments.
    let pos = [22.5e-6, 0.0, 20e-6];
    let wire7 = field.wire(7.0).unwrap();
    let closed = b_magnitude(pos, &wire7).unwrap();
    let oracle = biot_savart_wire(pos, [0.0; 3], 7e-3, 10.0, 2000);
    let oracle_mag = (oracle[0].powi(2) + oracle[1].powi(2) + oracle[2].powi(2)).sqrt();
    let rel = (oracle_mag - closed).abs() / closed;
    assert!(rel < 1e-10, "oracle vs closed form off by {rel:.2e}");

    // Calibrated drive reproduces the measured Rabi rate.
    let rabi = rabi_frequency(
        field.nv_position_m(0).unwrap(),
        &field.wire(30.0).unwrap(),
        &field.nv[0].orientation,
        30e-3,
        field.drive_factor,
    )
    .unwrap();
    assert!(
        (rabi - 5.5e6).abs() / 5.5e6 < 0.05,
        "Rabi at 30 mA = {:.3} MHz",
        rabi / 1e6
    );

    // The nominal x = 22.5 µm, z = 20 µm geometry misses the 9 µT
    // checkpoint under either reading of the projection; the calibrated
    // evaluation point hits it exactly. This is the documented variant
    // plus its discrepancy record.
    let nv = &field.nv[0];
    let axis = b_parallel(pos, &wire7, &nv.orientation, ProjectionConvention::AxisDot).unwrap();
    let angles =
        b_parallel(pos, &wire7, &nv.orientation, ProjectionConvention::ComponentAngles).unwrap();
    assert!((axis * 1e6 - 5.159).abs() < 0.01, "axis form {:.3} µT", axis * 1e6);
    assert!(
        (angles * 1e6 - 34.759).abs() < 0.01,
        "angle form {:.3} µT",
        angles * 1e6
    );
    let checkpoint = b_parallel(
        field.nv_position_m(0).unwrap(),
        &wire7,
        &nv.orientation,
        field.projection,
    )
    .unwrap();
    assert!(
        (checkpoint * 1e6 - 9.0).abs() < 1e-4,
        "calibrated point gives {:.6} µT",
        checkpoint * 1e6
    );
    let grad = gradient_parallel(
        field.nv_position_m(0).unwrap(),
        &wire7,
        &nv.orientation,
        field.projection,
        1e-8,
    )
    .unwrap();
    assert!((grad + 1.0).abs() < 1e-4, "calibrated gradient {grad:.6} nT/nm");

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "ran {elapsed:.2} s, budget 1 s");
    println!(
        "criterion 07: PASS (oracle gap {rel:.1e}, Rabi {:.2} MHz, nominal geometry {:.2}/{:.2} µT vs 9 µT checkpoint at calibrated point, {elapsed:.2} s)",
        rabi / 1e6,
        axis * 1e6,
        angles * 1e6
    );
}

#[test]
fn acceptance_08_nmr() {
    let scenario = default_scenario();
    let section = scenario.nmr().unwrap();
    let clock = Instant::now();

    let nu = larmor_frequency(section.b0_gauss * 1e-4).unwrap();
    let bath = ProtonBath::new(section.rho_per_m3, section.depth_nm * 1e-9).unwrap();
    let b_rms = proton_brms(&bath).unwrap();
    let signal = NuclearSignal::new(nu, b_rms, section.t_c_us * 1e-6).unwrap();

    // Dip center on a dense 64-pulse trace, refined by a parabola through
    // the minimum, lands within a 1 kHz-equivalent of the Larmor line.
    let taus = linear_grid(406.0, 427.0, 1051);
    let trace: Vec<f64> = taus
        .iter()
        .map(|&t| nmr_contrast(t * 1e-9, 64, &signal, None).unwrap())
        .collect();
    let i_min = (1..taus.len() - 1)
        .min_by(|a, b| trace[*a].total_cmp(&trace[*b]))
        .unwrap();
    let (ya, yb, yc) = (trace[i_min - 1], trace[i_min], trace[i_min + 1]);
    let h = taus[1] - taus[0];
    let tau_min = taus[i_min] + 0.5 * h * (ya - yc) / (ya - 2.0 * yb + yc);
    let nu_hat = 0.5 / (tau_min * 1e-9);
    assert!(
        (nu_hat - nu).abs() < 1e3,
        "dip center at {nu_hat:.0} Hz vs Larmor {nu:.0} Hz"
    );

    // Narrowband kernel against the Ornstein-Uhlenbeck Monte Carlo across
    // the coherent-to-diffusive crossover.
    let tau = 416.43e-9;
    let n_pulses = 16;
    let total = n_pulses as f64 * tau;
    let mut worst_kernel = 0.0f64;
    for (i, ratio) in [0.01, 0.1, 1.0, 10.0].iter().enumerate() {
        let t_c = total / ratio;
        let k = filter_kernel(total, t_c).unwrap();
        let b = std::f64::consts::PI / GAMMA_E * (0.5 / (2.0 * k)).sqrt();
        let mc = ou_dephasing_contrast(b, 0.5 / tau, t_c, tau, n_pulses, 20_000, 80 + i as u64);
        let k_mc = -mc.ln() * std::f64::consts::PI.powi(2) / (2.0 * (GAMMA_E * b).powi(2));
        worst_kernel = worst_kernel.max((k_mc - k).abs() / k);
    }
    assert!(worst_kernel < 0.05, "kernel vs Monte Carlo off by {worst_kernel:.3}");

    // Depth recovery at the shipping noise level.
    let taus_ns = section.tau_ns.expand().unwrap();
    let taus_s: Vec<f64> = taus_ns.iter().map(|t| t * 1e-9).collect();
    let sigma = vec![(1.0 / section.photons_per_point).sqrt(); taus_ns.len()];
    let mut hits = 0;
    for seed in 0..200u64 {
        let noisy = simulate_coherence_experiment(
            &taus_ns,
            |t_ns| nmr_contrast(t_ns * 1e-9, section.n_pulses, &signal, None),
            section.photons_per_point,
            7000 + seed,
        )
        .unwrap();
        let (fit, _) = fit_nmr_dip(
            &taus_s,
            &noisy,
            Some(&sigma),
            section.n_pulses,
            nu,
            section.rho_per_m3,
        )
        .unwrap();
        if (fit.value("depth_nm").unwrap() - 3.0).abs() <= 0.3 {
            hits += 1;
        }
    }
    assert!(hits >= 120, "depth within ±0.3 nm in {hits}/200 replications");

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "ran {elapsed:.1} s, budget 5 min");
    println!(
        "criterion 08: PASS (dip offset {:.0} Hz, kernel gap {:.1}%, depth hits {hits}/200, {elapsed:.1} s)",
        nu_hat - nu,
        worst_kernel * 100.0
    );
}

#[test]
fn acceptance_09_drift() {
    let clock = Instant::now();

    let (stab, _) = load_scenario(&scenario_path("drift_stabilized.toml")).unwrap();
    let scan = stab
        .scan()
        .unwrap()
        .to_scan_config(stab.beams().unwrap(), &stab.cycle, stab.seed)
        .unwrap();
    let result = simulate_scan(&scan, &stab.drift, &stab.tracking, &stab.rates).unwrap();
    assert!(
        (result.elapsed_s - 7200.0).abs() < 72.0,
        "stabilized run covers {:.0} s",
        result.elapsed_s
    );
    let (_, scatter) = mean_std(&result.line_offsets_nm);
    assert!(
        (8.8..=13.2).contains(&scatter),
        "stabilized scatter {scatter:.2} nm vs 11 ± 20%"
    );

    let (open, _) = load_scenario(&scenario_path("drift_open_loop.toml")).unwrap();
    let scan = open
        .scan()
        .unwrap()
        .to_scan_config(open.beams().unwrap(), &open.cycle, open.seed)
        .unwrap();
    let result = simulate_scan(&scan, &open.drift, &open.tracking, &open.rates).unwrap();
    let corr = correlation(&result.line_offsets_nm, &result.temperature_k);
    assert!(corr > 0.9, "offset-temperature correlation {corr:.3}");
    let lo = result.line_offsets_nm.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = result
        .line_offsets_nm
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let excursion = hi - lo;
    assert!(
        (350.0..=650.0).contains(&excursion),
        "open-loop excursion {excursion:.0} nm"
    );

    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "ran {elapsed:.1} s, budget 30 s");
    println!(
        "criterion 09: PASS (scatter {scatter:.1} nm, correlation {corr:.3}, excursion {excursion:.0} nm, {elapsed:.1} s)"
    );
}

#[test]
fn acceptance_10_reproduce_determinism() {
    let figures = [
        "fig1d", "fig2c", "fig3b", "fig3c", "fig4c", "figS3", "figS4", "figS6", "figS7", "figS8",
    ];
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("determinism");
    let (a, b) = (root.join("a"), root.join("b"));
    for dir in [&a, &b] {
        if dir.exists() {
            std::fs::remove_dir_all(dir).unwrap();
        }
        for figure in figures {
            let status = Command::new(env!("CARGO_BIN_EXE_spinresolft"))
                .args(["reproduce", figure, "--out"])
                .arg(dir)
                .status()
                .unwrap();
            assert!(status.success(), "reproduce {figure} failed");
        }
    }
    let mut compared = 0;
    compare_trees(&a, &b, &mut compared);
    assert!(compared >= 20, "only {compared} files compared");
    println!("criterion 10: PASS ({compared} files byte-identical across reruns)");
}

fn compare_trees(a: &Path, b: &Path, compared: &mut usize) {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut other: Vec<_> = std::fs::read_dir(b)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    other.sort();
    assert_eq!(names, other, "directory listings differ under {}", a.display());
    for name in names {
        let (pa, pb) = (a.join(&name), b.join(&name));
        if pa.is_dir() {
            compare_trees(&pa, &pb, compared);
        } else {
            let (da, db) = (std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
            assert!(!da.is_empty(), "{} is empty", pa.display());
            assert_eq!(da, db, "{} differs between runs", pa.display());
            *compared += 1;
        }
    }
}
