use anyhow::{Context, Result};
use spinresolft::config::Scenario;
use spinresolft::fields::{
    b_magnitude, b_parallel, gradient_parallel, proton_brms, rabi_frequency, NVOrientation,
    ProjectionConvention,
};
use spinresolft::io::{Dataset, Series};
use spinresolft::optics::DoughnutProfile;
use spinresolft::photophysics::{polarization, PopulationState};
use spinresolft::scanner::{resolft_psf, simulate_coherence_experiment, simulate_scan, ScanResult};
use spinresolft::sequences::{
    build_hahn_echo, larmor_frequency, magnetometry_contrast, ACField, CoherenceModel,
    NuclearSignal,
};

use crate::emit::{column_series, Emit};
use crate::SimKind;

pub fn run(kind: SimKind, scenario: &Scenario, emit: &Emit) -> Result<()> {
    match kind {
        SimKind::Psf => {
            psf_profiles(scenario, emit)?;
            psf_epsilon_compare(scenario, emit)?;
            Ok(())
        }
        SimKind::Scan2d => scan2d(scenario, emit).map(|_| ()),
        SimKind::Coherence => coherence(scenario, emit).map(|_| ()),
        SimKind::Magnetometry => magnetometry(scenario, emit).map(|_| ()),
        SimKind::Nmr => nmr(scenario, emit).map(|_| ()),
        SimKind::Repolarization => repolarization(scenario, emit).map(|_| ()),
        SimKind::Wirefield => wirefield(scenario, emit).map(|_| ()),
    }
}

/// A budget of 0 means a noiseless run; the experiment helper encodes that
/// as an infinite photon count.
fn photon_budget(photons_per_point: f64) -> f64 {
    if photons_per_point > 0.0 {
        photons_per_point
    } else {
        f64::INFINITY
    }
}

/// Uniform per-point contrast noise at a two-channel budget of B photons.
fn contrast_sigma(photons_per_point: f64) -> Option<f64> {
    (photons_per_point > 0.0).then(|| (1.0 / photons_per_point).sqrt())
}

/// Depletion profiles vs radial offset, one column per pulse duration.
pub fn psf_profiles(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let section = scenario.psf()?;
    let beams = scenario.beams()?;
    let r = section.r_nm.expand()?;

    let mut data = emit.dataset();
    data.push_column("r_nm", r.clone())?;
    for &tau_us in &section.tau_d_us {
        let y = r
            .iter()
            .map(|&ri| resolft_psf(ri, &beams.doughnut, tau_us * 1e-6, &scenario.rates))
            .collect::<spinresolft::Result<Vec<f64>>>()?;
        data.push_column(&format!("response_{tau_us}us"), y)?;
    }
    emit.write_csv("psf_profiles", &data)?;
    emit.write_plot(
        "psf_profiles",
        "depletion profile vs pulse duration",
        "r (nm)",
        "differential response",
        &column_series(&data, "r_nm")?,
    )?;
    Ok(data)
}

/// The same profile at the two configured doughnut-zero leak levels, raw
/// and peak-normalized: the shape is leak-invariant until the residual
/// center intensity starts repolarizing the minimum.
pub fn psf_epsilon_compare(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let section = scenario.psf()?;
    let beams = scenario.beams()?;
    let r = section.r_nm.expand()?;
    let tau_s = scenario.cycle.doughnut_duration_s;

    let mut data = emit.dataset();
    data.push_column("r_nm", r.clone())?;
    for &eps in &section.epsilon_compare {
        let doughnut = DoughnutProfile::new(beams.doughnut.s0, beams.doughnut.r0_nm, eps)?;
        let y = r
            .iter()
            .map(|&ri| resolft_psf(ri, &doughnut, tau_s, &scenario.rates))
            .collect::<spinresolft::Result<Vec<f64>>>()?;
        let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        data.push_column(&format!("response_eps_{eps}"), y.clone())?;
        data.push_column(
            &format!("normalized_eps_{eps}"),
            y.iter().map(|v| v / peak).collect(),
        )?;
    }
    emit.write_csv("psf_epsilon_compare", &data)?;

    let normalized: Vec<Series> = data
        .columns
        .iter()
        .filter(|c| c.name.starts_with("normalized"))
        .map(|c| Series {
            label: &c.name,
            x: &data.columns[0].values,
            y: &c.values,
        })
        .collect();
    emit.write_plot(
        "psf_epsilon_compare",
        "peak-normalized profile vs doughnut leak",
        "r (nm)",
        "normalized response",
        &normalized,
    )?;
    Ok(data)
}

/// Full raster with drift and tracking: per-pixel counts plus a per-line
/// drift table.
pub fn scan2d(scenario: &Scenario, emit: &Emit) -> Result<ScanResult> {
    let section = scenario.scan()?;
    let beams = scenario.beams()?;
    let config = section.to_scan_config(beams, &scenario.cycle, emit.seed())?;
    let scan = simulate_scan(&config, &scenario.drift, &scenario.tracking, &scenario.rates)?;

    let nx = scan.x_nm.len();
    let ny = scan.y_nm.len();
    let mut data = emit.dataset();
    data.add_meta("elapsed_s", scan.elapsed_s);
    let mut xs = Vec::with_capacity(nx * ny);
    let mut ys = Vec::with_capacity(nx * ny);
    for &y in &scan.y_nm {
        for &x in &scan.x_nm {
            xs.push(x);
            ys.push(y);
        }
    }
    data.push_column("x_nm", xs)?;
    data.push_column("y_nm", ys)?;
    data.push_column(
        "signal_counts",
        scan.sig_counts.iter().map(|&c| c as f64).collect(),
    )?;
    data.push_column(
        "reference_counts",
        scan.ref0_counts.iter().map(|&c| c as f64).collect(),
    )?;
    data.push_column("profile", scan.profile.clone())?;
    emit.write_csv("scan2d", &data)?;

    let mut lines = emit.dataset();
    let line_time = scan.elapsed_s / ny as f64;
    lines.push_column(
        "time_s",
        (0..ny).map(|i| i as f64 * line_time).collect(),
    )?;
    lines.push_column("y_nm", scan.y_nm.clone())?;
    lines.push_column("offset_nm", scan.line_offsets_nm.clone())?;
    lines.push_column("temperature_k", scan.temperature_k.clone())?;
    emit.write_csv("scan_lines", &lines)?;

    emit.write_plot(
        "scan2d",
        "first-line differential profile",
        "x (nm)",
        "counts",
        &[Series {
            label: "profile",
            x: &scan.x_nm,
            y: &scan.profile[..nx],
        }],
    )?;
    Ok(scan)
}

/// Echo decay of each configured sensor plus, when there are several, the
/// weight-mixed curve a confocal spot over all of them would show.
pub fn coherence(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let section = scenario.coherence()?;
    let ts = section.total_time_us.expand()?;
    let budget = photon_budget(section.photons_per_point);

    let models = section
        .nv
        .iter()
        .map(|nv| CoherenceModel::new(nv.amplitude, nv.t2_us * 1e-6, nv.exponent_p))
        .collect::<spinresolft::Result<Vec<_>>>()?;

    let mut data = emit.dataset();
    data.push_column("total_time_us", ts.clone())?;
    for (k, model) in models.iter().enumerate() {
        let y = simulate_coherence_experiment(
            &ts,
            |t_us| Ok(model.envelope(t_us * 1e-6)),
            budget,
            emit.seed().wrapping_add(k as u64),
        )?;
        let name = if models.len() == 1 {
            "contrast".to_string()
        } else {
            format!("contrast_nv{}", k + 1)
        };
        data.push_column(&name, y)?;
    }
    if models.len() > 1 {
        let weight_sum: f64 = section.nv.iter().map(|nv| nv.weight).sum();
        let mixed = |t_us: f64| {
            Ok(models
                .iter()
                .zip(&section.nv)
                .map(|(m, nv)| nv.weight * m.envelope(t_us * 1e-6))
                .sum::<f64>()
                / weight_sum)
        };
        let y = simulate_coherence_experiment(
            &ts,
            mixed,
            budget,
            emit.seed().wrapping_add(models.len() as u64),
        )?;
        data.push_column("contrast_ensemble", y)?;
    }
    if let Some(sigma) = contrast_sigma(section.photons_per_point) {
        data.push_column("sigma", vec![sigma; ts.len()])?;
    }
    emit.write_csv("coherence", &data)?;
    emit.write_plot(
        "coherence",
        "echo decay",
        "total evolution time (us)",
        "contrast",
        &column_series(&data, "total_time_us")?,
    )?;
    Ok(data)
}

/// Echo contrast vs drive current for each sensor in the wire's field.
/// The phase is linear in current, so each trace is a fixed-phase cosine
/// whose rate encodes the field at the read current.
pub fn magnetometry(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let mag = scenario.magnetometry()?;
    let field = scenario.field()?;
    let seq = build_hahn_echo(mag.tau_us * 1e3 / 2.0)?;
    let currents = mag.currents_ma.expand()?;
    let budget = photon_budget(mag.photons_per_point);
    let wire = field.wire(mag.read_current_ma)?;

    let mut data = emit.dataset();
    data.push_column("current_ma", currents.clone())?;
    let mut clean = Vec::new();
    for (k, nv) in field.nv.iter().enumerate() {
        let pos = field.nv_position_m(k)?;
        let b_read = b_parallel(pos, &wire, &nv.orientation, field.projection)?;
        data.add_meta(&format!("b_read_nv{}_ut", k + 1), b_read * 1e6);
        let envelope = match mag.background.get(k) {
            Some(bg) => CoherenceModel::new(bg.amplitude, bg.t2_us * 1e-6, bg.exponent_p)?,
            None => CoherenceModel::new(1.0, 1e3, 1.0)?,
        };
        let model = |i_ma: f64| {
            let drive = ACField::new(
                b_read * i_ma / mag.read_current_ma,
                field.frequency_hz,
                0.0,
            )?;
            magnetometry_contrast(&seq, &drive, &envelope)
        };
        let exact = currents
            .iter()
            .map(|&i| model(i))
            .collect::<spinresolft::Result<Vec<f64>>>()?;
        let y = simulate_coherence_experiment(
            &currents,
            model,
            budget,
            emit.seed().wrapping_add(k as u64),
        )?;
        let name = if field.nv.len() == 1 {
            "contrast".to_string()
        } else {
            format!("contrast_nv{}", k + 1)
        };
        data.push_column(&name, y)?;
        clean.push(exact);
    }
    if field.nv.len() > 1 {
        let mixed = |i_ma: f64| {
            let idx = currents
                .iter()
                .position(|&c| c == i_ma)
                .expect("ensemble model evaluated off the sweep grid");
            Ok(clean.iter().map(|c| c[idx]).sum::<f64>() / clean.len() as f64)
        };
        let y = simulate_coherence_experiment(
            &currents,
            mixed,
            budget,
            emit.seed().wrapping_add(field.nv.len() as u64),
        )?;
        data.push_column("contrast_ensemble", y)?;
    }
    if let Some(sigma) = contrast_sigma(mag.photons_per_point) {
        data.push_column("sigma", vec![sigma; currents.len()])?;
    }
    emit.write_csv("magnetometry_sweep", &data)?;
    emit.write_plot(
        "magnetometry_sweep",
        "echo contrast vs drive current",
        "current (mA)",
        "contrast",
        &column_series(&data, "current_ma")?,
    )?;
    Ok(data)
}

/// Decoupled contrast vs pulse spacing across the bath's precession
/// frequency.
pub fn nmr(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let section = scenario.nmr()?;
    let taus = section.tau_ns.expand()?;
    let bath = section.bath()?;
    let b_rms = proton_brms(&bath)?;
    let nu = larmor_frequency(section.b0_gauss * 1e-4)?;
    let signal = NuclearSignal::new(nu, b_rms, section.t_c_us * 1e-6)?;

    let y = simulate_coherence_experiment(
        &taus,
        |tau_ns| spinresolft::sequences::nmr_contrast(tau_ns * 1e-9, section.n_pulses, &signal, None),
        photon_budget(section.photons_per_point),
        emit.seed(),
    )?;

    let mut data = emit.dataset();
    data.add_meta("nu_center_hz", nu);
    data.add_meta("b_rms_ut", b_rms * 1e6);
    data.add_meta("n_pulses", section.n_pulses);
    data.push_column("tau_ns", taus.clone())?;
    data.push_column("contrast", y)?;
    if let Some(sigma) = contrast_sigma(section.photons_per_point) {
        data.push_column("sigma", vec![sigma; taus.len()])?;
    }
    emit.write_csv("nmr_dip", &data)?;
    emit.write_plot(
        "nmr_dip",
        "decoupled contrast vs pulse spacing",
        "tau (ns)",
        "contrast",
        &column_series(&data, "tau_ns")?,
    )?;
    Ok(data)
}

/// Recovered m_s = 0 population after pumping an inverted spin, over a
/// pump-strength x duration grid. One column per pump strength.
pub fn repolarization(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let section = scenario.repolarization()?;
    let pumps = section.s.expand()?;
    let durations = section.duration_us.expand()?;
    let start = PopulationState::inverted();

    let mut data = emit.dataset();
    data.push_column("duration_us", durations.clone())?;
    for &s in &pumps {
        let y = durations
            .iter()
            .map(|&t_us| polarization(&start, s, t_us * 1e-6, &scenario.rates))
            .collect::<spinresolft::Result<Vec<f64>>>()?;
        data.push_column(&format!("polarization_s_{s:.6}"), y)?;
    }
    emit.write_csv("repolarization", &data)?;
    emit.write_plot(
        "repolarization",
        "repolarization vs pump duration",
        "pump duration (us)",
        "ground m_s=0 population",
        &column_series(&data, "duration_us")?,
    )?;
    Ok(data)
}

/// Field, gradient, and Rabi profile along x at the section's sweep
/// height and current. Both projection conventions are tabulated.
pub fn wirefield(scenario: &Scenario, emit: &Emit) -> Result<Dataset> {
    let field = scenario.field()?;
    let sweep = field
        .sweep_x_um
        .as_ref()
        .context("field section has no sweep_x_um grid")?;
    let z_um = field
        .sweep_z_um
        .context("field section has no sweep_z_um height")?;
    let xs_um = sweep.expand()?;
    let wire = field.wire(field.sweep_current_ma)?;
    let orientation = field
        .nv
        .first()
        .map(|nv| nv.orientation)
        .unwrap_or_else(NVOrientation::standard);
    let current_a = field.sweep_current_ma * 1e-3;

    let n = xs_um.len();
    let mut x_nm = Vec::with_capacity(n);
    let mut b_axis = Vec::with_capacity(n);
    let mut b_angles = Vec::with_capacity(n);
    let mut b_mag = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut rabi = Vec::with_capacity(n);
    for &x_um in &xs_um {
        let pos = [x_um * 1e-6, 0.0, z_um * 1e-6];
        x_nm.push(x_um * 1e3);
        b_axis.push(
            b_parallel(pos, &wire, &orientation, ProjectionConvention::AxisDot)? * 1e6,
        );
        b_angles.push(
            b_parallel(pos, &wire, &orientation, ProjectionConvention::ComponentAngles)? * 1e6,
        );
        b_mag.push(b_magnitude(pos, &wire)? * 1e6);
        // T/m and nT/nm are the same unit.
        grad.push(gradient_parallel(pos, &wire, &orientation, field.projection, 1e-8)?);
        rabi.push(rabi_frequency(pos, &wire, &orientation, current_a, field.drive_factor)? / 1e6);
    }

    let mut data = emit.dataset();
    data.add_meta("current_ma", field.sweep_current_ma);
    data.add_meta("z_um", z_um);
    data.push_column("x_nm", x_nm)?;
    data.push_column("b_axis_ut", b_axis)?;
    data.push_column("b_angles_ut", b_angles)?;
    data.push_column("b_mag_ut", b_mag)?;
    data.push_column("gradient_nt_per_nm", grad)?;
    data.push_column("rabi_mhz", rabi)?;
    emit.write_csv("wirefield", &data)?;
    emit.write_plot(
        "wirefield",
        "projected field along x",
        "x (nm)",
        "field (uT)",
        &[
            Series {
                label: "b_axis_ut",
                x: data.column("x_nm")?,
                y: data.column("b_axis_ut")?,
            },
            Series {
                label: "b_mag_ut",
                x: data.column("x_nm")?,
                y: data.column("b_mag_ut")?,
            },
        ],
    )?;
    Ok(data)
}
