use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use spinresolft::config::Scenario;
use spinresolft::fields::proton_brms;
use spinresolft::fitting::{
    fit_double_gaussian, fit_gaussian_center, fit_nmr_dip, fit_resolft_psf,
    fit_sinusoid_fixed_phase, fit_stretched_exponential, peak_separation, FitResult,
};
use spinresolft::io::{Dataset, Series};
use spinresolft::optics::DoughnutProfile;
use spinresolft::scanner::{linear_grid, resolft_psf};
use spinresolft::sequences::{larmor_frequency, nmr_contrast, NuclearSignal};
use spinresolft::Error;

use crate::emit::Emit;

pub const MODELS: [&str; 6] = [
    "gaussian",
    "double_gaussian",
    "psf",
    "stretched_exp",
    "sinusoid",
    "nmr_dip",
];

/// Fit `model` to the CSV at `input` and write the result table, a
/// one-row parameter CSV, and (under csv+svg) a data/model overlay.
pub fn run(model: &str, input: &Path, scenario: &Scenario, emit: &Emit) -> Result<()> {
    let text =
        fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let data = Dataset::from_csv(&text)?;

    let (x, y, sigma) = match model {
        "gaussian" | "double_gaussian" | "psf" => xy_columns(&data, "x_nm", "profile")?,
        "stretched_exp" => xy_columns(&data, "total_time_us", "contrast")?,
        "sinusoid" => xy_columns(&data, "current_ma", "contrast")?,
        "nmr_dip" => xy_columns(&data, "tau_ns", "contrast")?,
        other => bail!("unknown model '{other}'; models are {}", MODELS.join(", ")),
    };

    let mut notes = Vec::new();
    let (result, curve): (FitResult, Box<dyn Fn(f64) -> f64>) = match model {
        "gaussian" => {
            let r = fit_gaussian_center(x, y, sigma)?;
            let [a, c, w, b] = params(&r);
            (r, Box::new(move |xi| a * (-(xi - c).powi(2) / (2.0 * w * w)).exp() + b))
        }
        "double_gaussian" => {
            let r = fit_double_gaussian(x, y, sigma)?;
            let (sep, sep_sigma) = peak_separation(&r)?;
            notes.push(format!("separation = {sep:.4} ± {sep_sigma:.4}"));
            let [a1, c1, a2, c2, w, b] = params(&r);
            (
                r,
                Box::new(move |xi| {
                    a1 * (-(xi - c1).powi(2) / (2.0 * w * w)).exp()
                        + a2 * (-(xi - c2).powi(2) / (2.0 * w * w)).exp()
                        + b
                }),
            )
        }
        "psf" => {
            let beams = scenario.beams()?;
            let tau_s = scenario.cycle.doughnut_duration_s;
            let rates = scenario.rates.clone();
            let r = fit_resolft_psf(x, y, sigma, &beams.doughnut, tau_s, &rates)?;
            let [c, s0, eps, amp, off] = params(&r);
            let fitted = DoughnutProfile::new(s0, beams.doughnut.r0_nm, eps)?;
            (
                r,
                Box::new(move |xi| {
                    amp * resolft_psf(xi - c, &fitted, tau_s, &rates).unwrap_or(f64::NAN) + off
                }),
            )
        }
        "stretched_exp" => {
            let r = fit_stretched_exponential(x, y, sigma)?;
            let [a, t2, p] = params(&r);
            (r, Box::new(move |ti: f64| a * (-(ti / t2).powf(p)).exp()))
        }
        "sinusoid" => {
            let r = fit_sinusoid_fixed_phase(x, y, sigma)?;
            let [a, rate] = params(&r);
            (r, Box::new(move |xi| a * (rate * xi).cos()))
        }
        "nmr_dip" => {
            let section = scenario.nmr()?;
            let nu = larmor_frequency(section.b0_gauss * 1e-4)?;
            let tau_s: Vec<f64> = x.iter().map(|t| t * 1e-9).collect();
            let (r, b_rms) =
                fit_nmr_dip(&tau_s, y, sigma, section.n_pulses, nu, section.rho_per_m3)?;
            notes.push(format!("b_rms_ut = {:.6}", b_rms * 1e6));
            let [depth, t_c] = params(&r);
            let bath = spinresolft::fields::ProtonBath::new(section.rho_per_m3, depth * 1e-9)?;
            let signal = NuclearSignal::new(nu, proton_brms(&bath)?, t_c * 1e-6)?;
            let n_pulses = section.n_pulses;
            (
                r,
                Box::new(move |tau_ns: f64| {
                    nmr_contrast(tau_ns * 1e-9, n_pulses, &signal, None).unwrap_or(f64::NAN)
                }),
            )
        }
        _ => unreachable!(),
    };

    let mut report = String::new();
    writeln!(report, "model = {model}")?;
    writeln!(report, "input = {}", input.display())?;
    writeln!(report, "points = {}", x.len())?;
    writeln!(report, "chi2 = {:.6e}", result.chi2)?;
    writeln!(report, "dof = {}", result.dof)?;
    writeln!(report, "iterations = {}", result.iterations)?;
    for (name, (v, s)) in result
        .names
        .iter()
        .zip(result.values.iter().zip(&result.sigmas))
    {
        writeln!(report, "{name} = {v:.6} ± {s:.6}")?;
    }
    for note in &notes {
        writeln!(report, "{note}")?;
    }
    emit.write_text("fit_result.txt", &report)?;

    let mut table = emit.dataset();
    table.add_meta("model", model);
    table.add_meta("input", input.display());
    for (name, v) in result.names.iter().zip(&result.values) {
        table.push_column(name, vec![*v])?;
    }
    for (name, s) in result.names.iter().zip(&result.sigmas) {
        table.push_column(&format!("sigma_{name}"), vec![*s])?;
    }
    table.push_column("chi2", vec![result.chi2])?;
    table.push_column("dof", vec![result.dof as f64])?;
    table.push_column("iterations", vec![result.iterations as f64])?;
    emit.write_csv("fit_result", &table)?;

    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dense = linear_grid(lo, hi, 400);
    let fitted: Vec<f64> = dense.iter().map(|&xi| curve(xi)).collect();
    emit.write_plot(
        "fit_overlay",
        &format!("{model} fit"),
        "x",
        "y",
        &[
            Series { label: "data", x, y },
            Series {
                label: "fit",
                x: &dense,
                y: &fitted,
            },
        ],
    )?;
    Ok(())
}

fn params<const N: usize>(result: &FitResult) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&result.values);
    out
}

/// Column resolution: a dataset carrying either named column is held to
/// the full named schema; otherwise the first two (plus an optional
/// third, the per-point sigma) are used positionally.
fn xy_columns<'a>(
    data: &'a Dataset,
    x_name: &str,
    y_name: &str,
) -> Result<(&'a [f64], &'a [f64], Option<&'a [f64]>)> {
    let has = |name: &str| data.columns.iter().any(|c| c.name == name);
    if has(x_name) || has(y_name) {
        let x = data.column(x_name)?;
        let y = data.column(y_name)?;
        let sigma = if has("sigma") {
            Some(data.column("sigma")?)
        } else {
            None
        };
        return Ok((x, y, sigma));
    }
    match data.columns.len() {
        0 | 1 => Err(Error::Schema(format!(
            "need columns ({x_name}, {y_name}) or a generic two/three-column table"
        ))
        .into()),
        2 => Ok((&data.columns[0].values, &data.columns[1].values, None)),
        _ => Ok((
            &data.columns[0].values,
            &data.columns[1].values,
            Some(&data.columns[2].values),
        )),
    }
}
