//! Damped least-squares fitting for every model the toolkit extracts
//! parameters from, plus the periodogram used for per-emitter field
//! calibration.
//!
//! The engine is a plain Levenberg-Marquardt loop with numeric Jacobians,
//! box bounds by projection, and covariance from the Gauss-Newton normal
//! matrix scaled by residual variance. Each `fit_*` wrapper supplies a
//! deterministic initializer so batch runs need no hand tuning.

use nalgebra::DMatrix;

use crate::fields::{proton_brms, ProtonBath};
use crate::optics::DoughnutProfile;
use crate::photophysics::RateConstants;
use crate::scanner::resolft_psf;
use crate::sequences::{nmr_contrast, NuclearSignal};
use crate::{Error, Result};

/// Parameter layout and optimizer inputs for [`fit`].
#[derive(Debug, Clone)]
pub struct FitSpec {
    pub names: Vec<&'static str>,
    pub initial: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Absolute finite-difference steps, one per parameter.
    pub fd_steps: Vec<f64>,
}

impl FitSpec {
    fn validate(&self) -> Result<()> {
        let m = self.names.len();
        if self.initial.len() != m
            || self.lower.len() != m
            || self.upper.len() != m
            || self.fd_steps.len() != m
        {
            return Err(Error::invalid("fit spec arrays differ in length"));
        }
        for j in 0..m {
            if !(self.lower[j] <= self.upper[j]) {
                return Err(Error::invalid(format!(
                    "bounds for {} are inverted",
                    self.names[j]
                )));
            }
            if !self.fd_steps[j].is_finite() || self.fd_steps[j] <= 0.0 {
                return Err(Error::invalid(format!(
                    "finite-difference step for {}",
                    self.names[j]
                )));
            }
        }
        Ok(())
    }
}

/// Converged fit: values, curvature-based 1σ uncertainties, and diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<&'static str>,
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Weighted sum of squared residuals at the minimum.
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub final_damping: f64,
    /// Row-major covariance of the parameters.
    pub covariance: Vec<Vec<f64>>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.sigmas[i])
    }
}

fn clamp_into(p: &mut [f64], spec: &FitSpec) {
    for j in 0..p.len() {
        p[j] = p[j].clamp(spec.lower[j], spec.upper[j]);
    }
}

/// Weighted Levenberg-Marquardt minimization of
/// `Σ ((y_i − model(p, x_i))/σ_i)²` inside the spec's box bounds.
///
/// Uncertainties come from `(JᵀWJ)⁻¹ · χ²/dof`. Exact data converges in
/// zero iterations; a singular normal matrix is a degenerate-fit error and
/// running out of iterations reports the last cost instead of a result.
pub fn fit(
    model: impl Fn(&[f64], f64) -> f64,
    spec: &FitSpec,
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
) -> Result<FitResult> {
    spec.validate()?;
    let n = x.len();
    let m = spec.names.len();
    if n != y.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    if n < m {
        return Err(Error::invalid(format!(
            "{n} points cannot constrain {m} parameters"
        )));
    }
    if let Some(s) = sigma {
        if s.len() != n || s.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("per-point uncertainties must be positive"));
        }
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("data must be finite"));
    }
    let weight = |i: usize| sigma.map_or(1.0, |s| 1.0 / s[i]);

    let cost = |p: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let r = (y[i] - model(p, x[i])) * weight(i);
                r * r
            })
            .sum()
    };

    // Residuals and Jacobian at a point. Steps shrink at the box edge so
    // the model is never evaluated outside its domain.
    let jac_res = |p: &[f64]| -> (DMatrix<f64>, DMatrix<f64>) {
        let mut jac = DMatrix::zeros(n, m);
        let mut resid = DMatrix::zeros(n, 1);
        for i in 0..n {
            resid[(i, 0)] = (y[i] - model(p, x[i])) * weight(i);
        }
        for j in 0..m {
            let hp = spec.fd_steps[j].min(spec.upper[j] - p[j]);
            let hm = spec.fd_steps[j].min(p[j] - spec.lower[j]);
            if hp + hm == 0.0 {
                continue;
            }
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[j] += hp;
            pm[j] -= hm;
            for i in 0..n {
                let d = (model(&pp, x[i]) - model(&pm, x[i])) / (hp + hm);
                jac[(i, j)] = d * weight(i);
            }
        }
        (jac, resid)
    };

    let mut p = spec.initial.clone();
    clamp_into(&mut p, spec);
    let mut chi2 = cost(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut flat_steps = 0;
    let max_iterations = 500;

    loop {
        let (jac, resid) = jac_res(&p);
        let normal = jac.transpose() * &jac;
        let gradient = jac.transpose() * &resid;

        let grad_scale = gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if chi2 <= 1e-28 || grad_scale < 1e-12 * (1.0 + chi2) {
            return finish(spec, p, chi2, n, m, iterations, lambda, &normal);
        }
        if iterations >= max_iterations {
            return Err(Error::FitDidNotConverge {
                iterations,
                last_cost: chi2,
            });
        }
        iterations += 1;

        // Inner damping loop: retry uphill steps with stronger damping.
        let scale = (0..m).map(|j| normal[(j, j)]).fold(0.0_f64, f64::max);
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::DegenerateFit(
                "normal matrix is singular; no parameter has any effect on the model".into(),
            ));
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = normal.clone();
            for j in 0..m {
                // A parameter pinned at a bound can lose its Jacobian column
                // mid-iteration (an amplitude at zero hides its center). A
                // tiny pivot freezes that parameter for the step rather than
                // failing the solve; finish() still reports degeneracy if the
                // column is gone at the minimum.
                damped[(j, j)] = if normal[(j, j)] == 0.0 {
                    1e-12 * scale * lambda.max(1.0)
                } else {
                    normal[(j, j)] * (1.0 + lambda)
                };
            }
            let Some(delta) = damped.lu().solve(&gradient) else {
                return Err(Error::DegenerateFit(
                    "normal matrix is singular; a parameter has no effect on the model"
                        .into(),
                ));
            };
            let mut trial: Vec<f64> = (0..m).map(|j| p[j] + delta[(j, 0)]).collect();
            clamp_into(&mut trial, spec);
            let trial_chi2 = cost(&trial);
            if trial_chi2 <= chi2 {
                let gain = chi2 - trial_chi2;
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if gain <= 1e-9 * (chi2 + 1e-30) {
                    flat_steps += 1;
                } else {
                    flat_steps = 0;
                }
                if gain <= 1e-12 * (chi2 + 1e-30) || flat_steps >= 3 {
                    // Converged: flat to machine precision, or several
                    // consecutive steps gained under 1e-9 relative (a shallow
                    // valley being walked to no effect). Polish with one
                    // undamped Gauss-Newton step so linear problems land
                    // exactly on the normal-equations solution, then stop.
                    let (jac, resid) = jac_res(&p);
                    let normal = jac.transpose() * &jac;
                    let gradient = jac.transpose() * &resid;
                    if let Some(delta) = normal.clone().lu().solve(&gradient) {
                        let mut trial: Vec<f64> =
                            (0..m).map(|j| p[j] + delta[(j, 0)]).collect();
                        clamp_into(&mut trial, spec);
                        let trial_chi2 = cost(&trial);
                        if trial_chi2 <= chi2 {
                            p = trial;
                            chi2 = trial_chi2;
                            let (jac, _) = jac_res(&p);
                            let polished = jac.transpose() * &jac;
                            return finish(spec, p, chi2, n, m, iterations, lambda, &polished);
                        }
                    }
                    return finish(spec, p, chi2, n, m, iterations, lambda, &normal);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                // Cannot descend: treat as converged only if the gradient
                // is already negligible, otherwise report failure.
                return Err(Error::FitDidNotConverge {
                    iterations,
                    last_cost: chi2,
                });
            }
        }
        if !accepted {
            return Err(Error::FitDidNotConverge {
                iterations,
                last_cost: chi2,
            });
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &FitSpec,
    values: Vec<f64>,
    chi2: f64,
    n: usize,
    m: usize,
    iterations: usize,
    lambda: f64,
    normal: &DMatrix<f64>,
) -> Result<FitResult> {
    let dof = n.saturating_sub(m);
    let scale = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let inverse = normal.clone().try_inverse().ok_or_else(|| {
        Error::DegenerateFit("normal matrix is singular at the minimum".into())
    })?;
    let mut covariance = vec![vec![0.0; m]; m];
    let mut sigmas = vec![0.0; m];
    for j in 0..m {
        for k in 0..m {
            covariance[j][k] = inverse[(j, k)] * scale;
        }
        if covariance[j][j] < -1e-12 {
            return Err(Error::DegenerateFit(format!(
                "negative curvature for parameter {}",
                spec.names[j]
            )));
        }
        sigmas[j] = covariance[j][j].max(0.0).sqrt();
    }
    Ok(FitResult {
        names: spec.names.clone(),
        values,
        sigmas,
        chi2,
        dof,
        iterations,
        final_damping: lambda,
        covariance,
    })
}

fn span(xs: &[f64]) -> (f64, f64, f64) {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi, hi - lo)
}

const UNBOUNDED: f64 = 1e300;

/// Gaussian peak `a·exp(-(x-c)²/(2w²)) + b`; parameters
/// `[amplitude, center, width, offset]` in the units of the data.
/// Initialized from the baseline-subtracted centroid and RMS width.
pub fn fit_gaussian_center(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitResult> {
    if x.len() < 5 {
        return Err(Error::invalid("need at least 5 points for a peak fit"));
    }
    let (lo, hi, range) = span(x);
    if range <= 0.0 {
        return Err(Error::invalid("independent variable does not vary"));
    }
    let base = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    let mut first = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        mass += yi - base;
        first += (yi - base) * xi;
    }
    let c0 = if mass > 0.0 { first / mass } else { 0.5 * (lo + hi) };
    let mut second = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        second += (yi - base) * (xi - c0) * (xi - c0);
    }
    let w0 = if mass > 0.0 && second > 0.0 {
        (second / mass).sqrt().max(range / 50.0)
    } else {
        range / 6.0
    };
    let spec = FitSpec {
        names: vec!["amplitude", "center", "width", "offset"],
        initial: vec![top - base, c0, w0, base],
        lower: vec![0.0, lo - range, range * 1e-4, -UNBOUNDED],
        upper: vec![UNBOUNDED, hi + range, range * 10.0, UNBOUNDED],
        fd_steps: vec![
            (top - base).abs().max(1e-9) * 1e-6,
            range * 1e-7,
            w0 * 1e-6,
            (top - base).abs().max(1e-9) * 1e-6,
        ],
    };
    fit(
        |p, xi| p[0] * (-(xi - p[1]) * (xi - p[1]) / (2.0 * p[2] * p[2])).exp() + p[3],
        &spec,
        x,
        y,
        sigma,
    )
}

/// Mean over a centered window that shrinks at the edges; the peak-picking
/// view of noisy data, never what gets fitted.
fn moving_mean(y: &[f64], half: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Two Gaussian peaks of shared width on a common offset:
/// `[amplitude_1, center_1, amplitude_2, center_2, width, offset]`.
/// Initialized from the two highest well-separated samples of a lightly
/// smoothed copy, so a single noisy pixel cannot seed a spurious peak.
pub fn fit_double_gaussian(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitResult> {
    if x.len() < 8 {
        return Err(Error::invalid("need at least 8 points for a two-peak fit"));
    }
    let (lo, hi, range) = span(x);
    if range <= 0.0 {
        return Err(Error::invalid("independent variable does not vary"));
    }
    let smooth = moving_mean(y, (y.len() / 32).max(1));
    let base = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let i1 = (0..smooth.len())
        .max_by(|a, b| smooth[*a].total_cmp(&smooth[*b]))
        .unwrap();
    // Second peak: highest sample at least an eighth of the span away.
    let i2 = (0..smooth.len())
        .filter(|i| (x[*i] - x[i1]).abs() > range / 8.0)
        .max_by(|a, b| smooth[*a].total_cmp(&smooth[*b]))
        .unwrap_or(if i1 == 0 { smooth.len() - 1 } else { 0 });
    let w0 = range / 10.0;
    let attempt = |initial: Vec<f64>| {
        let a_scale = initial[0].abs().max(1e-9) * 1e-6;
        let spec = FitSpec {
            names: vec!["amplitude_1", "center_1", "amplitude_2", "center_2", "width", "offset"],
            initial,
            lower: vec![0.0, lo - range, 0.0, lo - range, range * 1e-4, -UNBOUNDED],
            upper: vec![UNBOUNDED, hi + range, UNBOUNDED, hi + range, range, UNBOUNDED],
            fd_steps: vec![a_scale, range * 1e-7, a_scale, range * 1e-7, w0 * 1e-6, a_scale],
        };
        fit(
            |p, xi| {
                let g1 = p[0] * (-(xi - p[1]) * (xi - p[1]) / (2.0 * p[4] * p[4])).exp();
                let g2 = p[2] * (-(xi - p[3]) * (xi - p[3]) / (2.0 * p[4] * p[4])).exp();
                g1 + g2 + p[5]
            },
            &spec,
            x,
            y,
            sigma,
        )
    };
    let a1 = smooth[i1] - base;
    let seeded = attempt(vec![a1, x[i1], smooth[i2] - base, x[i2], w0, base]);
    // A seed on a noise spike can die at the zero-amplitude bound and strand
    // the fit in a one-peak minimum. If the seeded start failed or collapsed
    // (one amplitude dead, or centers merged within half a width), rescue by
    // splitting a single-Gaussian fit of the blend: the pair starts
    // symmetrically inside its lobe with a narrower shared width, so each
    // start owns one side. Keep the lower chi-squared.
    let collapsed = |r: &FitResult| {
        r.values[0].min(r.values[2]) < 0.02 * r.values[0].max(r.values[2])
            || (r.values[3] - r.values[1]).abs() < 0.5 * r.values[4]
    };
    match seeded {
        Ok(r) if !collapsed(&r) => Ok(r),
        seeded => {
            let split = fit_gaussian(x, y, sigma).and_then(|g| {
                let gw = g.values[2].abs().min(range / 2.0);
                attempt(vec![
                    0.7 * g.values[0],
                    g.values[1] - 0.8 * gw,
                    0.7 * g.values[0],
                    g.values[1] + 0.8 * gw,
                    (0.55 * gw).max(range * 1e-3),
                    g.values[3],
                ])
            });
            match (seeded, split) {
                (Ok(a), Ok(b)) => Ok(if b.chi2 < a.chi2 { b } else { a }),
                (Ok(a), Err(_)) => Ok(a),
                (Err(_), Ok(b)) => Ok(b),
                (Err(e), Err(_)) => Err(e),
            }
        }
    }
}

/// |center_2 − center_1| and its 1σ from a [`fit_double_gaussian`] result,
/// with the center-center covariance folded in.
pub fn peak_separation(result: &FitResult) -> Result<(f64, f64)> {
    let c1 = result
        .names
        .iter()
        .position(|n| *n == "center_1")
        .ok_or_else(|| Error::invalid("result has no center_1"))?;
    let c2 = result
        .names
        .iter()
        .position(|n| *n == "center_2")
        .ok_or_else(|| Error::invalid("result has no center_2"))?;
    let sep = (result.values[c2] - result.values[c1]).abs();
    let var = result.covariance[c1][c1] + result.covariance[c2][c2]
        - 2.0 * result.covariance[c1][c2];
    Ok((sep, var.max(0.0).sqrt()))
}

/// Stretched exponential `A·exp(-(t/T2)^p)`; parameters
/// `[amplitude, t2, p]` with t2 in the units of the time axis and
/// p bounded to (0.5, 6]. Initialized from a log-log slope regression.
pub fn fit_stretched_exponential(
    t: &[f64],
    c: &[f64],
    sigma: Option<&[f64]>,
) -> Result<FitResult> {
    if t.len() < 4 {
        return Err(Error::invalid("need at least 4 points for an envelope fit"));
    }
    if t.iter().any(|v| *v < 0.0) {
        return Err(Error::invalid("time axis must be non-negative"));
    }
    let a0 = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(1e-6);
    // ln(-ln(c/A)) is linear in ln t with slope p; use the well-conditioned
    // middle of the decay for the initial slope.
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for (ti, ci) in t.iter().zip(c) {
        let frac = ci / a0;
        if *ti > 0.0 && frac > 0.02 && frac < 0.9 {
            us.push(ti.ln());
            vs.push((-frac.ln()).ln());
        }
    }
    let (mut p0, mut t2_0) = (2.0, t[t.len() / 2].max(t[1]));
    if us.len() >= 2 {
        let n = us.len() as f64;
        let mu = us.iter().sum::<f64>() / n;
        let mv = vs.iter().sum::<f64>() / n;
        let sxx: f64 = us.iter().map(|u| (u - mu) * (u - mu)).sum();
        let sxy: f64 = us.iter().zip(&vs).map(|(u, v)| (u - mu) * (v - mv)).sum();
        if sxx > 0.0 {
            p0 = (sxy / sxx).clamp(0.6, 5.9);
            // v = p(u - ln T2) at the mean point.
            t2_0 = (mu - mv / p0).exp();
        }
    }
    let t_max = t.iter().cloned().fold(0.0f64, f64::max);
    let spec = FitSpec {
        names: vec!["amplitude", "t2", "p"],
        initial: vec![a0, t2_0.clamp(t_max * 1e-3, t_max * 10.0), p0],
        lower: vec![1e-6, t_max * 1e-4, 0.5 + 1e-9],
        upper: vec![10.0, t_max * 100.0, 6.0],
        fd_steps: vec![a0 * 1e-6, t2_0 * 1e-6, 1e-6],
    };
    fit(
        |p, ti| {
            if ti <= 0.0 {
                p[0]
            } else {
                p[0] * (-(ti / p[1]).powf(p[2])).exp()
            }
        },
        &spec,
        t,
        c,
        sigma,
    )
}

/// Cosine response with the phase pinned at zero drive:
/// `a·cos(b·x)`, parameters `[amplitude, rate]` with `rate` in rad per unit
/// of x. The initializer scans a dense periodogram up to the Nyquist rate
/// of the sampling and refines the strongest line parabolically; ties go to
/// the lowest rate, anchoring the monotone low-drive branch.
pub fn fit_sinusoid_fixed_phase(
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
) -> Result<FitResult> {
    if x.len() < 6 {
        return Err(Error::invalid("need at least 6 points for a sinusoid fit"));
    }
    // cos(b·x) is even in x, so the sign of the drive axis is immaterial.
    let (_, _, range) = span(x);
    if range <= 0.0 {
        return Err(Error::invalid("drive axis does not vary"));
    }
    let mut gaps: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    gaps.retain(|g| *g > 0.0);
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min_gap.is_finite() {
        return Err(Error::invalid("drive axis has duplicate points only"));
    }
    let b_max = std::f64::consts::PI / min_gap;
    let b_min = std::f64::consts::PI / (2.0 * range);
    let n_grid = 4000;
    let projection = |b: f64| -> f64 {
        let num: f64 = x.iter().zip(y).map(|(xi, yi)| yi * (b * xi).cos()).sum();
        let den: f64 = x.iter().map(|xi| (b * xi).cos().powi(2)).sum();
        if den > 0.0 {
            num * num / den
        } else {
            0.0
        }
    };
    let mut best = (b_min, projection(b_min));
    let mut samples = Vec::with_capacity(n_grid + 1);
    for i in 0..=n_grid {
        let b = b_min + (b_max - b_min) * i as f64 / n_grid as f64;
        let s = projection(b);
        samples.push(s);
        if s > best.1 {
            best = (b, s);
        }
    }
    // Parabolic refinement on the winning grid interval.
    let db = (b_max - b_min) / n_grid as f64;
    let idx = ((best.0 - b_min) / db).round() as usize;
    let mut b0 = best.0;
    if idx > 0 && idx < n_grid {
        let (s_l, s_c, s_r) = (samples[idx - 1], samples[idx], samples[idx + 1]);
        let denom = s_l - 2.0 * s_c + s_r;
        if denom < 0.0 {
            b0 += db * 0.5 * (s_l - s_r) / denom;
        }
    }
    let num: f64 = x.iter().zip(y).map(|(xi, yi)| yi * (b0 * xi).cos()).sum();
    let den: f64 = x.iter().map(|xi| (b0 * xi).cos().powi(2)).sum();
    let a0 = (num / den).abs().max(1e-9);
    let spec = FitSpec {
        names: vec!["amplitude", "rate"],
        initial: vec![a0, b0],
        lower: vec![0.0, b_min * 0.5],
        upper: vec![UNBOUNDED, b_max * 1.5],
        fd_steps: vec![a0 * 1e-6, b0.max(b_min) * 1e-7],
    };
    fit(|p, xi| p[0] * (p[1] * xi).cos(), &spec, x, y, sigma)
}

/// Superresolved profile fit against the five-level forward model.
///
/// Free parameters are `[center_nm, s0, epsilon, amplitude, offset]`; the
/// doughnut ring radius is an optical property and stays at the template
/// value. The model is `amplitude · resolft_psf(|x - center|) + offset`
/// with the doughnut rebuilt from the trial s0 and ε each evaluation; the
/// offset carries the small differential pedestal a counted scan profile
/// acquires from the π/no-π shot cycles settling to slightly different
/// fixed points. Initialized from the profile's upper-half centroid.
/// Report widths via [`crate::scanner::resolft_fwhm_nm`] on the fitted
/// doughnut.
pub fn fit_resolft_psf(
    x_nm: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    doughnut_template: &DoughnutProfile,
    tau_d_s: f64,
    rates: &RateConstants,
) -> Result<FitResult> {
    if x_nm.len() < 8 {
        return Err(Error::invalid("need at least 8 points for a profile fit"));
    }
    let (lo, hi, range) = span(x_nm);
    if range <= 0.0 {
        return Err(Error::invalid("scan axis does not vary"));
    }
    let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top <= 0.0 {
        return Err(Error::invalid("profile has no positive peak"));
    }
    // Centroid of the upper half of the peak.
    let mut mass = 0.0;
    let mut first = 0.0;
    for (xi, yi) in x_nm.iter().zip(y) {
        if *yi > 0.5 * top {
            mass += yi;
            first += yi * xi;
        }
    }
    let c0 = first / mass;
    let template_peak = resolft_psf(0.0, doughnut_template, tau_d_s, rates)?;
    if template_peak <= 0.0 {
        return Err(Error::invalid("template doughnut produces no response"));
    }
    // Baseline from the wings (outer quarter of the scan on each side).
    let mut wing = 0.0;
    let mut n_wing = 0.0;
    for (xi, yi) in x_nm.iter().zip(y) {
        if (xi - lo).min(hi - xi) < range * 0.25 {
            wing += yi;
            n_wing += 1.0;
        }
    }
    let b0 = if n_wing > 0.0 { wing / n_wing } else { 0.0 };
    let a0 = (top - b0) / template_peak;
    if a0 <= 0.0 {
        return Err(Error::invalid("profile peak does not clear its wings"));
    }
    let r0_nm = doughnut_template.r0_nm;
    let rates = *rates;
    let model = move |p: &[f64], xi: f64| -> f64 {
        let d = DoughnutProfile {
            s0: p[1],
            r0_nm,
            epsilon: p[2],
        };
        match resolft_psf(xi - p[0], &d, tau_d_s, &rates) {
            Ok(v) => p[3] * v + p[4],
            Err(_) => f64::INFINITY,
        }
    };
    let spec = FitSpec {
        names: vec!["center_nm", "s0", "epsilon", "amplitude", "offset"],
        initial: vec![c0, doughnut_template.s0, doughnut_template.epsilon, a0, b0],
        lower: vec![lo, doughnut_template.s0 * 1e-3, 0.0, a0 * 1e-3, -UNBOUNDED],
        upper: vec![hi, doughnut_template.s0 * 1e3, 0.1, a0 * 1e3, UNBOUNDED],
        fd_steps: vec![
            range * 2e-5,
            doughnut_template.s0 * 1e-4,
            1e-5,
            a0 * 1e-5,
            a0.abs().max(1e-9) * 1e-5,
        ],
    };
    fit(model, &spec, x_nm, y, sigma)
}

/// Depth and bath correlation time from a normalized π-train contrast dip.
///
/// The forward model ties the field amplitude to the depth through the
/// half-space dipolar sum at the supplied proton density, so the free
/// parameters are `[depth_nm, t_c_us]` (depth > 0.5 nm). Returns the fit
/// plus the RMS field implied by the fitted depth. The dip minimum supplies
/// the depth initializer; the total evolution time scales t_c's.
pub fn fit_nmr_dip(
    tau_s: &[f64],
    contrast: &[f64],
    sigma: Option<&[f64]>,
    n_pulses: usize,
    nu_center_hz: f64,
    rho_per_m3: f64,
) -> Result<(FitResult, f64)> {
    if tau_s.len() < 5 {
        return Err(Error::invalid("need at least 5 points for a dip fit"));
    }
    if n_pulses == 0 || nu_center_hz <= 0.0 || rho_per_m3 <= 0.0 {
        return Err(Error::invalid("dip fit needs a π count, center frequency, and density"));
    }
    let model = move |p: &[f64], tau: f64| -> f64 {
        let depth_m = p[0] * 1e-9;
        let t_c_s = p[1] * 1e-6;
        let b_rms = match ProtonBath::new(rho_per_m3, depth_m).and_then(|b| proton_brms(&b)) {
            Ok(b) => b,
            Err(_) => return f64::INFINITY,
        };
        match NuclearSignal::new(nu_center_hz, b_rms, t_c_s)
            .and_then(|sig| nmr_contrast(tau, n_pulses, &sig, None))
        {
            Ok(c) => c,
            Err(_) => f64::INFINITY,
        }
    };
    // Initializer: depth from the dip floor via bisection on the forward
    // model at the dip position, t_c from the total evolution time there.
    let i_min = (0..contrast.len())
        .min_by(|a, b| contrast[*a].total_cmp(&contrast[*b]))
        .unwrap();
    let tau_dip = tau_s[i_min];
    let t_c0_us = (n_pulses as f64 * tau_dip * 1e6).max(0.5);
    let floor = contrast[i_min].clamp(1e-3, 0.999);
    let mut d_lo = 0.6;
    let mut d_hi = 30.0;
    for _ in 0..60 {
        let mid = 0.5 * (d_lo + d_hi);
        let c = model(&[mid, t_c0_us], tau_dip);
        // Deeper sensor → weaker field → shallower dip.
        if c < floor {
            d_lo = mid;
        } else {
            d_hi = mid;
        }
    }
    let d0 = 0.5 * (d_lo + d_hi);
    let spec = FitSpec {
        names: vec!["depth_nm", "t_c_us"],
        initial: vec![d0, t_c0_us],
        lower: vec![0.5, t_c0_us * 1e-2],
        upper: vec![100.0, t_c0_us * 1e3],
        fd_steps: vec![d0 * 1e-5, t_c0_us * 1e-5],
    };
    let result = fit(model, &spec, tau_s, contrast, sigma)?;
    let depth_m = result.values[0] * 1e-9;
    let b_rms = proton_brms(&ProtonBath::new(rho_per_m3, depth_m)?)?;
    Ok((result, b_rms))
}

/// Mean-subtracted amplitude periodogram of a response sampled on `x`:
/// `n_grid + 1` rates from half a cycle over the span up to the sampling
/// Nyquist, each with `|projection|` of the data onto that cosine/sine pair.
pub fn spectral_response(x: &[f64], y: &[f64], n_grid: usize) -> Result<Vec<(f64, f64)>> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::invalid("need at least 4 samples for a spectrum"));
    }
    if n_grid < 8 {
        return Err(Error::invalid("spectrum grid too coarse"));
    }
    let (_, _, range) = span(x);
    if range <= 0.0 {
        return Err(Error::invalid("independent variable does not vary"));
    }
    let mut gaps: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    gaps.retain(|g| *g > 0.0);
    let min_gap = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let b_max = std::f64::consts::PI / min_gap;
    let b_min = std::f64::consts::PI / (2.0 * range);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let n = y.len() as f64;
    let mut out = Vec::with_capacity(n_grid + 1);
    for i in 0..=n_grid {
        let b = b_min + (b_max - b_min) * i as f64 / n_grid as f64;
        let mut cos_sum = 0.0;
        let mut sin_sum = 0.0;
        for (xi, yi) in x.iter().zip(y) {
            cos_sum += (yi - mean) * (b * xi).cos();
            sin_sum += (yi - mean) * (b * xi).sin();
        }
        out.push((b, 2.0 * (cos_sum * cos_sum + sin_sum * sin_sum).sqrt() / n));
    }
    Ok(out)
}

/// Location and height of the strongest line in a [`spectral_response`]
/// spectrum, parabolically refined between grid points.
pub fn dominant_peak(spectrum: &[(f64, f64)]) -> Result<(f64, f64)> {
    if spectrum.len() < 3 {
        return Err(Error::invalid("spectrum too short"));
    }
    let idx = (0..spectrum.len())
        .max_by(|a, b| spectrum[*a].1.total_cmp(&spectrum[*b].1))
        .unwrap();
    let (mut b, mut h) = spectrum[idx];
    if idx > 0 && idx + 1 < spectrum.len() {
        let (bl, sl) = spectrum[idx - 1];
        let (_, sc) = spectrum[idx];
        let (br, sr) = spectrum[idx + 1];
        let denom = sl - 2.0 * sc + sr;
        if denom < 0.0 {
            let db = 0.5 * (br - bl);
            let shift = 0.5 * (sl - sr) / denom;
            b += db * shift;
            h = sc - 0.25 * (sl - sr) * shift;
        }
    }
    Ok((b, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::linear_least_squares;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_spec() -> FitSpec {
        FitSpec {
            names: vec!["slope", "intercept"],
            initial: vec![0.0, 0.0],
            lower: vec![-UNBOUNDED, -UNBOUNDED],
            upper: vec![UNBOUNDED, UNBOUNDED],
            fd_steps: vec![1e-6, 1e-6],
        }
    }

    #[test]
    fn linear_fit_matches_normal_equations() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 1.7 * xi - 0.4 + 0.05 * (rng.gen::<f64>() - 0.5))
            .collect();
        let lm = fit(|p, xi| p[0] * xi + p[1], &line_spec(), &x, &y, None).unwrap();
        let design: Vec<Vec<f64>> = x.iter().map(|xi| vec![*xi, 1.0]).collect();
        let exact = linear_least_squares(&design, &y);
        // The numeric Jacobian carries ~1e-9 relative cancellation noise, so
        // agreement with the exact normal equations bottoms out near there.
        assert_relative_eq!(lm.values[0], exact[0], max_relative = 1e-8);
        assert_relative_eq!(lm.values[1], exact[1], max_relative = 1e-8);
    }

    #[test]
    fn exact_data_converges_immediately() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|xi| 2.0 * xi + 1.0).collect();
        let mut spec = line_spec();
        spec.initial = vec![2.0, 1.0];
        let r = fit(|p, xi| p[0] * xi + p[1], &spec, &x, &y, None).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.chi2 < 1e-20);
    }

    #[test]
    fn reported_sigma_matches_analytic_covariance() {
        // One-parameter model y = a·x with unit σ: Var(â) = 1/Σx².
        let x: Vec<f64> = (1..=12).map(|i| i as f64 * 0.5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = x.iter().map(|xi| 3.0 * xi + rng.gen::<f64>() - 0.5).collect();
        let spec = FitSpec {
            names: vec!["a"],
            initial: vec![1.0],
            lower: vec![-UNBOUNDED],
            upper: vec![UNBOUNDED],
            fd_steps: vec![1e-6],
        };
        let sigma = vec![1.0; x.len()];
        let r = fit(|p, xi| p[0] * xi, &spec, &x, &y, Some(&sigma)).unwrap();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let expected = (r.chi2 / r.dof as f64 / sxx).sqrt();
        assert_relative_eq!(r.sigmas[0], expected, max_relative = 1e-8);
    }

    #[test]
    fn fit_is_invariant_under_data_reordering() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| (-(xi - 1.5) * (xi - 1.5) / 0.18).exp() + 0.02 * rng.gen::<f64>())
            .collect();
        let forward = fit_gaussian_center(&x, &y, None).unwrap();
        let xr: Vec<f64> = x.iter().rev().cloned().collect();
        let yr: Vec<f64> = y.iter().rev().cloned().collect();
        let reversed = fit_gaussian_center(&xr, &yr, None).unwrap();
        // Summation order differs, so agreement is at fit precision rather
        // than bitwise.
        for (a, b) in forward.values.iter().zip(&reversed.values) {
            assert_relative_eq!(a, b, max_relative = 1e-7);
        }
    }

    #[test]
    fn gaussian_center_is_exact_on_symmetric_data_and_shifts_covariantly() {
        let x: Vec<f64> = (-25..=25).map(|i| i as f64 * 4.0).collect();
        let model = |xi: f64, c: f64| 120.0 * (-(xi - c) * (xi - c) / (2.0 * 55.0 * 55.0)).exp() + 9.0;
        let y0: Vec<f64> = x.iter().map(|xi| model(*xi, 0.0)).collect();
        let r0 = fit_gaussian_center(&x, &y0, None).unwrap();
        assert!(r0.value("center").unwrap().abs() < 1e-8);
        let y1: Vec<f64> = x.iter().map(|xi| model(*xi, 17.0)).collect();
        let r1 = fit_gaussian_center(&x, &y1, None).unwrap();
        assert_relative_eq!(r1.value("center").unwrap(), 17.0, max_relative = 1e-7);
        assert_relative_eq!(r1.value("width").unwrap(), 55.0, max_relative = 1e-6);
    }

    #[test]
    fn stretched_exponential_round_trips() {
        let t: Vec<f64> = (1..=40).map(|i| i as f64 * 30.0).collect();
        let c: Vec<f64> = t.iter().map(|ti| 0.95 * (-(ti / 800.0f64).powf(3.2)).exp()).collect();
        let r = fit_stretched_exponential(&t, &c, None).unwrap();
        assert_relative_eq!(r.value("amplitude").unwrap(), 0.95, max_relative = 1e-6);
        assert_relative_eq!(r.value("t2").unwrap(), 800.0, max_relative = 1e-6);
        assert_relative_eq!(r.value("p").unwrap(), 3.2, max_relative = 1e-6);
        let resid: f64 = t
            .iter()
            .zip(&c)
            .map(|(ti, ci)| {
                let m = 0.95 * (-(ti / r.value("t2").unwrap()).powf(r.value("p").unwrap())).exp();
                (ci - m) * (ci - m)
            })
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-8);
    }

    #[test]
    fn sinusoid_fit_round_trips_and_is_even_in_drive() {
        let x: Vec<f64> = (0..120).map(|i| i as f64 * 0.06e-3).collect();
        let b_true = 2.7e3;
        let y: Vec<f64> = x.iter().map(|xi| 0.8 * (b_true * xi).cos()).collect();
        let r = fit_sinusoid_fixed_phase(&x, &y, None).unwrap();
        assert_relative_eq!(r.value("amplitude").unwrap(), 0.8, max_relative = 1e-8);
        assert_relative_eq!(r.value("rate").unwrap(), b_true, max_relative = 1e-8);
        // cos is even: flipping the drive sign must not move the fit.
        let xf: Vec<f64> = x.iter().map(|v| -v).collect();
        let rf = fit_sinusoid_fixed_phase(&xf, &y, None).unwrap();
        assert_relative_eq!(
            rf.value("rate").unwrap(),
            r.value("rate").unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn double_gaussian_separation_round_trips() {
        let x: Vec<f64> = (-40..=40).map(|i| i as f64 * 5.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| {
                let g1 = 300.0 * (-(xi + 52.5) * (xi + 52.5) / (2.0 * 22.0 * 22.0)).exp();
                let g2 = 260.0 * (-(xi - 52.5) * (xi - 52.5) / (2.0 * 22.0 * 22.0)).exp();
                g1 + g2 + 12.0
            })
            .collect();
        let r = fit_double_gaussian(&x, &y, None).unwrap();
        let (sep, _) = peak_separation(&r).unwrap();
        assert_relative_eq!(sep, 105.0, max_relative = 1e-6);
    }

    #[test]
    fn resolft_profile_noiseless_round_trip() {
        let rates = RateConstants::room_temperature();
        let truth = DoughnutProfile::new(15.0, 300.0, 0.004).unwrap();
        let tau_d = 2.1e-6;
        let x: Vec<f64> = (-30..=30).map(|i| i as f64 * 5.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 0.8 * resolft_psf(xi - 3.0, &truth, tau_d, &rates).unwrap())
            .collect();
        // Start the fit away from the truth.
        let template = DoughnutProfile::new(8.0, 300.0, 0.01).unwrap();
        let r = fit_resolft_psf(&x, &y, None, &template, tau_d, &rates).unwrap();
        assert_relative_eq!(r.value("center_nm").unwrap(), 3.0, epsilon = 1e-4);
        assert_relative_eq!(r.value("s0").unwrap(), 15.0, max_relative = 1e-4);
        assert_relative_eq!(r.value("epsilon").unwrap(), 0.004, max_relative = 1e-3);
        assert_relative_eq!(r.value("amplitude").unwrap(), 0.8, max_relative = 1e-4);
        // Width from the fitted doughnut agrees with the direct numeric
        // half-maximum of the generating profile.
        let fitted = DoughnutProfile {
            s0: r.value("s0").unwrap(),
            r0_nm: 300.0,
            epsilon: r.value("epsilon").unwrap(),
        };
        let w_fit = crate::scanner::resolft_fwhm_nm(&fitted, tau_d, &rates).unwrap();
        let w_true = crate::scanner::resolft_fwhm_nm(&truth, tau_d, &rates).unwrap();
        assert!((w_fit - w_true).abs() < 0.5, "widths {w_fit} vs {w_true}");
    }

    #[test]
    fn nmr_dip_noiseless_round_trip() {
        let nu = 1.2006849e6;
        let rho = 5e28;
        let depth_true = 3.0;
        let tc_true = 20.0;
        let b_rms = proton_brms(&ProtonBath::new(rho, depth_true * 1e-9).unwrap()).unwrap();
        let signal = NuclearSignal::new(nu, b_rms, tc_true * 1e-6).unwrap();
        let center = 0.5 / nu;
        let tau: Vec<f64> = (0..81)
            .map(|i| center * (0.9 + 0.2 * i as f64 / 80.0))
            .collect();
        let c: Vec<f64> = tau
            .iter()
            .map(|t| nmr_contrast(*t, 64, &signal, None).unwrap())
            .collect();
        let (r, b_fit) = fit_nmr_dip(&tau, &c, None, 64, nu, rho).unwrap();
        assert_relative_eq!(r.value("depth_nm").unwrap(), depth_true, max_relative = 1e-5);
        assert_relative_eq!(r.value("t_c_us").unwrap(), tc_true, max_relative = 1e-4);
        assert_relative_eq!(b_fit, b_rms, max_relative = 1e-4);
    }

    #[test]
    fn spectrum_finds_a_pure_tone_and_noise_floor_is_flat() {
        let x: Vec<f64> = (0..400).map(|i| i as f64 * 0.05e-3).collect();
        let b_true = 2.4e3;
        let y: Vec<f64> = x.iter().map(|xi| 0.6 * (b_true * xi).cos()).collect();
        let spec = spectral_response(&x, &y, 3000).unwrap();
        let (b_peak, height) = dominant_peak(&spec).unwrap();
        // Finite-window leakage biases the line position by a fraction of a
        // percent at ~8 cycles of record.
        assert_relative_eq!(b_peak, b_true, max_relative = 5e-3);
        assert!(height > 0.5);
        // Zero signal: no line anywhere near the tone's height.
        let flat = vec![0.0; x.len()];
        let spec0 = spectral_response(&x, &flat, 3000).unwrap();
        let (_, h0) = dominant_peak(&spec0).unwrap();
        assert!(h0 < 1e-12);
    }

    #[test]
    fn engine_reports_failures_explicitly() {
        // Two points cannot constrain three parameters.
        let err = fit_gaussian_center(&[0.0, 1.0], &[0.0, 1.0], None);
        assert!(err.is_err());
        // A parameter with no model influence leaves the normal matrix
        // singular.
        let spec = FitSpec {
            names: vec!["used", "unused"],
            initial: vec![1.0, 1.0],
            lower: vec![-UNBOUNDED, -UNBOUNDED],
            upper: vec![UNBOUNDED, UNBOUNDED],
            fd_steps: vec![1e-6, 1e-6],
        };
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|xi| 2.0 * xi + 0.3).collect();
        let r = fit(|p, xi| p[0] * xi, &spec, &x, &y, None);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }
}
