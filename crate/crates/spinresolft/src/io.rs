//! Delimited output with a provenance header, and minimal static plots.
//!
//! Every file starts with `# key = value` lines carrying the tool version,
//! the seed, and the scenario hash, then a column-name header, then rows.
//! Nothing time- or host-dependent goes into the header: two runs of the
//! same build on the same inputs must produce byte-identical files.

use std::fmt::Write as _;

use crate::error::Error;
use crate::Result;

/// One named numeric column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Column-major table with provenance metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<Column>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Standard provenance stamp. `tool_version` is the binary's version,
    /// not a build date; timestamps would break reproducibility.
    pub fn with_provenance(
        tool_version: &str,
        seed: Option<u64>,
        scenario_sha256: Option<&str>,
    ) -> Self {
        let mut meta = vec![("tool_version".to_string(), tool_version.to_string())];
        if let Some(seed) = seed {
            meta.push(("seed".to_string(), seed.to_string()));
        }
        if let Some(hash) = scenario_sha256 {
            meta.push(("scenario_sha256".to_string(), hash.to_string()));
        }
        Self {
            meta,
            columns: Vec::new(),
        }
    }

    pub fn add_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if values.len() != first.values.len() {
                return Err(Error::Schema(format!(
                    "column '{name}' has {} rows, table has {}",
                    values.len(),
                    first.values.len()
                )));
            }
        }
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::Schema(format!("duplicate column '{name}'")));
        }
        self.columns.push(Column {
            name: name.to_string(),
            values,
        });
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    /// Column by name, or a schema error listing what the table has.
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| {
                let have: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
                Error::Schema(format!(
                    "missing column '{name}' (file has: {})",
                    have.join(", ")
                ))
            })
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Serialize to CSV. Floats use the shortest round-trip form, so the
    /// bytes are a pure function of the values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.meta {
            let _ = writeln!(out, "# {key} = {value}");
        }
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        let _ = writeln!(out, "{}", names.join(","));
        for row in 0..self.rows() {
            let mut first = true;
            for col in &self.columns {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{}", col.values[row]);
            }
            out.push('\n');
        }
        out
    }

    /// Parse CSV written by [`Dataset::to_csv`] (or anything shaped like
    /// it: `#` metadata lines, a header row, numeric rows).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.peek() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    meta.push((key.trim().to_string(), value.trim().to_string()));
                }
                lines.next();
            } else if trimmed.is_empty() {
                lines.next();
            } else {
                break;
            }
        }
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Schema("file has no column header".into()))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if names.iter().any(|n| n.is_empty()) {
            return Err(Error::Schema("empty column name in header".into()));
        }
        let mut columns: Vec<Column> = names
            .into_iter()
            .map(|name| Column {
                name,
                values: Vec::new(),
            })
            .collect();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns.len() {
                return Err(Error::Schema(format!(
                    "line {}: {} cells, expected {}",
                    idx + 1,
                    cells.len(),
                    columns.len()
                )));
            }
            for (col, cell) in columns.iter_mut().zip(&cells) {
                let value: f64 = cell.trim().parse().map_err(|_| {
                    Error::Schema(format!(
                        "line {}: '{}' is not a number",
                        idx + 1,
                        cell.trim()
                    ))
                })?;
                col.values.push(value);
            }
        }
        Ok(Self { meta, columns })
    }
}

/// One curve in an SVG plot.
#[derive(Debug, Clone)]
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const PALETTE: [&str; 6] = [
    "#c0392b", "#2b6cb0", "#1f8a4c", "#8e44ad", "#b7791f", "#2d3748",
];

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs();
    if (1e-3..1e5).contains(&magnitude) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Static line plot: fixed canvas, numeric axes, a legend when there is
/// more than one series. No scripts, no external references.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 64.0;
    const MR: f64 = 18.0;
    const MT: f64 = 34.0;
    const MB: f64 = 48.0;
    let (x_lo, x_hi) = axis_range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y_lo, y_hi) = axis_range(series.iter().flat_map(|s| s.y.iter().copied()));
    let sx = |x: f64| ML + (x - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        (ML + W - MR) / 2.0,
        escape(title)
    );

    for i in 0..=4 {
        let fx = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let px = sx(fx);
        let py = sy(fy);
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            sy(y_lo),
            sy(y_hi)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{:.1}\" y2=\"{py:.1}\" stroke=\"#ddd\"/>",
            sx(x_lo),
            sx(x_hi)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            H - MB + 16.0,
            fmt_tick(fx)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            ML - 6.0,
            py + 4.0,
            fmt_tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#444\"/>",
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (ML + W - MR) / 2.0,
        H - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for (x, y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        );
        if series.len() > 1 {
            let ly = MT + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                svg,
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
                 stroke=\"{color}\" stroke-width=\"1.5\"/>",
                ML + 10.0,
                ML + 34.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                ML + 40.0,
                ly + 4.0,
                escape(s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
