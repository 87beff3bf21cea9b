use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spinresolft::io::{svg_line_plot, Dataset, Series};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory plus the provenance stamped into every file: the
/// effective seed and the hash of the scenario the command ran from.
pub struct Emit {
    dir: PathBuf,
    svg: bool,
    seed: u64,
    scenario_sha256: String,
}

impl Emit {
    pub fn new(dir: &Path, svg: bool, seed: u64, scenario_sha256: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            svg,
            seed,
            scenario_sha256: scenario_sha256.to_string(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dataset(&self) -> Dataset {
        Dataset::with_provenance(TOOL_VERSION, Some(self.seed), Some(&self.scenario_sha256))
    }

    pub fn write_csv(&self, stem: &str, data: &Dataset) -> Result<()> {
        let path = self.dir.join(format!("{stem}.csv"));
        fs::write(&path, data.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_plot(
        &self,
        stem: &str,
        title: &str,
        x_label: &str,
        y_label: &str,
        series: &[Series],
    ) -> Result<()> {
        if !self.svg {
            return Ok(());
        }
        let path = self.dir.join(format!("{stem}.svg"));
        fs::write(&path, svg_line_plot(title, x_label, y_label, series))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_text(&self, file_name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(file_name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

/// Every non-sigma column of `data` plotted against the `x_name` column.
pub fn column_series<'a>(data: &'a Dataset, x_name: &str) -> Result<Vec<Series<'a>>> {
    let x = data.column(x_name)?;
    Ok(data
        .columns
        .iter()
        .filter(|c| c.name != x_name && c.name != "sigma")
        .map(|c| Series {
            label: &c.name,
            x,
            y: &c.values,
        })
        .collect())
}
