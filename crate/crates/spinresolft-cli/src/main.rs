mod emit;
mod fitcmd;
mod reproduce;
mod scenarios;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Psf,
    #[value(name = "scan2d")]
    Scan2d,
    Coherence,
    Magnetometry,
    Nmr,
    Repolarization,
    Wirefield,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Parser)]
#[command(
    name = "spinresolft",
    version,
    about = "Forward simulator and fitting toolkit for spin-depletion superresolution magnetometry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one forward simulation from a scenario.
    Simulate {
        /// What to simulate.
        #[arg(value_enum)]
        kind: SimKind,
        /// Scenario: a TOML path, a name under $SPINRESOLFT_SCENARIO_DIR,
        /// or a built-in (default, wire_verbatim, drift_open_loop,
        /// drift_stabilized).
        #[arg(long)]
        scenario: Option<String>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Fit a model to a CSV produced by `simulate`.
    Fit {
        /// Model: gaussian, double_gaussian, psf, stretched_exp, sinusoid,
        /// or nmr_dip.
        model: String,
        /// Input CSV.
        input: PathBuf,
        /// Scenario supplying fixed model context (beams, rates, sequence).
        #[arg(long)]
        scenario: Option<String>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Rebuild one of the bundled reference outputs end to end.
    Reproduce {
        /// Figure id: fig1d, fig2c, fig3b, fig3c, fig4c, figS3, figS4,
        /// figS6, figS7, or figS8.
        figure: String,
        /// Override the pinned scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; files land under `<out>/<figure>/`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::CsvSvg)]
        format: Format,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            kind,
            scenario,
            seed,
            out,
            format,
        } => {
            let (sc, emit) = prepare(scenario.as_deref(), seed, &out, format)?;
            simulate::run(kind, &sc, &emit)
        }
        Command::Fit {
            model,
            input,
            scenario,
            seed,
            out,
            format,
        } => {
            let (sc, emit) = prepare(scenario.as_deref(), seed, &out, format)?;
            fitcmd::run(&model, &input, &sc, &emit)
        }
        Command::Reproduce {
            figure,
            seed,
            out,
            format,
        } => reproduce::run(&figure, seed, &out, format == Format::CsvSvg),
    }
}

fn prepare(
    scenario: Option<&str>,
    seed: Option<u64>,
    out: &std::path::Path,
    format: Format,
) -> Result<(spinresolft::config::Scenario, emit::Emit)> {
    let loaded = scenarios::resolve(scenario)?;
    let mut sc = loaded.scenario;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let emit = emit::Emit::new(out, format == Format::CsvSvg, sc.seed, &loaded.sha256)?;
    Ok((sc, emit))
}
