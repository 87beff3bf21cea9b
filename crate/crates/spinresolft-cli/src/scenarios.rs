use std::env;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use spinresolft::config::{load_scenario, scenario_sha256, Scenario};

/// Directory searched for `<name>.toml` before the built-in scenarios.
pub const ENV_DIR: &str = "SPINRESOLFT_SCENARIO_DIR";

const BUILTIN: [(&str, &str); 4] = [
    ("default", include_str!("../scenarios/default.toml")),
    ("wire_verbatim", include_str!("../scenarios/wire_verbatim.toml")),
    ("drift_open_loop", include_str!("../scenarios/drift_open_loop.toml")),
    ("drift_stabilized", include_str!("../scenarios/drift_stabilized.toml")),
];

pub struct Loaded {
    pub scenario: Scenario,
    pub sha256: String,
}

/// Resolve a `--scenario` argument: an explicit TOML path wins, then
/// `$SPINRESOLFT_SCENARIO_DIR/<name>.toml`, then the built-in set. No
/// argument means the built-in default.
pub fn resolve(arg: Option<&str>) -> Result<Loaded> {
    let name = arg.unwrap_or("default");

    if name.contains('/') || name.ends_with(".toml") {
        let (scenario, sha256) = load_scenario(Path::new(name))
            .with_context(|| format!("loading scenario {name}"))?;
        return Ok(Loaded { scenario, sha256 });
    }

    if let Ok(dir) = env::var(ENV_DIR) {
        let candidate = PathBuf::from(dir).join(format!("{name}.toml"));
        if candidate.is_file() {
            let (scenario, sha256) = load_scenario(&candidate)
                .with_context(|| format!("loading scenario {}", candidate.display()))?;
            return Ok(Loaded { scenario, sha256 });
        }
    }

    if let Some((_, text)) = BUILTIN.iter().find(|(n, _)| *n == name) {
        let scenario = Scenario::from_toml(text)
            .with_context(|| format!("built-in scenario {name}"))?;
        return Ok(Loaded {
            scenario,
            sha256: scenario_sha256(text),
        });
    }

    let known: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
    bail!(
        "no scenario named '{name}'; built-ins are {}, or pass a .toml path (searched ${ENV_DIR} first)",
        known.join(", ")
    );
}
