//! Scenario files: parsing, assembly into an [`Environment`](crate::runtime::Environment), and runs.
//!
//! The file format is described in `scenarios/FORMAT.md`.

mod build;
mod config;
mod plots;
mod run;
mod text;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use build::{build_environment, BuildingPaths, BuiltScenario, FanSystemPaths};
pub use config::*;
pub use plots::{emit_plots, PlotReport};
pub use run::{read_manifest, run_scenario, BuildingMetrics, Manifest, RunMetrics};
pub use text::ConfigError;

use crate::runtime::RuntimeError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Config(Vec<ConfigError>),
    #[error("{0}")]
    Build(String),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("plot: {0}")]
    Plot(String),
}

impl ScenarioError {
    /// Problems in the scenario itself rather than in running it.
    pub fn is_validation(&self) -> bool {
        matches!(self, ScenarioError::Config(_) | ScenarioError::Build(_))
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A scenario shipped with the crate.
#[derive(Debug, Clone, Copy)]
pub struct Bundled {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "s1_fan_tracking",
        summary: "one day of VFD, staged and constant fans following a sinusoidal flow setpoint",
        text: include_str!("../../scenarios/s1_fan_tracking.cfg"),
    },
    Bundled {
        name: "s2_model_generalization",
        summary: "RC house whose FCU switches off after day one, with a learned model predicting alongside",
        text: include_str!("../../scenarios/s2_model_generalization.cfg"),
    },
    Bundled {
        name: "s3_house_der",
        summary: "one house day: deadband FCU, PV, battery, EV and TOU dispatch",
        text: include_str!("../../scenarios/s3_house_der.cfg"),
    },
    Bundled {
        name: "s3_house_der_tank",
        summary: "s3 with a second house that has a hot-water tank",
        text: include_str!("../../scenarios/s3_house_der_tank.cfg"),
    },
    Bundled {
        name: "s4_cluster5",
        summary: "five heterogeneous houses over two days under a cluster peak cap",
        text: include_str!("../../scenarios/s4_cluster5.cfg"),
    },
];

/// Directory that relative paths in bundled scenarios resolve against.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn bundled(name: &str) -> Option<&'static Bundled> {
    BUNDLED.iter().find(|b| b.name == name)
}

/// Scenario text and the directory its relative paths resolve against.
/// `spec` is a file path or the name of a bundled scenario.
pub fn load_scenario_source(spec: &str) -> Result<(String, PathBuf), ScenarioError> {
    let p = Path::new(spec);
    if p.exists() {
        let text = std::fs::read_to_string(p).map_err(|e| ScenarioError::io(p, e))?;
        let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((text, base));
    }
    match bundled(spec) {
        Some(b) => Ok((b.text.to_string(), bundled_dir())),
        None => Err(ScenarioError::io(
            p,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled scenario"),
        )),
    }
}

/// Reads and fully validates a scenario, including its wiring.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    validate_text(&text, base, None)
}

/// Parses `text` and checks that it assembles into a well-wired environment.
pub fn validate_text(text: &str, base: &Path, seed: Option<u64>) -> Result<ScenarioConfig, ScenarioError> {
    let cfg = parse_scenario_text_seeded(text, base, seed).map_err(ScenarioError::Config)?;
    build_environment(&cfg)?;
    Ok(cfg)
}
