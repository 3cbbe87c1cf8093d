//! Configuration, experiment runs, result files and the oracle suite entry point.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, ExperimentFile, ExperimentKind};
pub use experiment::{build_problem, run_experiment, scenario_id, write_outputs, ExperimentOutput, RunOptions};
pub use output::{Format, ResultRow, Status, TdRow};

use crate::error::{Error, Result};
use crate::oracles::{run_all, OracleReport};

/// Built-in experiment files, by name.
pub const PRESETS: [(&str, &str); 7] = [
    ("fig3", include_str!("../../presets/fig3.toml")),
    ("fig4", include_str!("../../presets/fig4.toml")),
    ("fig5", include_str!("../../presets/fig5.toml")),
    ("fig6", include_str!("../../presets/fig6.toml")),
    ("fig7", include_str!("../../presets/fig7.toml")),
    ("fig8", include_str!("../../presets/fig8.toml")),
    ("toy", include_str!("../../presets/toy.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentFile> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
    ExperimentFile::parse(text)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Runs every oracle check with the configured model and sample sizes.
pub fn validate_oracles(cfg: &ExperimentConfig) -> Result<OracleReport> {
    run_all(&cfg.oracles, &cfg.radio, &cfg.link)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for (name, _) in PRESETS {
            let f = preset(name).unwrap();
            assert_eq!(f.name, name);
            f.resolve().unwrap();
        }
        assert!(preset("fig9").is_err());
    }
}
