//! Scenario resolution: named presets plus a JSON-file escape hatch.

use std::path::Path;

use icrlab_core::sim::Scenario;

use crate::CliError;

/// Resolves `--scenario`: a preset name first, then a JSON file path.
pub fn resolve(spec: &str) -> Result<Scenario, CliError> {
    if let Some(preset) = Scenario::preset(spec) {
        return Ok(preset);
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("--scenario: cannot read {spec}: {e}")))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("--scenario: invalid scenario file {spec}: {e}"))
        })?;
        return Ok(scenario);
    }
    Err(CliError::Usage(format!(
        "--scenario: '{spec}' is neither a preset ({}) nor an existing file",
        Scenario::PRESET_NAMES.join(", ")
    )))
}
