pub mod dataset;
pub mod gradcheck;
pub mod landscape;
pub mod simulate;
pub mod sweep;

use icrlab_core::icr::IcrConfig;
use icrlab_core::loss::LossKind;

use crate::CliError;

/// Builds the ICR config from the penalty flags. `enabling_flags` names
/// the flag(s) that switch the penalty on, for the usage message.
pub fn icr_from_flags(
    icr: bool,
    delta: Option<f64>,
    kind: LossKind,
    enabling_flags: &str,
) -> Result<Option<IcrConfig>, CliError> {
    match (icr, delta) {
        (false, Some(_)) => Err(CliError::Usage(format!(
            "--delta requires {enabling_flags}"
        ))),
        (false, None) => Ok(None),
        (true, d) => IcrConfig::new(d.unwrap_or(icrlab_core::icr::DEFAULT_DELTA), kind)
            .map(Some)
            .map_err(|e| CliError::Config(format!("--delta: {e}"))),
    }
}

pub fn arm_name(icr: bool) -> &'static str {
    if icr {
        "icr"
    } else {
        "base"
    }
}
