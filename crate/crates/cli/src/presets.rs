//! Named scenarios shipped with the binary.

use crate::config::{self, FileConfig};
use crate::error::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("equilibrium", include_str!("../presets/equilibrium.ini")),
    (
        "equilibrium-perturbation",
        include_str!("../presets/equilibrium-perturbation.ini"),
    ),
    ("freezing-front", include_str!("../presets/freezing-front.ini")),
    ("thaw", include_str!("../presets/thaw.ini")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Result<FileConfig, CliError> {
    let t = text(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset '{name}' (available: {})",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    config::parse_str(t, &format!("preset:{name}"))
}
