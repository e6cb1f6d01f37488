//! Data shipped with the binary. Setting `TFQKD_FIXTURES` to a directory
//! makes every fixture load from there instead.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub const ENV_VAR: &str = "TFQKD_FIXTURES";

/// Prefix that names a fixture instead of a file path.
pub const PREFIX: &str = "fixture:";

const BUNDLED: [(&str, &str); 4] = [
    ("field-trial-decoy.csv", include_str!("../fixtures/field-trial-decoy.csv")),
    ("leakage-anchors.csv", include_str!("../fixtures/leakage-anchors.csv")),
    ("field-300km.conf", include_str!("../fixtures/field-300km.conf")),
    ("noiseless.conf", include_str!("../fixtures/noiseless.conf")),
];

pub const TABLES: &str = "fixture:field-trial-decoy.csv";
pub const ANCHORS: &str = "fixture:leakage-anchors.csv";

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn fixture(name: &str) -> Result<String> {
    if let Some(dir) = std::env::var_os(ENV_VAR) {
        let path = Path::new(&dir).join(name);
        return std::fs::read_to_string(&path).map_err(|e| CliError::io(path, e));
    }
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| text.to_string())
        .ok_or_else(|| CliError::Config(format!("unknown fixture {name:?}")))
}

/// Reads `source`, which is either a path or `fixture:NAME`.
pub fn load(source: &str) -> Result<String> {
    match source.strip_prefix(PREFIX) {
        Some(name) => fixture(name),
        None => {
            let path = PathBuf::from(source);
            std::fs::read_to_string(&path).map_err(|e| CliError::io(path, e))
        }
    }
}
