use std::fs;
use std::path::Path;

use crate::canonical::to_canonical_string;
use crate::error::{Error, Result};

use super::Network;

/// Parses and validates a case from its JSON text. `origin` is only used in
/// error messages.
pub fn parse_case(text: &str, origin: &Path) -> Result<Network> {
    let net: Network =
        serde_json::from_str(text).map_err(|source| Error::Parse { path: origin.to_path_buf(), source })?;
    net.validated()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_case(&text, path)
}

/// Canonical case text: entities sorted by id, reals at nine significant
/// digits, object keys sorted.
pub fn to_case_string(net: &Network) -> String {
    let mut sorted = net.clone();
    sorted.sort();
    to_canonical_string(&sorted).expect("network serializes")
}

pub fn save_case(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_case_string(net)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
