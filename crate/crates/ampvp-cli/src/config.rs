//! Config loading with line and field diagnostics.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

/// Reads `path`, or falls back to the type's defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(path) => load_file(path),
        None => Ok(T::default()),
    }
}

pub fn load_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse(&text).with_context(|| format!("malformed config {}", path.display()))
}

/// Parses one JSON document. Unknown fields are rejected.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(serde_ignored::Deserializer::new(&mut de, &mut |p: serde_ignored::Path| unknown.push(p.to_string())))
        .map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow::anyhow!("line {}, column {}, field `{path}`: {inner}", inner.line(), inner.column())
        })?;
    de.end().map_err(|e| anyhow::anyhow!("line {}, column {}: {e}", e.line(), e.column()))?;
    if !unknown.is_empty() {
        bail!("unknown field(s): {}", unknown.join(", "));
    }
    Ok(value)
}
