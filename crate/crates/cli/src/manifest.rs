use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use subspace_merge::config::ResolvedConfig;

/// Written as `manifest.json` next to a command's primary output.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub config: ResolvedConfig,
    /// Command-specific inputs that are not part of the layered config.
    pub params: Value,
    pub outputs: Vec<PathBuf>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// SHA-256 over the command, the resolved config and the command parameters.
pub fn config_hash(command: &str, config: &ResolvedConfig, params: &Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(config.canonical_json().as_bytes());
    h.update([0]);
    h.update(params.to_string().as_bytes());
    hex::encode(h.finalize())
}

impl RunManifest {
    pub fn new(command: &str, config: &ResolvedConfig, params: Value, started_at: String) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash(command, config, &params),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.spec.seed,
            started_at,
            finished_at: String::new(),
            config: config.clone(),
            params,
            outputs: Vec::new(),
        }
    }

    /// Default location: `manifest.json` in the directory holding `primary`.
    pub fn default_path(primary: &Path) -> PathBuf {
        primary
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."))
            .join("manifest.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let cfg = ResolvedConfig::default();
        let a = config_hash("merge", &cfg, &json!({"models": ["a"]}));
        assert_eq!(a, config_hash("merge", &cfg, &json!({"models": ["a"]})));
        assert_eq!(a.len(), 64);
        let tweaked = ResolvedConfig { tau: 2.0, ..cfg.clone() };
        assert_ne!(a, config_hash("merge", &tweaked, &json!({"models": ["a"]})));
        assert_ne!(a, config_hash("merge", &cfg, &json!({"models": ["b"]})));
        assert_ne!(a, config_hash("sar", &cfg, &json!({"models": ["a"]})));
    }

    #[test]
    fn default_path_is_beside_output() {
        assert_eq!(RunManifest::default_path(Path::new("out/results.csv")), Path::new("out/manifest.json"));
        assert_eq!(RunManifest::default_path(Path::new("results.csv")), Path::new("./manifest.json"));
    }
}
