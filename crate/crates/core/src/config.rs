//! Layered JSON configuration: defaults, then a config file, then flags.
//!
//! Each layer is a JSON object. Objects merge key by key, everything else
//! replaces. The merged document must deserialize into [`ResolvedConfig`];
//! unknown keys at any level are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::harness::{FitConfig, SyntheticSpec};
use crate::merge::{MergeConfig, Method, ScoreVariant, DEFAULT_TAU, DEFAULT_TIES_DENSITY};
use crate::metrics::DEFAULT_EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolvedConfig {
    pub method: Method,
    pub score_variant: ScoreVariant,
    pub lambda: f64,
    pub tau: f64,
    pub normalize_sigma_by_domains: bool,
    pub ties_density: f64,
    /// Residual-energy threshold for rank selection in SAR and angles.
    pub epsilon: f64,
    pub spec: SyntheticSpec,
    pub fit: FitConfig,
}

impl Default for ResolvedConfig {
    fn default() -> Self {
        Self {
            method: Method::Score,
            score_variant: ScoreVariant::Trimmed,
            lambda: 1.0,
            tau: DEFAULT_TAU,
            normalize_sigma_by_domains: false,
            ties_density: DEFAULT_TIES_DENSITY,
            epsilon: DEFAULT_EPSILON,
            spec: SyntheticSpec::default(),
            fit: FitConfig::default(),
        }
    }
}

fn merge_into(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge_into(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

impl ResolvedConfig {
    /// Applies `layers` in order over the defaults; later layers win.
    pub fn resolve(layers: &[Value]) -> Result<Self> {
        let mut doc = serde_json::to_value(Self::default())?;
        for layer in layers {
            if !layer.is_object() {
                return Err(Error::InvalidArgument("config layer must be a JSON object".into()));
            }
            merge_into(&mut doc, layer);
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.merge_config().validate()?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        self.spec.validate()?;
        if !(self.fit.lr > 0.0 && self.fit.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("fit.lr must be positive, got {}", self.fit.lr)));
        }
        Ok(())
    }

    pub fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            method: self.method,
            score_variant: self.score_variant,
            lambda: self.lambda,
            tau: self.tau,
            normalize_sigma_by_domains: self.normalize_sigma_by_domains,
            ties_density: self.ties_density,
        }
    }

    /// Compact JSON with fields in declaration order; stable for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Reads a JSON object from `path` without interpreting it.
pub fn read_layer(path: impl AsRef<Path>) -> Result<Value> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Value::Object(Map::new()));
    }
    let value: Value = serde_json::from_str(&text)?;
    if !value.is_object() {
        return Err(Error::InvalidArgument(format!("{}: config must be a JSON object", path.display())));
    }
    Ok(value)
}

/// Defaults overlaid with the file at `path`.
pub fn load_config(path: impl AsRef<Path>) -> Result<ResolvedConfig> {
    ResolvedConfig::resolve(&[read_layer(path)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_config_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, "{}").unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!((cfg.lambda, cfg.tau, cfg.epsilon), (1.0, 1.96, 0.05));
        std::fs::write(&path, "").unwrap();
        assert_eq!(load_config(&path).unwrap(), ResolvedConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let cfg = ResolvedConfig::resolve(&[json!({"tau": 3.0}), json!({"tau": 2.0})]).unwrap();
        assert_eq!(cfg.tau, 2.0);
        let cfg = ResolvedConfig::resolve(&[json!({"spec": {"n_domains": 5}}), json!({"spec": {"seed": 9}})]).unwrap();
        assert_eq!((cfg.spec.n_domains, cfg.spec.seed, cfg.spec.n_classes), (5, 9, 4));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ResolvedConfig::resolve(&[json!({"tao": 2.0})]).unwrap_err().to_string();
        assert!(err.contains("tao"), "{err}");
        let err = ResolvedConfig::resolve(&[json!({"spec": {"n_domain": 2}})]).unwrap_err().to_string();
        assert!(err.contains("n_domain"), "{err}");
        assert!(ResolvedConfig::resolve(&[json!({"epsilon": 1.5})]).is_err());
        assert!(ResolvedConfig::resolve(&[json!([1, 2])]).is_err());
    }

    #[test]
    fn canonical_json_tracks_fields() {
        let a = ResolvedConfig::default();
        let b = ResolvedConfig::resolve(&[json!({})]).unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
        let c = ResolvedConfig::resolve(&[json!({"ties_density": 0.3})]).unwrap();
        assert_ne!(a.canonical_json(), c.canonical_json());
    }
}
