//! Config files and model selection.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use parisian_core::parisian::Precision;
use parisian_core::LevyModel;
use serde::Deserialize;
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub model: LevyModel,
    #[serde(default)]
    pub output_format: Option<Format>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// `inner_abs`, `inner_rel`, `outer_abs`, `outer_rel`.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl CliConfig {
    pub fn precision(&self) -> Result<Precision, Failure> {
        let mut prec = Precision::default();
        for (key, &v) in &self.tolerances {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Usage(format!("tolerance {key} must be positive, got {v}")));
            }
            match key.as_str() {
                "inner_abs" => prec.inner.abs = v,
                "inner_rel" => prec.inner.rel = v,
                "outer_abs" => prec.outer.abs = v,
                "outer_rel" => prec.outer.rel = v,
                other => {
                    return Err(Failure::Usage(format!(
                        "unknown tolerance {other:?}, expected inner_abs, inner_rel, outer_abs or outer_rel"
                    )))
                }
            }
        }
        Ok(prec)
    }
}

/// Reads a config file. JSON unless the extension is `.toml`. A file whose
/// `model` key is a string is taken as a bare model description.
pub fn load(path: &Path) -> Result<CliConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
    };
    parse(value).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse(value: Value) -> Result<CliConfig, String> {
    let bare = matches!(value.get("model"), Some(Value::String(_)));
    let config = if bare {
        let model: LevyModel = serde_json::from_value(value).map_err(|e| e.to_string())?;
        CliConfig {
            model,
            output_format: None,
            output_path: None,
            seed: None,
            tolerances: BTreeMap::new(),
        }
    } else {
        serde_json::from_value(value).map_err(|e| e.to_string())?
    };
    config.model.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_and_full_forms() {
        let bare = parse(serde_json::json!({"model": "brownian", "c": 1.0, "sigma": 1.0})).unwrap();
        assert_eq!(bare.model, LevyModel::BrownianRisk { c: 1.0, sigma: 1.0 });
        let full = parse(serde_json::json!({
            "model": {"model": "cramer_lundberg", "c": 2.0, "eta": 1.0, "alpha": 1.0},
            "seed": 7,
            "tolerances": {"outer_rel": 1e-8}
        }))
        .unwrap();
        assert_eq!(full.seed, Some(7));
        assert_eq!(full.precision().unwrap().outer.rel, 1e-8);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_models() {
        assert!(parse(serde_json::json!({"model": "brownian", "c": 1.0, "sigma": 1.0, "mu": 0})).is_err());
        assert!(parse(serde_json::json!({"model": {"model": "brownian", "c": 1.0, "sigma": 1.0}, "x": 1})).is_err());
        assert!(parse(serde_json::json!({"model": "brownian", "c": 1.0, "sigma": -1.0})).is_err());
        let cfg = parse(serde_json::json!({
            "model": {"model": "brownian", "c": 1.0, "sigma": 1.0},
            "tolerances": {"outer": 1e-8}
        }))
        .unwrap();
        assert!(cfg.precision().is_err());
    }
}
