use std::path::Path;

use serde_json::Value;
use truelearn::eval::GridSpec;
use truelearn::models::{ModelConfig, ModelKind};

use crate::Failure;

/// Reads a model configuration file. Keys are the `ModelConfig` field
/// names; any key left out keeps the default for the chosen kind.
///
/// ```toml
/// kind = "truelearn-novelty"
/// initial_variance = 0.5
/// beta = 0.5
/// tau = 0.0
/// use_negative = true
/// top_k = 5
/// ```
pub fn load_model_config(path: Option<&Path>, kind_flag: Option<ModelKind>) -> Result<ModelConfig, Failure> {
    let table = match path {
        Some(p) => read_toml(p)?,
        None => toml::Table::new(),
    };
    let file_kind = match table.get("kind") {
        Some(toml::Value::String(s)) => Some(s.parse::<ModelKind>().map_err(Failure::usage)?),
        Some(_) => return Err(Failure::usage("config key `kind` must be a string")),
        None => None,
    };
    let kind = kind_flag
        .or(file_kind)
        .ok_or_else(|| Failure::usage("no model given: pass --model or set `kind` in the config file"))?;

    let mut merged = serde_json::to_value(ModelConfig::for_kind(kind)).expect("config serializes");
    let overrides = serde_json::to_value(&table).map_err(|e| Failure::usage(format!("config: {e}")))?;
    if let (Value::Object(base), Value::Object(over)) = (&mut merged, overrides) {
        for (k, v) in over {
            base.insert(k, v);
        }
        base.insert("kind".into(), Value::String(kind.name().into()));
    }
    let cfg: ModelConfig =
        serde_json::from_value(merged).map_err(|e| Failure::usage(format!("config {}: {e}", describe(path))))?;
    cfg.validate().map_err(Failure::from)?;
    Ok(cfg)
}

/// Reads a grid file, e.g. `initial_variance = [0.5, 1.0]`.
pub fn load_grid(path: &Path) -> Result<GridSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let grid: GridSpec = toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if grid.is_empty() {
        return Err(Failure::usage(format!("{}: grid has no values", path.display())));
    }
    Ok(grid)
}

pub fn read_toml(path: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    text.parse().map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn describe(path: Option<&Path>) -> String {
    path.map(|p| p.display().to_string()).unwrap_or_else(|| "(defaults)".into())
}
