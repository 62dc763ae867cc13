use std::fs;
use std::path::Path;

use grouppdo::checks::Tolerances;
use grouppdo::group::{Backend, GridConfig};
use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::Value;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    backend: Backend,
    grid: Value,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default)]
    seed: u64,
}

/// Parsed experiment config.  `raw` is the file content, echoed verbatim in
/// reports.
pub struct Config {
    pub raw: Box<RawValue>,
    pub grid: GridConfig,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Config::parse(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Config, String> {
        let raw = RawValue::from_string(text.trim().to_string()).map_err(|e| e.to_string())?;
        let file: ConfigFile = serde_json::from_str(raw.get()).map_err(|e| e.to_string())?;
        let mut grid = file.grid;
        let obj = grid.as_object_mut().ok_or("`grid` must be an object")?;
        let backend = serde_json::to_value(file.backend).map_err(|e| e.to_string())?;
        match obj.get("backend") {
            None => {
                obj.insert("backend".into(), backend);
            }
            Some(b) if *b == backend => {}
            Some(b) => return Err(format!("grid backend {b} disagrees with backend {backend}")),
        }
        let grid: GridConfig = serde_json::from_value(grid).map_err(|e| format!("grid: {e}"))?;
        grouppdo::group::build_grid(&grid).map_err(|e| e.to_string())?;
        if let Some((name, tol)) = file.tolerances.iter().find(|(_, t)| !(t.is_finite() && **t >= 0.0)) {
            return Err(format!(
                "tolerance `{name}` must be a finite non-negative number, got {tol}"
            ));
        }
        Ok(Config {
            raw,
            grid,
            tolerances: file.tolerances,
            seed: file.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_is_injected_into_grid() {
        let c = Config::parse(r#"{"backend": "cyclic", "grid": {"N": 8}}"#).unwrap();
        assert_eq!(c.grid.backend, Backend::Cyclic);
        assert_eq!(c.seed, 0);
        assert!(c.tolerances.is_empty());
    }

    #[test]
    fn rejects_conflicts_and_unknown_fields() {
        assert!(Config::parse(r#"{"backend": "affine", "grid": {"backend": "cyclic", "N": 8}}"#).is_err());
        assert!(Config::parse(r#"{"backend": "cyclic", "grid": {"N": 8}, "colour": 1}"#).is_err());
        assert!(Config::parse(r#"{"backend": "cyclic", "grid": {"N": 8}, "tolerances": {"parseval": -1}}"#).is_err());
        assert!(Config::parse("not json").is_err());
    }

    #[test]
    fn raw_text_is_kept() {
        let text =
            r#"{"backend": "cyclic", "grid": {"N": 8}, "tolerances": {"parseval": 1.0000000000000002e-12}, "seed": 3}"#;
        let c = Config::parse(text).unwrap();
        assert_eq!(c.raw.get(), text);
        assert_eq!(c.tolerances["parseval"], 1.0000000000000002e-12);
    }
}
