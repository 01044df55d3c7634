//! Option resolution: built-in defaults, then a TOML or JSON config file,
//! then command line flags. Flags win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{ToolError, ToolResult};
use crate::io;

/// Reads a config file as a JSON object. `.json` files are JSON, anything
/// else is TOML.
pub fn read_config(path: &Path) -> ToolResult<Map<String, Value>> {
    let text = io::read_text(path)?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| ToolError::parse(path, e))?
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| ToolError::parse(path, e))?;
        serde_json::to_value(t).map_err(|e| ToolError::parse(path, e))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(ToolError::parse(path, "config must be a table of options")),
    }
}

fn object(v: impl Serialize) -> ToolResult<Map<String, Value>> {
    match serde_json::to_value(v).map_err(|e| ToolError::usage(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(ToolError::usage("options must serialize to a table")),
    }
}

/// Layers `file` and then the non-null entries of `flags` over the defaults
/// of `T`.
pub fn resolve<T, F>(flags: &F, file: Option<Map<String, Value>>) -> ToolResult<T>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = object(T::default())?;
    // config keys use the same names as the flags, with dashes or underscores
    for (k, v) in file.unwrap_or_default() {
        merged.insert(k.replace('-', "_"), v);
    }
    for (k, v) in object(flags)? {
        if !v.is_null() && v != Value::Bool(false) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| ToolError::usage(format!("bad option: {e}")))
}

/// Thread count from the `ASF_THREADS` environment variable (default 1).
pub fn env_threads() -> ToolResult<usize> {
    match std::env::var("ASF_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ToolError::usage(format!("ASF_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Opts {
        count: usize,
        seed: u64,
        name: String,
        quiet: bool,
    }

    impl Default for Opts {
        fn default() -> Self {
            Opts {
                count: 10,
                seed: 1,
                name: "a".into(),
                quiet: false,
            }
        }
    }

    #[derive(Serialize)]
    struct Flags {
        count: Option<usize>,
        seed: Option<u64>,
        quiet: bool,
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"count": 5, "seed": 9, "name": "b"}"#).unwrap();
        let flags = Flags {
            count: Some(7),
            seed: None,
            quiet: true,
        };
        let o: Opts = resolve(&flags, Some(file)).unwrap();
        assert_eq!(
            o,
            Opts {
                count: 7,
                seed: 9,
                name: "b".into(),
                quiet: true
            }
        );
        let none = Flags {
            count: None,
            seed: None,
            quiet: false,
        };
        assert_eq!(resolve::<Opts, _>(&none, None).unwrap(), Opts::default());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"cuont": 5}"#).unwrap();
        let flags = Flags {
            count: None,
            seed: None,
            quiet: false,
        };
        let e = resolve::<Opts, _>(&flags, Some(file)).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn toml_files_are_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "count = 3\nmax-order = 4\n").unwrap();
        let m = read_config(&p).unwrap();
        assert_eq!(m["count"], Value::from(3));
        assert_eq!(m["max-order"], Value::from(4));
    }
}
