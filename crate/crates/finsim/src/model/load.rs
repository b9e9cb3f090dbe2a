use std::path::Path;

use serde_json::{Map, Value};

use super::presets::single_ray_document;
use super::{validate, RobotConfig};
use crate::error::{Error, Result};

/// Parse a robot document (TOML, or JSON when it starts with `{`), fill
/// missing fields from the single-ray preset and validate the result.
pub fn load_robot_config(text: &str) -> Result<RobotConfig> {
    let user = parse_document(text)?;
    let merged = merge_onto_defaults(user, &single_ray_document())?;
    let config = from_value::<RobotConfig>(merged)?;
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn load_robot_config_file(path: &Path) -> Result<RobotConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_robot_config(&text)
}

pub fn to_toml(config: &RobotConfig) -> String {
    toml::to_string(config).expect("robot config is always representable as TOML")
}

pub fn to_json(config: &RobotConfig) -> String {
    serde_json::to_string_pretty(config).expect("robot config is always representable as JSON")
}

/// Parse TOML or JSON text into a generic value tree.
pub(crate) fn parse_document(text: &str) -> Result<Value> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str::<Value>(text).map_err(|e| Error::Parse {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
            field: None,
        })
    } else {
        toml::from_str::<Value>(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unzip();
            Error::Parse {
                message: e.message().to_string(),
                line,
                column,
                field: None,
            }
        })
    }
}

/// Typed deserialisation that reports the offending field path.
pub(crate) fn from_value<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize::<_, T>(value).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            message: e.into_inner().to_string(),
            line: None,
            column: None,
            field: (path != ".").then_some(path),
        }
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Robot-level keys overlay the preset; each user fin overlays the preset's
/// first fin. A document without fins keeps an empty fin list.
fn merge_onto_defaults(user: Value, defaults: &Value) -> Result<Value> {
    let Value::Object(mut user) = user else {
        return Err(Error::parse("document root must be a table"));
    };
    let Value::Object(defaults) = defaults else {
        unreachable!("preset document is a table");
    };
    let template_fin = defaults
        .get("fins")
        .and_then(|f| f.as_array())
        .and_then(|f| f.first())
        .cloned()
        .unwrap_or(Value::Object(Map::new()));

    let fins = match user.remove("fins") {
        None => Vec::new(),
        Some(Value::Array(fins)) => fins
            .into_iter()
            .map(|fin| {
                let mut merged = template_fin.clone();
                deep_merge(&mut merged, fin);
                merged
            })
            .collect(),
        Some(_) => {
            return Err(Error::Parse {
                message: "expected an array of fin tables".into(),
                line: None,
                column: None,
                field: Some("fins".into()),
            })
        }
    };

    let mut merged = Value::Object(defaults.clone());
    deep_merge(&mut merged, Value::Object(user));
    merged
        .as_object_mut()
        .expect("merged root is a table")
        .insert("fins".into(), Value::Array(fins));
    Ok(merged)
}

fn deep_merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(base), Value::Object(overlay)) => {
            for (key, value) in overlay {
                match base.get_mut(&key) {
                    Some(slot) => deep_merge(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}
