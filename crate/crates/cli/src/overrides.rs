//! `key=value` overrides applied to the parsed scenario document.

use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Splits `a.b.c=value`. The value is read as JSON when it parses as JSON
/// and as a plain string otherwise.
pub fn parse_override(text: &str) -> CliResult<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{text}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Replaces the value at a dotted path; every segment must already exist.
/// Numeric segments index into arrays.
pub fn apply_override(doc: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut slot = doc;
    for segment in key.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(segment),
            Value::Array(items) => segment.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::Config(format!("override key `{key}` does not exist in the scenario")))?;
    }
    *slot = value;
    Ok(())
}

/// Sets a top-level-or-nested key, creating the last segment if its parent
/// object exists. Used by dedicated flags such as `--seed`.
pub fn set_key(doc: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let (parent, last) = match key.rsplit_once('.') {
        Some((p, l)) => (Some(p), l),
        None => (None, key),
    };
    let mut slot = doc;
    if let Some(p) = parent {
        for segment in p.split('.') {
            slot = slot
                .get_mut(segment)
                .ok_or_else(|| CliError::Config(format!("scenario has no `{p}` section")))?;
        }
    }
    match slot {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("cannot set `{key}` in the scenario"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_json_and_strings() {
        assert_eq!(parse_override("a.b=0.5").unwrap(), ("a.b".into(), json!(0.5)));
        assert_eq!(parse_override("a=[1,2]").unwrap(), ("a".into(), json!([1, 2])));
        assert_eq!(parse_override("name=demo").unwrap(), ("name".into(), json!("demo")));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("=3").is_err());
    }

    #[test]
    fn overrides_need_existing_keys() {
        let mut doc = json!({"scenario": {"step": 0.1, "u0": [0.0, 1.0]}});
        apply_override(&mut doc, "scenario.step", json!(0.01)).unwrap();
        apply_override(&mut doc, "scenario.u0.1", json!(2.0)).unwrap();
        assert_eq!(doc, json!({"scenario": {"step": 0.01, "u0": [0.0, 2.0]}}));
        assert!(apply_override(&mut doc, "scenario.stepp", json!(1)).is_err());
        assert!(apply_override(&mut doc, "scenario.u0.5", json!(1)).is_err());
        assert!(apply_override(&mut doc, "scenario.step.x", json!(1)).is_err());
    }

    #[test]
    fn set_key_creates_leaf() {
        let mut doc = json!({"scenario": {}});
        set_key(&mut doc, "seed", json!(7)).unwrap();
        set_key(&mut doc, "scenario.paths", json!(3)).unwrap();
        assert_eq!(doc, json!({"seed": 7, "scenario": {"paths": 3}}));
        assert!(set_key(&mut doc, "missing.paths", json!(3)).is_err());
    }
}
