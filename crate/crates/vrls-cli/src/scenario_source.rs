//! Scenario resolution for the CLI: built-in name or file path, with
//! environment overrides for every configuration key.
//!
//! Any variable named `VRLS_SCENARIO__<PATH>` overrides the corresponding
//! key before validation, with `__` separating nesting levels, e.g.
//! `VRLS_SCENARIO__POOL__N_SUBFRAMES=5` or
//! `VRLS_SCENARIO__CHANNEL__KIND=scd`. Values parse as TOML and fall back
//! to strings. Unknown keys fail validation, as in scenario files.

use vrls_sim::scenario::{builtin_scenario, BuiltinScenario, ScenarioConfig};

use crate::CliError;

pub const ENV_OVERRIDE_PREFIX: &str = "VRLS_SCENARIO__";

pub fn load_scenario(spec: &str) -> Result<ScenarioConfig, CliError> {
    let text = match BuiltinScenario::parse(spec) {
        Ok(builtin) => builtin_scenario(builtin).to_toml_string(),
        Err(_) => {
            let path = std::path::Path::new(spec);
            std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!(
                    "scenario {spec:?} is neither a built-in name (mcd, mcd_nofade, scd_i, \
                     scd_ii, scd_iii) nor a readable file: {e}"
                ))
            })?
        }
    };
    let mut value: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("scenario parse error: {e}")))?;
    let overrides: Vec<(String, String)> = std::env::vars()
        .filter(|(k, _)| k.starts_with(ENV_OVERRIDE_PREFIX))
        .collect();
    apply_overrides(&mut value, &overrides)?;
    let config: ScenarioConfig = value
        .try_into()
        .map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn apply_overrides(
    value: &mut toml::Value,
    overrides: &[(String, String)],
) -> Result<(), CliError> {
    for (key, raw) in overrides {
        let path: Vec<String> = key[ENV_OVERRIDE_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_lowercase())
            .collect();
        if path.iter().any(String::is_empty) {
            return Err(CliError::Config(format!("malformed override {key}")));
        }
        let mut node = &mut *value;
        for segment in &path[..path.len() - 1] {
            let table = node.as_table_mut().ok_or_else(|| {
                CliError::Config(format!("{key}: {segment} is not a table"))
            })?;
            node = table
                .entry(segment.clone())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let leaf = path.last().expect("non-empty path");
        let parsed = parse_toml_value(raw);
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: parent is not a table")))?;
        table.insert(leaf.clone(), parsed);
    }
    Ok(())
}

/// Parses an override value as a TOML literal; bare words become strings.
fn parse_toml_value(raw: &str) -> toml::Value {
    let attempt: Result<toml::Value, _> = toml::from_str(&format!("v = {raw}"));
    match attempt {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("assigned above"),
        _ => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_resolve() {
        let sc = load_scenario("scd_ii").unwrap();
        assert_eq!(sc.pool.n_subchannels, 10);
    }

    #[test]
    fn unknown_name_is_a_config_error() {
        assert!(load_scenario("nope_not_a_scenario").is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut value: toml::Value =
            toml::from_str(&builtin_scenario(BuiltinScenario::ScdI).to_toml_string()).unwrap();
        apply_overrides(
            &mut value,
            &[
                ("VRLS_SCENARIO__POOL__N_SUBFRAMES".into(), "5".into()),
                ("VRLS_SCENARIO__SEED".into(), "42".into()),
            ],
        )
        .unwrap();
        let cfg: ScenarioConfig = value.try_into().unwrap();
        let cfg = cfg.validate().unwrap();
        assert_eq!(cfg.pool.n_subframes, 5);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn override_of_unknown_key_fails_closed() {
        let mut value: toml::Value =
            toml::from_str(&builtin_scenario(BuiltinScenario::ScdI).to_toml_string()).unwrap();
        apply_overrides(
            &mut value,
            &[("VRLS_SCENARIO__NOT_A_FIELD".into(), "1".into())],
        )
        .unwrap();
        let result: Result<ScenarioConfig, _> = value.try_into();
        assert!(result.is_err(), "unknown key must be rejected");
    }
}
