//! TOML configuration. Each subcommand reads the table of the same name;
//! keys are long flag names without the leading dashes. A key is ignored
//! when the same flag is given on the command line.

use std::ffi::OsString;
use std::path::Path;

use toml::Value;

use crate::error::CliError;

const GLOBAL_WITH_VALUE: [&str; 2] = ["--config", "--jobs"];

/// Position of the subcommand in `args` and the `--config` path, if any.
fn scan(args: &[OsString]) -> (Option<usize>, Option<OsString>) {
    let mut config = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(OsString::from(v));
        } else if a == "--config" {
            config = args.get(i + 1).cloned();
            i += 1;
        } else if GLOBAL_WITH_VALUE.contains(&a.as_ref()) {
            i += 1;
        } else if !a.starts_with('-') {
            return (Some(i), config);
        }
        i += 1;
    }
    (None, config)
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        _ => Err(CliError::parameter(
            "config",
            format!("key '{key}' must be a string, number, boolean or array"),
        )),
    }
}

/// Flags for one subcommand table.
fn table_args(table: &toml::Table, user: &[OsString]) -> Result<Vec<OsString>, CliError> {
    let given = |flag: &str| {
        user.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{key}");
        if given(&flag) {
            continue;
        }
        match value {
            Value::Boolean(true) => out.push(flag.into()),
            Value::Boolean(false) => {}
            Value::Array(items) if key == "in" => {
                for item in items {
                    out.push(flag.clone().into());
                    out.push(scalar(key, item)?.into());
                }
            }
            Value::Array(items) => {
                let joined = items
                    .iter()
                    .map(|v| scalar(key, v))
                    .collect::<Result<Vec<_>, _>>()?
                    .join(",");
                out.push(flag.into());
                out.push(joined.into());
            }
            v => {
                out.push(flag.into());
                out.push(scalar(key, v)?.into());
            }
        }
    }
    Ok(out)
}

/// Inserts the flags from the configuration file right after the
/// subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let (sub, config) = scan(&args);
    let (Some(sub), Some(path)) = (sub, config) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::input("unreadable-input", format!("{}: {e}", Path::new(&path).display())))?;
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::parameter("config", e.message().to_string()))?;
    let name = args[sub].to_string_lossy().into_owned();
    let Some(section) = doc.get(&name) else {
        return Ok(args);
    };
    let table = section
        .as_table()
        .ok_or_else(|| CliError::parameter("config", format!("'{name}' must be a table")))?;
    let injected = table_args(table, &args[sub + 1..])?;
    let mut out = args[..=sub].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub + 1..]);
    Ok(out)
}
