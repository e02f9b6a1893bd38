//! Shared plumbing for the command-line front end: config-file merging with
//! flag precedence, deterministic number formatting, grid parsing, and
//! artifact output.
//!
//! Reproducibility contract: every artifact embeds its fully resolved
//! parameters (JSON artifacts under a `config` key, CSV artifacts as a
//! leading `# config: {...}` comment line), reals are printed with 17 digits
//! after the decimal point in scientific notation (exact double round-trip),
//! and object keys are emitted in sorted order, so identical configs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;
use wiggly::{ConvexDrive, PeriodicPotential};

use crate::errors::CliError;

/// Merged parameter source: an optional flat JSON config file overlaid by
/// explicit command-line flags (flags win). Every lookup consumes its key,
/// so leftover keys can be rejected as unknown at the end of resolution.
pub struct ConfigSource {
    entries: BTreeMap<String, Value>,
}

impl ConfigSource {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let entries = match path {
            None => BTreeMap::new(),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config file {}: {e}", path.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("config file {} is not valid JSON: {e}", path.display()))
                })?;
                match value {
                    Value::Object(map) => map.into_iter().collect(),
                    _ => {
                        return Err(CliError::Config(format!(
                            "config file {} must hold a flat JSON object",
                            path.display()
                        )))
                    }
                }
            }
        };
        Ok(Self { entries })
    }

    pub fn f64(&mut self, key: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        let file = self.entries.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match file {
            None => Ok(None),
            Some(Value::Number(n)) => n.as_f64().map(Some).ok_or_else(|| {
                CliError::Config(format!("config key {key:?} is not representable as a double"))
            }),
            Some(other) => {
                Err(CliError::Config(format!("config key {key:?} must be a number, got {other}")))
            }
        }
    }

    pub fn require_f64(&mut self, key: &str, flag: Option<f64>) -> Result<f64, CliError> {
        self.f64(key, flag)?.ok_or_else(|| {
            CliError::Config(format!("missing parameter {key:?}: pass --{key} or a config key"))
        })
    }

    pub fn u64(&mut self, key: &str, flag: Option<u64>) -> Result<Option<u64>, CliError> {
        let file = self.entries.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match file {
            None => Ok(None),
            Some(Value::Number(n)) => n.as_u64().map(Some).ok_or_else(|| {
                CliError::Config(format!("config key {key:?} must be a nonnegative integer"))
            }),
            Some(other) => Err(CliError::Config(format!(
                "config key {key:?} must be a nonnegative integer, got {other}"
            ))),
        }
    }

    pub fn usize(&mut self, key: &str, flag: Option<usize>) -> Result<Option<usize>, CliError> {
        Ok(self.u64(key, flag.map(|n| n as u64))?.map(|n| n as usize))
    }

    pub fn require_usize(&mut self, key: &str, flag: Option<usize>) -> Result<usize, CliError> {
        self.usize(key, flag)?.ok_or_else(|| {
            CliError::Config(format!("missing parameter {key:?}: pass --{key} or a config key"))
        })
    }

    pub fn string(&mut self, key: &str, flag: Option<&str>) -> Result<Option<String>, CliError> {
        let file = self.entries.remove(key);
        if let Some(s) = flag {
            return Ok(Some(s.to_owned()));
        }
        match file {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => {
                Err(CliError::Config(format!("config key {key:?} must be a string, got {other}")))
            }
        }
    }

    pub fn string_or(
        &mut self,
        key: &str,
        flag: Option<&str>,
        default: &str,
    ) -> Result<String, CliError> {
        Ok(self.string(key, flag)?.unwrap_or_else(|| default.to_owned()))
    }

    /// A list of reals, given either as a comma-separated flag value or as a
    /// JSON array (or comma-separated string) in the config file.
    pub fn f64_list(&mut self, key: &str, flag: Option<&str>) -> Result<Option<Vec<f64>>, CliError> {
        let file = self.entries.remove(key);
        let parse_csv = |text: &str| -> Result<Vec<f64>, CliError> {
            text.split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        CliError::Config(format!("bad number {s:?} in {key:?} list: {e}"))
                    })
                })
                .collect()
        };
        if let Some(text) = flag {
            return parse_csv(text).map(Some);
        }
        match file {
            None => Ok(None),
            Some(Value::String(s)) => parse_csv(&s).map(Some),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        CliError::Config(format!("config key {key:?} must list numbers, got {v}"))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
                .map(Some),
            Some(other) => Err(CliError::Config(format!(
                "config key {key:?} must be an array of numbers or a comma-separated string, got {other}"
            ))),
        }
    }

    /// A config file may carry a `command` key (as written into every
    /// artifact); it must then match the subcommand actually invoked.
    pub fn expect_command(&mut self, name: &str) -> Result<(), CliError> {
        match self.entries.remove("command") {
            None => Ok(()),
            Some(Value::String(s)) if s == name => Ok(()),
            Some(Value::String(s)) => Err(CliError::Config(format!(
                "config file is for command {s:?} but {name:?} was invoked"
            ))),
            Some(other) => {
                Err(CliError::Config(format!("config key \"command\" must be a string, got {other}")))
            }
        }
    }

    /// Rejects any key no command consumed.
    pub fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.entries.keys().next() {
            return Err(CliError::Config(format!("unknown config key {key:?}")));
        }
        Ok(())
    }
}

/// The fully resolved parameter set embedded in every artifact. Delivery
/// knobs that cannot change the bytes of the computed content (`out`,
/// `threads`) are deliberately excluded.
pub struct ResolvedConfig {
    map: BTreeMap<String, Value>,
}

impl ResolvedConfig {
    pub fn new(command: &str) -> Self {
        let mut map = BTreeMap::new();
        map.insert("command".to_owned(), Value::String(command.to_owned()));
        Self { map }
    }

    pub fn f64(mut self, key: &str, value: f64) -> Self {
        self.map.insert(key.to_owned(), serde_json::json!(value));
        self
    }

    pub fn u64(mut self, key: &str, value: u64) -> Self {
        self.map.insert(key.to_owned(), serde_json::json!(value));
        self
    }

    pub fn str(mut self, key: &str, value: &str) -> Self {
        self.map.insert(key.to_owned(), Value::String(value.to_owned()));
        self
    }

    pub fn f64_list(mut self, key: &str, values: &[f64]) -> Self {
        self.map.insert(key.to_owned(), serde_json::json!(values));
        self
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.map.into_iter().collect())
    }
}

/// Deterministic JSON encoding: floats as `{:.17e}` (exact double
/// round-trip), integers plain, object keys in sorted order.
pub fn json17(value: &Value) -> String {
    let mut out = String::new();
    render(value, &mut out);
    out
}

fn render(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_f64(n.as_f64().expect("numbers are i64, u64, or f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"))
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                render(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                render(&map[key.as_str()], out);
            }
            out.push('}');
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

/// Parses a `lo:hi:n` grid: `n` points linearly spaced from `lo` to `hi`
/// inclusive (`n = 1` means just `lo`).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("grid {text:?} must have the form lo:hi:n")));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid start in {text:?}: {e}")))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid end in {text:?}: {e}")))?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid count in {text:?}: {e}")))?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::Config(format!("grid {text:?} needs finite lo <= hi")));
    }
    if n == 0 || n > 1_000_000 {
        return Err(CliError::Config(format!(
            "grid {text:?} needs between 1 and 1000000 points, got {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Resolves an oscillation profile: a builtin name (`pwq`, `cosine`, `zero`)
/// or the path of a JSON file `{"kind": "...", "values": [...]}`.
pub fn resolve_profile(name: &str) -> Result<PeriodicPotential, CliError> {
    if let Some(w) = PeriodicPotential::by_name(name) {
        return Ok(w);
    }
    let path = Path::new(name);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read potential file {}: {e}", path.display()))
        })?;
        return Ok(PeriodicPotential::from_json(&text)?);
    }
    Err(CliError::Config(format!(
        "unknown oscillation profile {name:?}: use pwq, cosine, zero, or the path of a JSON profile"
    )))
}

/// Resolves a drive: `quadratic` or `poly:c0,c1,c2,...`.
pub fn resolve_drive(name: &str) -> Result<ConvexDrive, CliError> {
    Ok(ConvexDrive::by_name(name)?)
}

/// Writes the artifact to `out`, or to standard output when no path is set.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
