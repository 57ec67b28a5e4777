//! Suite configuration: a key/value text format with sections, or JSON.
//!
//! ```text
//! # global keys come first
//! seed = 7
//!
//! [sphere-curvature]
//! op = curvdim
//! space = sphere
//! n = 12
//! eps = 0.4, 0.2, 0.1, 0.05
//! ```
//!
//! Every `[name]` section is one experiment and needs an `op` key. Values
//! run to the end of the line; `#` starts a comment only at the beginning
//! of a line. The JSON form is
//! `{"seed": 7, "experiments": [{"name": "...", "op": "...", ...}]}` with
//! scalar or array parameter values.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::Value;
use thiserror::Error;

use crate::ops::Op;

/// Position of a configuration error, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}{message}", span.map(|s| format!("{s}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub span: Option<Span>,
    pub message: String,
}

impl ConfigError {
    pub fn at(span: Span, message: impl Into<String>) -> Self {
        ConfigError {
            span: Some(span),
            message: message.into(),
        }
    }

    pub fn bare(message: impl Into<String>) -> Self {
        ConfigError {
            span: None,
            message: message.into(),
        }
    }
}

/// A parameter value with the place it was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: String,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub op: Op,
    pub params: BTreeMap<String, Param>,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteConfig {
    pub seed: u64,
    pub experiments: Vec<ExperimentConfig>,
}

const GLOBAL_KEYS: &[&str] = &["seed"];

/// Closest candidates to `word`, for error messages.
pub fn suggest(word: &str, candidates: &[&str]) -> String {
    let mut close: Vec<(usize, &str)> = candidates
        .iter()
        .map(|c| (strsim::levenshtein(word, c), *c))
        .filter(|(d, c)| *d <= 3 || c.starts_with(word) || word.starts_with(c))
        .collect();
    close.sort();
    let names: Vec<&str> = candidates.to_vec();
    match close.first() {
        Some((_, c)) => format!("did you mean `{c}`? known: {}", names.join(", ")),
        None => format!("known: {}", names.join(", ")),
    }
}

/// Parses either format; text starting with `{` is read as JSON.
pub fn parse_config(text: &str) -> Result<SuiteConfig, ConfigError> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_text(text)
    }
}

fn col_of(line: &str, part: &str) -> usize {
    // `part` is a subslice of `line`
    let off = part.as_ptr() as usize - line.as_ptr() as usize;
    line[..off].chars().count() + 1
}

struct Section {
    name: String,
    span: Span,
    op: Option<(Op, Span)>,
    params: BTreeMap<String, Param>,
}

fn finish(sec: Section) -> Result<ExperimentConfig, ConfigError> {
    let Some((op, _)) = sec.op else {
        return Err(ConfigError::at(
            sec.span,
            format!("experiment `{}` has no `op` key", sec.name),
        ));
    };
    Ok(ExperimentConfig {
        name: sec.name,
        op,
        params: sec.params,
        span: Some(sec.span),
    })
}

pub fn parse_text(text: &str) -> Result<SuiteConfig, ConfigError> {
    let mut suite = SuiteConfig::default();
    let mut seen_seed = false;
    let mut current: Option<Section> = None;
    let mut names = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        let body = line.trim_start();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let start = col_of(line, body);
        if let Some(rest) = body.strip_prefix('[') {
            let Some(inner) = rest.strip_suffix(']') else {
                return Err(ConfigError::at(
                    Span {
                        line: line_no,
                        column: start,
                    },
                    "section header must end with `]`",
                ));
            };
            let name = inner.trim();
            let valid = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.');
            if !valid {
                return Err(ConfigError::at(
                    Span {
                        line: line_no,
                        column: start + 1,
                    },
                    format!("bad experiment name `{name}` (letters, digits, `-`, `_`, `.`)"),
                ));
            }
            let span = Span {
                line: line_no,
                column: start,
            };
            if let Some(prev) = names.insert(name.to_string(), span) {
                return Err(ConfigError::at(
                    span,
                    format!("experiment `{name}` already defined at {prev}"),
                ));
            }
            if let Some(sec) = current.take() {
                suite.experiments.push(finish(sec)?);
            }
            current = Some(Section {
                name: name.to_string(),
                span,
                op: None,
                params: BTreeMap::new(),
            });
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::at(
                Span {
                    line: line_no,
                    column: start,
                },
                "expected `key = value` or `[section]`",
            ));
        };
        let key = k.trim();
        let value = v.trim();
        let key_span = Span {
            line: line_no,
            column: start,
        };
        let value_span = Span {
            line: line_no,
            column: if value.is_empty() {
                col_of(line, v) + v.chars().count()
            } else {
                col_of(line, value)
            },
        };
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ConfigError::at(key_span, format!("bad key `{key}`")));
        }
        match current.as_mut() {
            None => match key {
                "seed" => {
                    if seen_seed {
                        return Err(ConfigError::at(key_span, "duplicate key `seed`"));
                    }
                    seen_seed = true;
                    suite.seed = value.parse().map_err(|_| {
                        ConfigError::at(
                            value_span,
                            format!("seed must be an unsigned integer, got `{value}`"),
                        )
                    })?;
                }
                other => {
                    return Err(ConfigError::at(
                        key_span,
                        format!(
                            "unknown global key `{other}`; {}",
                            suggest(other, GLOBAL_KEYS)
                        ),
                    ))
                }
            },
            Some(sec) => {
                if key == "op" {
                    if sec.op.is_some() {
                        return Err(ConfigError::at(key_span, "duplicate key `op`"));
                    }
                    let op = value
                        .parse::<Op>()
                        .map_err(|m| ConfigError::at(value_span, m))?;
                    sec.op = Some((op, value_span));
                } else {
                    let param = Param {
                        value: value.to_string(),
                        span: Some(value_span),
                    };
                    if sec.params.insert(key.to_string(), param).is_some() {
                        return Err(ConfigError::at(key_span, format!("duplicate key `{key}`")));
                    }
                }
            }
        }
    }
    if let Some(sec) = current.take() {
        suite.experiments.push(finish(sec)?);
    }
    Ok(suite)
}

/// Line and column of the first occurrence of `needle`, for JSON errors.
fn locate(text: &str, needle: &str) -> Option<Span> {
    let off = text.find(needle)?;
    let before = &text[..off];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Some(Span { line, column })
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        // nested arrays become `;`-separated rows
        Value::Array(items) if items.iter().any(Value::is_array) => items
            .iter()
            .map(|x| if x.is_array() { scalar_string(x) } else { None })
            .collect::<Option<Vec<_>>>()
            .map(|rows| rows.join("; ")),
        Value::Array(items) => items
            .iter()
            .map(scalar_string)
            .collect::<Option<Vec<_>>>()
            .map(|p| p.join(", ")),
        _ => None,
    }
}

pub fn parse_json(text: &str) -> Result<SuiteConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        ConfigError::at(
            Span {
                line: e.line(),
                column: e.column(),
            },
            format!("invalid JSON: {e}"),
        )
    })?;
    let Value::Object(map) = root else {
        return Err(ConfigError::at(
            Span { line: 1, column: 1 },
            "top level must be an object",
        ));
    };
    let mut suite = SuiteConfig::default();
    for (k, v) in &map {
        match k.as_str() {
            "seed" => {
                suite.seed = v.as_u64().ok_or_else(|| ConfigError {
                    span: locate(text, "\"seed\""),
                    message: "seed must be an unsigned integer".into(),
                })?
            }
            "experiments" => {}
            other => {
                return Err(ConfigError {
                    span: locate(text, &format!("\"{other}\"")),
                    message: format!(
                        "unknown global key `{other}`; {}",
                        suggest(other, &["seed", "experiments"])
                    ),
                })
            }
        }
    }
    let exps = match map.get("experiments") {
        None => Vec::new(),
        Some(Value::Array(a)) => a.clone(),
        Some(_) => {
            return Err(ConfigError {
                span: locate(text, "\"experiments\""),
                message: "`experiments` must be an array".into(),
            })
        }
    };
    let mut names = BTreeMap::new();
    for (i, e) in exps.iter().enumerate() {
        let Value::Object(obj) = e else {
            return Err(ConfigError::bare(format!(
                "experiment {i} must be an object"
            )));
        };
        let name = match obj.get("name") {
            Some(Value::String(s)) => s.clone(),
            None => format!("experiment-{i}"),
            Some(_) => {
                return Err(ConfigError::bare(format!(
                    "experiment {i}: `name` must be a string"
                )))
            }
        };
        if names.insert(name.clone(), i).is_some() {
            return Err(ConfigError {
                span: locate(text, &format!("\"{name}\"")),
                message: format!("experiment `{name}` defined twice"),
            });
        }
        let op_text = match obj.get("op") {
            Some(Value::String(s)) => s.clone(),
            _ => {
                return Err(ConfigError::bare(format!(
                    "experiment `{name}` has no string `op`"
                )))
            }
        };
        let op = op_text.parse::<Op>().map_err(|m| ConfigError {
            span: locate(text, &format!("\"{op_text}\"")),
            message: m,
        })?;
        let mut params = BTreeMap::new();
        for (k, v) in obj {
            if k == "name" || k == "op" {
                continue;
            }
            let value = scalar_string(v).ok_or_else(|| ConfigError {
                span: locate(text, &format!("\"{k}\"")),
                message: format!("parameter `{k}` must be a string, number, boolean or array"),
            })?;
            params.insert(
                k.clone(),
                Param {
                    value,
                    span: locate(text, &format!("\"{k}\"")),
                },
            );
        }
        suite.experiments.push(ExperimentConfig {
            name,
            op,
            params,
            span: None,
        });
    }
    Ok(suite)
}
