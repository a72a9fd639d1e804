//! Run configuration. The text form is flat `key = value` lines with dotted
//! sections:
//!
//! ```text
//! seed = 7
//! n = 20000
//! disorder.kind = binary
//! excursion.kind = srw
//! excursion.m_max = 200000
//! grid.beta = [0.25, 0.5, 1]
//! grid.h = 0
//! output.format = csv
//! ```
//!
//! Lists are written in brackets or as bare comma lists; `#` starts a comment
//! line. A file whose first non-blank character is `{` is read as JSON.

use std::path::{Path, PathBuf};

use copolymer::{DisorderModel, ExcursionLaw, LawSpec};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Either::deserialize(d)? {
        Either::One(x) => vec![x],
        Either::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default = "Grid::default_beta", deserialize_with = "one_or_many")]
    pub beta: Vec<f64>,
    #[serde(default = "Grid::default_h", deserialize_with = "one_or_many")]
    pub h: Vec<f64>,
    #[serde(default = "Grid::default_g", deserialize_with = "one_or_many")]
    pub g: Vec<f64>,
    #[serde(default = "Grid::default_alpha", deserialize_with = "one_or_many")]
    pub alpha: Vec<f64>,
}

impl Grid {
    fn default_beta() -> Vec<f64> {
        vec![1.0]
    }
    fn default_h() -> Vec<f64> {
        vec![0.0]
    }
    fn default_g() -> Vec<f64> {
        vec![0.3]
    }
    fn default_alpha() -> Vec<f64> {
        vec![1.5]
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid { beta: Self::default_beta(), h: Self::default_h(), g: Self::default_g(), alpha: Self::default_alpha() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Mass allowed outside the excursion window of the generating function.
    #[serde(default = "Tolerances::default_eps_tail")]
    pub eps_tail: f64,
    /// A point is localized when `ĝ > eps_fe · stderr`.
    #[serde(default = "Tolerances::default_eps_fe")]
    pub eps_fe: f64,
}

impl Tolerances {
    fn default_eps_tail() -> f64 {
        1e-8
    }
    fn default_eps_fe() -> f64 {
        10.0
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps_tail: Self::default_eps_tail(), eps_fe: Self::default_eps_fe() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "Output::default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Output {
    fn default_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl Default for Output {
    fn default() -> Self {
        Output { dir: Self::default_dir(), format: Format::Csv }
    }
}

fn default_disorder() -> DisorderModel {
    DisorderModel::Binary
}
fn default_excursion() -> LawSpec {
    LawSpec::Srw { m_max: copolymer::excursions::DEFAULT_M_MAX }
}
fn default_n() -> usize {
    20_000
}
fn default_replicas() -> usize {
    32
}
fn default_paths() -> usize {
    20
}
fn default_excursions() -> usize {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory: there is no clock-based default.
    pub seed: u64,
    #[serde(default = "default_disorder")]
    pub disorder: DisorderModel,
    #[serde(default = "default_excursion")]
    pub excursion: LawSpec,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_paths")]
    pub paths_per_replica: usize,
    /// Excursion count of the generating function.
    #[serde(default = "default_excursions")]
    pub excursions: usize,
    /// Cap on excursion lengths in the renewal recursion; unset keeps all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Output,
}

impl RunConfig {
    /// The smallest valid configuration.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<ExcursionLaw, CliError> {
        self.disorder.validate()?;
        let law = self.excursion.build()?;
        if self.n == 0 || self.replicas < 2 || self.paths_per_replica == 0 || self.excursions < 4 {
            return Err(CliError::Config(
                "need n ≥ 1, replicas ≥ 2, paths_per_replica ≥ 1 and excursions ≥ 4".into(),
            ));
        }
        let grid = &self.grid;
        for (name, v) in [("beta", &grid.beta), ("h", &grid.h), ("g", &grid.g), ("alpha", &grid.alpha)] {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(CliError::Config(format!("grid.{name} must be a nonempty list of finite numbers")));
            }
        }
        if grid.beta.iter().any(|b| *b < 0.0) {
            return Err(CliError::Config("grid.beta must be nonnegative".into()));
        }
        if !(self.tolerances.eps_tail > 0.0 && self.tolerances.eps_fe > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        Ok(law)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            parse_key_values(text)?
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_key_values(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        let mut out = String::new();
        for (k, v) in lines {
            out.push_str(&k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

fn render_scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        Value::Array(a) => format!("[{}]", a.iter().map(render_scalar).collect::<Vec<_>>().join(", ")),
        Value::Object(_) => unreachable!("objects are flattened"),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            // `kind` first so the section reads naturally
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_by_key(|k| (k.as_str() != "kind", k.as_str()));
            for k in keys {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, &map[k], out);
            }
        }
        Value::Null => {}
        other => out.push((prefix.to_string(), render_scalar(other))),
    }
}

fn parse_scalar(s: &str) -> Value {
    let s = s.trim();
    if let Ok(u) = s.parse::<u64>() {
        return Value::Number(u.into());
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::Number(i.into());
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::String(s.trim_matches('"').to_string()),
    }
}

fn parse_value(s: &str) -> Value {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        if inner.trim().is_empty() {
            return Value::Array(vec![]);
        }
        return Value::Array(inner.split(',').map(parse_scalar).collect());
    }
    if s.contains(',') {
        return Value::Array(s.split(',').map(parse_scalar).collect());
    }
    parse_scalar(s)
}

fn parse_key_values(text: &str) -> Result<Value, CliError> {
    let mut root = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let parts: Vec<&str> = key.trim().split('.').map(str::trim).collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("line {}: empty key segment", lineno + 1)));
        }
        let mut map = &mut root;
        for p in &parts[..parts.len() - 1] {
            let entry = map.entry(p.to_string()).or_insert_with(|| Value::Object(Map::new()));
            map = entry
                .as_object_mut()
                .ok_or_else(|| CliError::Config(format!("line {}: `{p}` is both a value and a section", lineno + 1)))?;
        }
        let last = parts[parts.len() - 1].to_string();
        if map.insert(last.clone(), parse_value(value)).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{}`", lineno + 1, key.trim())));
        }
    }
    Ok(Value::Object(root))
}
