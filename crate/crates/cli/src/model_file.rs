//! Model-spec JSON files. Level indices in files are 1-based.

use std::path::Path;

use anyhow::Context;
use mlz_core::{validate_model, DiabaticModel, Error, RawCoupling, RawModel};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub slope: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub i: usize,
    pub j: usize,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub levels: Vec<LevelSpec>,
    pub couplings: Vec<CouplingSpec>,
}

impl ModelSpec {
    /// Canonical form: couplings sorted by pair with i < j.
    pub fn from_model(model: &DiabaticModel) -> Self {
        let levels = model.slopes().iter().zip(model.offsets()).map(|(&slope, &offset)| LevelSpec { slope, offset }).collect();
        let couplings = model.couplings().map(|(i, j, g)| CouplingSpec { i: i + 1, j: j + 1, g }).collect();
        Self { levels, couplings }
    }
}

fn parse_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::ParseError { location: location.into(), message: message.into() }
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, Error> {
    v.as_object().ok_or_else(|| parse_error(path, "expected an object"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, Error> {
    v.as_array().ok_or_else(|| parse_error(path, "expected an array"))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<(), Error> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(parse_error(format!("{path}.{k}"), format!("unknown field, expected one of {allowed:?}"))),
        None => Ok(()),
    }
}

fn number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, Error> {
    let path = format!("{path}.{key}");
    obj.get(key).ok_or_else(|| parse_error(&path, "missing field"))?.as_f64().ok_or_else(|| parse_error(&path, "expected a number"))
}

fn level_index(obj: &Map<String, Value>, key: &str, path: &str, n: usize) -> Result<usize, Error> {
    let path = format!("{path}.{key}");
    let v = obj.get(key).ok_or_else(|| parse_error(&path, "missing field"))?;
    match v.as_u64() {
        Some(k) if k >= 1 && (k as usize) <= n => Ok(k as usize - 1),
        _ => Err(parse_error(&path, format!("expected a level index in 1..={n}, got {v}"))),
    }
}

/// Parses and validates model-spec JSON text. Syntax errors carry line and
/// column; schema and validation errors carry the offending field path.
pub fn parse_model_str(text: &str) -> anyhow::Result<DiabaticModel> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| parse_error(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    let top = object(&root, "$")?;
    check_keys(top, &["levels", "couplings"], "$")?;
    let levels = array(top.get("levels").ok_or_else(|| parse_error("$.levels", "missing field"))?, "$.levels")?;
    let mut raw = RawModel::default();
    for (k, lv) in levels.iter().enumerate() {
        let path = format!("$.levels[{k}]");
        let obj = object(lv, &path)?;
        check_keys(obj, &["slope", "offset"], &path)?;
        raw.slopes.push(number(obj, "slope", &path)?);
        raw.offsets.push(number(obj, "offset", &path)?);
    }
    let n = levels.len();
    let empty = Vec::new();
    let couplings = match top.get("couplings") {
        Some(v) => array(v, "$.couplings")?,
        None => &empty,
    };
    for (k, cv) in couplings.iter().enumerate() {
        let path = format!("$.couplings[{k}]");
        let obj = object(cv, &path)?;
        check_keys(obj, &["i", "j", "g", "im"], &path)?;
        let i = level_index(obj, "i", &path, n)?;
        let j = level_index(obj, "j", &path, n)?;
        let g = number(obj, "g", &path)?;
        let im = if obj.contains_key("im") { number(obj, "im", &path)? } else { 0.0 };
        raw.couplings.push(RawCoupling { i, j, g, im });
    }
    let pairs: Vec<(usize, usize)> = raw.couplings.iter().map(|c| (c.i.min(c.j), c.i.max(c.j))).collect();
    validate_model(raw).map_err(|e| {
        let culprit = match &e {
            Error::DegenerateSlopeCoupling { i, j, .. } | Error::NonRealCoupling { i, j, .. } => {
                pairs.iter().position(|&p| p == ((*i).min(*j), (*i).max(*j)))
            }
            Error::DuplicateCoupling { i, j } => pairs.iter().rposition(|&p| p == (*i, *j)),
            _ => None,
        };
        let path = culprit.map_or_else(|| "$".to_string(), |k| format!("$.couplings[{k}]"));
        anyhow::Error::new(e).context(path)
    })
}

pub fn parse_model_file(path: &Path) -> anyhow::Result<DiabaticModel> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_model_str(&text).with_context(|| format!("in {}", path.display()))
}

/// Compact JSON of the canonical model spec.
pub fn canonical_json(model: &DiabaticModel) -> String {
    serde_json::to_string(&ModelSpec::from_model(model)).expect("model spec serializes")
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn fingerprint(model: &DiabaticModel) -> String {
    hex::encode(Sha256::digest(canonical_json(model).as_bytes()))
}
