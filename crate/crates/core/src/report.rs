//! Deterministic JSON reports: fixed-precision numbers, the case content hash
//! and the toolkit version.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::netmodel::NetworkCase;

pub const TOOLKIT: &str = "gridshape";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the case's canonical serialization, independent of formatting.
pub fn case_hash(case: &NetworkCase) -> String {
    sha256_hex(&serde_json::to_vec(case).expect("case serializes"))
}

pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let text = format!("{:.*e}", digits.saturating_sub(1), x);
    text.parse().unwrap_or(x)
}

/// Rounds every float in a JSON tree to `digits` significant digits.
pub fn round_value(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                let r = round_sig(x, digits);
                // -0.0 is printed without a sign so reports stay byte-stable
                let r = if r == 0.0 { 0.0 } else { r };
                if let Some(num) = serde_json::Number::from_f64(r) {
                    *n = num;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_value(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_value(x, digits)),
        _ => {}
    }
}

/// Serializes, rounds and wraps a report body with its metadata.
pub fn envelope<T: Serialize>(kind: &str, case_hash: Option<&str>, body: &T) -> Result<Value> {
    let mut value = serde_json::to_value(body).map_err(|e| Error::InvalidInput(e.to_string()))?;
    round_value(&mut value, SIGNIFICANT_DIGITS);
    let mut meta = Map::new();
    meta.insert("toolkit".into(), Value::from(TOOLKIT));
    meta.insert("version".into(), Value::from(VERSION));
    meta.insert("report".into(), Value::from(kind));
    if let Some(h) = case_hash {
        meta.insert("case_hash".into(), Value::from(h));
    }
    let mut root = Map::new();
    root.insert("meta".into(), Value::Object(meta));
    root.insert("result".into(), value);
    Ok(Value::Object(root))
}

pub fn to_pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("json value serializes")
}
