//! Structured output shared by every bound computation.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// A computed bound together with everything needed to audit it.
///
/// `lower_bound` is clamped to `[0, 1]` for risk bounds (or `[0, ∞)` for
/// loss-scaled bounds); `vacuous` records that the raw value was not positive.
/// Maps are ordered so that serialized reports are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub family: String,
    pub lower_bound: f64,
    pub raw_value: f64,
    pub vacuous: bool,
    pub inputs: BTreeMap<String, Value>,
    pub intermediates: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

impl BoundReport {
    /// Report for a raw value, clamped to `[0, upper]`.
    pub fn new(family: impl Into<String>, raw_value: f64, upper: f64) -> Self {
        let lower_bound = if raw_value.is_nan() {
            0.0
        } else {
            raw_value.clamp(0.0, upper)
        };
        Self {
            family: family.into(),
            lower_bound,
            raw_value,
            vacuous: !(raw_value > 0.0),
            inputs: BTreeMap::new(),
            intermediates: BTreeMap::new(),
            warnings: Vec::new(),
            witness: None,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(key.to_string(), to_value(value));
        self
    }

    pub fn intermediate(mut self, key: &str, value: impl Serialize) -> Self {
        self.intermediates.insert(key.to_string(), to_value(value));
        self
    }

    pub fn warn(mut self, message: impl Into<String>) -> Self {
        self.warnings.push(message.into());
        self
    }

    pub fn with_witness(mut self, witness: impl Serialize) -> Self {
        self.witness = Some(to_value(witness));
        self
    }

    /// Reads back a numeric intermediate.
    pub fn get(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).and_then(Value::as_f64)
    }
}

/// Serializes to a JSON value. Non-finite floats become `null`; wrap values
/// that may be infinite with [`float`].
pub fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

/// A float as JSON, keeping infinities readable.
pub fn float(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}
