//! Runtime values carried by messages and bound by protocol variables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::protocol::IndexTerm;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Array(Vec<Value>),
}

impl Value {
    /// Literal index term denoting this value.
    pub fn to_term(&self) -> IndexTerm {
        match self {
            Value::Int(n) => IndexTerm::Int(*n),
            Value::Float(x) => IndexTerm::Float(*x),
            Value::Array(items) => IndexTerm::Array(items.iter().map(Value::to_term).collect()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(items) => Some(items),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Array(_) => "array",
        }
    }

    /// True when every nested array has elements of one shape.
    pub fn is_homogeneous(&self) -> bool {
        match self {
            Value::Array(items) => {
                items.iter().all(Value::is_homogeneous) && items.windows(2).all(|w| w[0].same_shape(&w[1]))
            }
            _ => true,
        }
    }

    fn same_shape(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(_), Value::Int(_)) | (Value::Float(_), Value::Float(_)) => true,
            (Value::Array(a), Value::Array(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y)),
            _ => false,
        }
    }

    /// Equality that distinguishes float bit patterns (so `-0.0 != 0.0` and NaN equals itself).
    pub fn bit_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Array(a), Value::Array(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.bit_eq(y)),
            _ => false,
        }
    }

    /// Short form used in traces: `int(5)`, `float(0.5)`, `array(3)`.
    pub fn describe(&self) -> String {
        match self {
            Value::Int(n) => format!("int({n})"),
            Value::Float(x) => format!("float({x:?})"),
            Value::Array(items) => format!("array({})", items.len()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Int(n) => serde_json::Value::from(*n),
            Value::Float(x) => {
                serde_json::Number::from_f64(*x).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
            }
            Value::Array(items) => serde_json::Value::Array(items.iter().map(Value::to_json).collect()),
        }
    }

    /// Integers map to `Int`, other numbers to `Float`, arrays recursively.
    pub fn from_json(v: &serde_json::Value) -> Option<Value> {
        match v {
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Some(Value::Int(i)),
                None => n.as_f64().map(Value::Float),
            },
            serde_json::Value::Array(items) => {
                let items = items.iter().map(Value::from_json).collect::<Option<Vec<_>>>()?;
                let v = Value::Array(items);
                v.is_homogeneous().then_some(v)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Variable environment. Always binds `size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    vars: BTreeMap<String, Value>,
}

impl Env {
    pub fn new(size: i64) -> Self {
        let mut vars = BTreeMap::new();
        vars.insert("size".to_string(), Value::Int(size));
        Env { vars }
    }

    pub fn size(&self) -> i64 {
        self.vars.get("size").and_then(Value::as_int).expect("env always binds size")
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    /// Binds `name`, shadowing any earlier binding.
    pub fn insert(&mut self, name: impl Into<String>, v: Value) {
        self.vars.insert(name.into(), v);
    }

    pub fn with(&self, name: impl Into<String>, v: Value) -> Env {
        let mut env = self.clone();
        env.insert(name, v);
        env
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneity() {
        let ok = Value::Array(vec![Value::Int(1), Value::Int(2)]);
        let mixed = Value::Array(vec![Value::Int(1), Value::Float(2.0)]);
        let ragged = Value::Array(vec![Value::Array(vec![Value::Int(1)]), Value::Array(vec![])]);
        assert!(ok.is_homogeneous());
        assert!(!mixed.is_homogeneous());
        assert!(!ragged.is_homogeneous());
    }

    #[test]
    fn json_numbers_keep_kind() {
        let v: serde_json::Value = serde_json::from_str("[1, 2.5, -3]").unwrap();
        assert_eq!(Value::from_json(&v), None);
        let v: serde_json::Value = serde_json::from_str("[1.0, 2.5]").unwrap();
        assert_eq!(Value::from_json(&v), Some(Value::Array(vec![Value::Float(1.0), Value::Float(2.5)])));
        assert_eq!(Value::from_json(&serde_json::json!("x")), None);
    }

    #[test]
    fn env_always_has_size() {
        let env = Env::new(4).with("n", Value::Int(3));
        assert_eq!(env.size(), 4);
        assert_eq!(env.get("n"), Some(&Value::Int(3)));
    }
}
