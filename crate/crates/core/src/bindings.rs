//! Extern values for a program run.
//!
//! A bindings file is JSON of the form
//! `{"size-defaults": {"n": 3}, "per-size": {"4": {"v": [1.0, 2.0]}}}`.
//! Integers become `Int`, other numbers `Float`, arrays must be homogeneous.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::eval::check_value;
use crate::program::Program;
use crate::value::{Env, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindingError {
    #[error("malformed bindings: {0}")]
    Malformed(String),
    #[error("missing value for extern `{0}`")]
    Missing(String),
    #[error("value {value} of extern `{name}` does not have type `{ty}`")]
    TypeMismatch { name: String, value: String, ty: String },
    #[error("cannot check extern `{name}`: {reason}")]
    Unchecked { name: String, reason: String },
}

/// Values for one run at a fixed size.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub size: i64,
    pub values: BTreeMap<String, Value>,
}

impl Bindings {
    pub fn new(size: i64) -> Self {
        Bindings { size, values: BTreeMap::new() }
    }

    pub fn with(mut self, name: impl Into<String>, v: Value) -> Self {
        self.values.insert(name.into(), v);
        self
    }

    /// Extern values in declaration order, checked against declared types.
    /// Later extern types may refer to earlier externs and to `size`.
    pub fn inputs_for(&self, prog: &Program) -> Result<Vec<(String, Value)>, BindingError> {
        let mut env = Env::new(self.size);
        let mut out = Vec::with_capacity(prog.externs.len());
        for ext in &prog.externs {
            let v = self.values.get(&ext.name).ok_or_else(|| BindingError::Missing(ext.name.clone()))?;
            if let Some(ty) = &ext.ty {
                match check_value(v, ty, &env) {
                    Ok(true) => {}
                    Ok(false) => {
                        return Err(BindingError::TypeMismatch {
                            name: ext.name.clone(),
                            value: v.describe(),
                            ty: ty.to_string(),
                        })
                    }
                    Err(e) => return Err(BindingError::Unchecked { name: ext.name.clone(), reason: e.to_string() }),
                }
            }
            env.insert(ext.name.clone(), v.clone());
            out.push((ext.name.clone(), v.clone()));
        }
        Ok(out)
    }
}

/// Parsed bindings file: defaults plus per-size overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BindingsFile {
    pub defaults: BTreeMap<String, Value>,
    pub per_size: BTreeMap<i64, BTreeMap<String, Value>>,
}

fn value_map(v: &serde_json::Value, what: &str) -> Result<BTreeMap<String, Value>, BindingError> {
    let obj = v.as_object().ok_or_else(|| BindingError::Malformed(format!("{what} must be an object")))?;
    obj.iter()
        .map(|(k, v)| {
            Value::from_json(v).map(|v| (k.clone(), v)).ok_or_else(|| {
                BindingError::Malformed(format!("{what}: `{k}` must be a number or a homogeneous array"))
            })
        })
        .collect()
}

impl BindingsFile {
    pub fn parse(text: &str) -> Result<Self, BindingError> {
        let json: serde_json::Value = serde_json::from_str(text).map_err(|e| BindingError::Malformed(e.to_string()))?;
        let obj = json.as_object().ok_or_else(|| BindingError::Malformed("top level must be an object".into()))?;
        let mut file = BindingsFile::default();
        for (key, v) in obj {
            match key.as_str() {
                "size-defaults" => file.defaults = value_map(v, "size-defaults")?,
                "per-size" => {
                    let sizes =
                        v.as_object().ok_or_else(|| BindingError::Malformed("per-size must be an object".into()))?;
                    for (size, vals) in sizes {
                        let n =
                            size.parse::<i64>().ok().filter(|n| *n >= 1).ok_or_else(|| {
                                BindingError::Malformed(format!("per-size key `{size}` is not a size"))
                            })?;
                        file.per_size.insert(n, value_map(vals, &format!("per-size.{size}"))?);
                    }
                }
                other => return Err(BindingError::Malformed(format!("unknown key `{other}`"))),
            }
        }
        Ok(file)
    }

    /// Defaults overridden by the entry for `size`, if any.
    pub fn for_size(&self, size: i64) -> Bindings {
        let mut values = self.defaults.clone();
        if let Some(over) = self.per_size.get(&size) {
            values.extend(over.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        Bindings { size, values }
    }
}
