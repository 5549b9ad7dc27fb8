use std::fs;
use std::path::Path;

use opdyn::operator::{
    operator_from_json, vector_from_value, OperatorSpec, ScalarField, SparseVector,
};
use opdyn::orbit::CompactNet;
use opdyn::{Error, Result};
use serde_json::Value;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn parse_json(path: &Path) -> Result<Value> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse {
        line: e.line(),
        reason: format!("{}: {e}", path.display()),
    })
}

pub fn load_operator(path: &Path) -> Result<OperatorSpec> {
    operator_from_json(&read(path)?)
}

/// One vector object, or an array of them.
pub fn load_vectors(path: &Path, field: ScalarField) -> Result<Vec<SparseVector>> {
    match parse_json(path)? {
        Value::Array(items) => items.iter().map(|v| vector_from_value(v, field)).collect(),
        v => Ok(vec![vector_from_value(&v, field)?]),
    }
}

pub fn load_vector(path: &Path, field: ScalarField) -> Result<SparseVector> {
    let mut v = load_vectors(path, field)?;
    if v.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "{} holds {} vectors, expected one",
            path.display(),
            v.len()
        )));
    }
    Ok(v.remove(0))
}

pub fn load_net(path: &Path, field: ScalarField) -> Result<CompactNet> {
    CompactNet::from_value(&parse_json(path)?, field)
}
