//! JSON documents for operators and sparse vectors.
//!
//! Operators: `{"field", "norm", "kind", ...}` with kind-specific keys
//! `entries` (row-major, complex entries as `[re, im]`), `angle`,
//! `direction`, `weights` (number, `[re, im]` pair list, or array repeated
//! periodically) and `summands`. Vectors: `{"index": coefficient}` maps.

use serde_json::{json, Map, Value};

use super::{
    BaseNorm, NormTag, OperatorKind, OperatorSpec, ScalarField, ShiftDirection, SparseVector,
    Weights,
};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::C64;

fn schema(reason: impl Into<String>) -> Error {
    Error::Parse {
        line: 0,
        reason: reason.into(),
    }
}

/// Parses an operator document, reporting syntax errors with their line.
pub fn operator_from_json(text: &str) -> Result<OperatorSpec> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        reason: e.to_string(),
    })?;
    operator_from_value(&v)
}

pub fn operator_from_value(v: &Value) -> Result<OperatorSpec> {
    parse_operator(v, None, None)
}

fn parse_field(v: &Value) -> Result<Option<ScalarField>> {
    match v.get("field") {
        None => Ok(None),
        Some(Value::String(s)) => match s.as_str() {
            "real" => Ok(Some(ScalarField::Real)),
            "complex" => Ok(Some(ScalarField::Complex)),
            other => Err(schema(format!("unknown field {other:?}"))),
        },
        Some(_) => Err(schema("\"field\" must be a string")),
    }
}

fn parse_base_norm(s: &str) -> Result<BaseNorm> {
    match s {
        "l1" => Ok(BaseNorm::L1),
        "l2" => Ok(BaseNorm::L2),
        "sup" => Ok(BaseNorm::Sup),
        other => Err(schema(format!("unknown norm {other:?}"))),
    }
}

fn parse_norm(v: &Value) -> Result<Option<NormTag>> {
    match v.get("norm") {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(NormTag::Base(parse_base_norm(s)?))),
        Some(Value::Object(o)) => {
            let r = o
                .get("rescaled")
                .ok_or_else(|| schema("norm object must have a \"rescaled\" key"))?;
            let base = r
                .get("base")
                .and_then(Value::as_str)
                .ok_or_else(|| schema("rescaled norm needs a string \"base\""))?;
            let horizon = r
                .get("horizon")
                .and_then(Value::as_u64)
                .ok_or_else(|| schema("rescaled norm needs an integer \"horizon\""))?;
            Ok(Some(NormTag::Rescaled {
                base: parse_base_norm(base)?,
                horizon: horizon as usize,
            }))
        }
        Some(_) => Err(schema("\"norm\" must be a string or a rescaled object")),
    }
}

pub(crate) fn parse_scalar(v: &Value, field: ScalarField) -> Result<C64> {
    let c = match v {
        Value::Number(n) => C64::new(n.as_f64().ok_or_else(|| schema("bad number"))?, 0.0),
        Value::Array(a) if a.len() == 2 => {
            let re = a[0]
                .as_f64()
                .ok_or_else(|| schema("complex entries are [re, im] numbers"))?;
            let im = a[1]
                .as_f64()
                .ok_or_else(|| schema("complex entries are [re, im] numbers"))?;
            C64::new(re, im)
        }
        _ => return Err(schema(format!("expected a number or [re, im], got {v}"))),
    };
    if field == ScalarField::Real && c.im != 0.0 {
        return Err(Error::invariant(
            "field",
            format!("complex entry [{}, {}] in a real-field spec", c.re, c.im),
        ));
    }
    Ok(c)
}

fn parse_matrix(v: &Value, field: ScalarField) -> Result<CMatrix> {
    let rows = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing \"entries\" array"))?;
    let d = rows.len();
    let mut m = CMatrix::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| schema("entries must be an array of rows"))?;
        if row.len() != d {
            return Err(Error::invariant(
                "shape",
                format!("row {i} has {} entries, expected {d}", row.len()),
            ));
        }
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = parse_scalar(e, field)?;
        }
    }
    Ok(m)
}

fn parse_weights(v: Option<&Value>, field: ScalarField) -> Result<Weights> {
    match v {
        None => Ok(Weights::Constant(C64::new(1.0, 0.0))),
        Some(Value::Number(_)) => Ok(Weights::Constant(parse_scalar(v.unwrap(), field)?)),
        Some(Value::Array(a)) => {
            if a.is_empty() {
                return Err(Error::invariant("weights", "empty weight list"));
            }
            let w: Vec<C64> = a
                .iter()
                .map(|e| parse_scalar(e, field))
                .collect::<Result<_>>()?;
            Ok(normalize_weights(Weights::Periodic(w)))
        }
        Some(other) => Err(schema(format!("bad weights {other}"))),
    }
}

pub(crate) fn normalize_weights(w: Weights) -> Weights {
    match w {
        Weights::Periodic(v) if v.len() == 1 => Weights::Constant(v[0]),
        w => w,
    }
}

fn parse_operator(
    v: &Value,
    parent_field: Option<ScalarField>,
    parent_norm: Option<NormTag>,
) -> Result<OperatorSpec> {
    if !v.is_object() {
        return Err(schema("operator spec must be a JSON object"));
    }
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("missing string \"kind\""))?;
    let field = parse_field(v)?
        .or(parent_field)
        .unwrap_or(ScalarField::Real);
    if let Some(pf) = parent_field {
        if pf != field {
            return Err(Error::invariant(
                "field",
                "summand field differs from the direct sum",
            ));
        }
    }
    let own_norm = parse_norm(v)?;
    let norm = parent_norm.or(own_norm);
    let base_default = if kind == "stochastic" {
        BaseNorm::L1
    } else {
        BaseNorm::L2
    };
    let base = norm.map(NormTag::base).unwrap_or(base_default);

    let op_kind = match kind {
        "dense" => OperatorKind::Dense(parse_matrix(v, field)?),
        "generator" => OperatorKind::Generator(parse_matrix(v, field)?),
        "stochastic" => {
            if field != ScalarField::Real {
                return Err(Error::invariant("field", "stochastic matrices are real"));
            }
            OperatorKind::Stochastic(parse_matrix(v, field)?)
        }
        "rotation" => {
            let angle = v
                .get("angle")
                .and_then(Value::as_f64)
                .ok_or_else(|| schema("rotation needs a numeric \"angle\""))?;
            OperatorKind::Rotation { angle }
        }
        "shift" => {
            let direction = match v.get("direction").and_then(Value::as_str) {
                Some("forward") => ShiftDirection::Forward,
                Some("backward") => ShiftDirection::Backward,
                Some("bilateral") => ShiftDirection::Bilateral,
                Some("bilateral_backward") => ShiftDirection::BilateralBackward,
                Some(other) => return Err(schema(format!("unknown direction {other:?}"))),
                None => return Err(schema("shift needs a \"direction\"")),
            };
            OperatorKind::Shift {
                direction,
                weights: parse_weights(v.get("weights"), field)?,
            }
        }
        "direct_sum" => {
            let parts = v
                .get("summands")
                .and_then(Value::as_array)
                .ok_or_else(|| schema("direct_sum needs a \"summands\" array"))?;
            let summand_norm = Some(NormTag::Base(base));
            OperatorKind::DirectSum(
                parts
                    .iter()
                    .map(|p| parse_operator(p, Some(field), summand_norm))
                    .collect::<Result<_>>()?,
            )
        }
        other => return Err(schema(format!("unknown kind {other:?}"))),
    };
    let op = OperatorSpec {
        field,
        norm: NormTag::Base(base),
        kind: op_kind,
        power_bound: None,
    };
    op.validate()?;
    match norm {
        Some(NormTag::Rescaled { horizon, .. }) if parent_field.is_none() => {
            op.with_rescaled_norm(horizon)
        }
        _ => Ok(op),
    }
}

pub(crate) fn scalar_value(c: C64, field: ScalarField) -> Value {
    match field {
        ScalarField::Real => json!(c.re),
        ScalarField::Complex => json!([c.re, c.im]),
    }
}

/// Row-major matrix, entries as numbers (real field) or `[re, im]` pairs.
pub fn matrix_to_value(m: &CMatrix, field: ScalarField) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| scalar_value(m[(i, j)], field))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn base_norm_str(b: BaseNorm) -> &'static str {
    match b {
        BaseNorm::L1 => "l1",
        BaseNorm::L2 => "l2",
        BaseNorm::Sup => "sup",
    }
}

pub fn operator_to_value(op: &OperatorSpec) -> Value {
    let mut o = Map::new();
    o.insert(
        "field".into(),
        json!(match op.field {
            ScalarField::Real => "real",
            ScalarField::Complex => "complex",
        }),
    );
    let norm = match op.norm {
        NormTag::Base(b) => json!(base_norm_str(b)),
        NormTag::Rescaled { base, horizon } => {
            json!({"rescaled": {"base": base_norm_str(base), "horizon": horizon}})
        }
    };
    o.insert("norm".into(), norm);
    match &op.kind {
        OperatorKind::Dense(m) => {
            o.insert("kind".into(), json!("dense"));
            o.insert("entries".into(), matrix_to_value(m, op.field));
        }
        OperatorKind::Generator(m) => {
            o.insert("kind".into(), json!("generator"));
            o.insert("entries".into(), matrix_to_value(m, op.field));
        }
        OperatorKind::Stochastic(m) => {
            o.insert("kind".into(), json!("stochastic"));
            o.insert("entries".into(), matrix_to_value(m, op.field));
        }
        OperatorKind::Rotation { angle } => {
            o.insert("kind".into(), json!("rotation"));
            o.insert("angle".into(), json!(angle));
        }
        OperatorKind::Shift { direction, weights } => {
            o.insert("kind".into(), json!("shift"));
            o.insert(
                "direction".into(),
                json!(match direction {
                    ShiftDirection::Forward => "forward",
                    ShiftDirection::Backward => "backward",
                    ShiftDirection::Bilateral => "bilateral",
                    ShiftDirection::BilateralBackward => "bilateral_backward",
                }),
            );
            let w = match weights {
                Weights::Constant(c) if c.im == 0.0 => json!(c.re),
                Weights::Constant(c) => Value::Array(vec![scalar_value(*c, op.field)]),
                Weights::Periodic(v) => {
                    Value::Array(v.iter().map(|c| scalar_value(*c, op.field)).collect())
                }
            };
            o.insert("weights".into(), w);
        }
        OperatorKind::DirectSum(parts) => {
            o.insert("kind".into(), json!("direct_sum"));
            o.insert(
                "summands".into(),
                Value::Array(
                    parts
                        .iter()
                        .map(|p| {
                            let mut v = operator_to_value(p);
                            // Summands inherit the norm of the sum.
                            if let Value::Object(m) = &mut v {
                                m.insert("norm".into(), json!(base_norm_str(op.base_norm())));
                            }
                            v
                        })
                        .collect(),
                ),
            );
        }
    }
    Value::Object(o)
}

/// `{"index": coefficient}`; complex coefficients as `[re, im]`.
pub fn vector_to_value(x: &SparseVector) -> Value {
    let mut o = Map::new();
    for (i, c) in x.iter() {
        o.insert(i.to_string(), scalar_value(c, x.field()));
    }
    Value::Object(o)
}

/// Parses a vector map. Real-valued maps are promoted to `field`; complex
/// coefficients in a real field are rejected.
pub fn vector_from_value(v: &Value, field: ScalarField) -> Result<SparseVector> {
    let o = v
        .as_object()
        .ok_or_else(|| schema("vectors are {\"index\": coefficient} objects"))?;
    let mut pairs = Vec::with_capacity(o.len());
    for (k, c) in o {
        let i: i64 = k
            .trim()
            .parse()
            .map_err(|_| schema(format!("vector key {k:?} is not an integer index")))?;
        pairs.push((i, parse_scalar(c, field)?));
    }
    SparseVector::from_pairs(field, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rotation_spec() {
        let op =
            operator_from_json(r#"{"kind":"rotation","angle":1.0,"field":"real","norm":"l2"}"#)
                .unwrap();
        assert_eq!(op, OperatorSpec::rotation(1.0).unwrap());
    }

    #[test]
    fn stochastic_column_sum_violation() {
        let err = operator_from_json(
            r#"{"kind":"stochastic","field":"real","entries":[[0.5,0.5],[0.4,0.5]]}"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::InvariantViolation { ref which, .. } if which == "stochastic")
        );
    }

    #[test]
    fn complex_entry_in_real_spec() {
        let err = operator_from_json(r#"{"kind":"dense","field":"real","entries":[[[1,0.5]]]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { ref which, .. } if which == "field"));
    }

    #[test]
    fn syntax_error_carries_line() {
        let err = operator_from_json("{\n\"kind\": \"dense\",\n oops }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn stochastic_defaults_to_l1() {
        let op =
            operator_from_json(r#"{"kind":"stochastic","entries":[[0.5,1.0],[0.5,0.0]]}"#).unwrap();
        assert_eq!(op.base_norm(), BaseNorm::L1);
    }

    #[test]
    fn vector_map_round_trip() {
        let v = serde_json::json!({"-3": 1.5, "7": [0.0, 2.0]});
        let x = vector_from_value(&v, ScalarField::Complex).unwrap();
        assert_eq!(x.get(7), C64::new(0.0, 2.0));
        assert_eq!(
            vector_from_value(&vector_to_value(&x), ScalarField::Complex).unwrap(),
            x
        );
        assert!(vector_from_value(&v, ScalarField::Real).is_err());
    }
}
