//! Field-by-field comparison of two reports of the same kind.

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDiff {
    /// JSON pointer into `result`.
    pub path: String,
    pub a: Value,
    pub b: Value,
    pub relative: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub kind: String,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub fields: usize,
    pub max_relative: f64,
    pub exceeded: usize,
    pub diffs: Vec<FieldDiff>,
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 || a == b {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn compare(a: &Value, b: &Value, rel_tol: f64, abs_tol: f64) -> Result<Comparison, CliError> {
    let header = |v: &Value, key: &str| v.get(key).and_then(Value::as_str).map(str::to_owned);
    let (sa, sb) = (header(a, "schema"), header(b, "schema"));
    if sa.is_none() || sa != sb {
        return Err(CliError::Schema(format!("schema {sa:?} vs {sb:?}")));
    }
    let (ka, kb) = (header(a, "kind"), header(b, "kind"));
    if ka != kb {
        return Err(CliError::Schema(format!("experiment kind {ka:?} vs {kb:?}")));
    }
    let (Some(ra), Some(rb)) = (a.get("result"), b.get("result")) else {
        return Err(CliError::Schema("missing result".into()));
    };
    let mut diffs = Vec::new();
    walk(ra, rb, String::new(), rel_tol, abs_tol, &mut diffs)?;
    let max_relative = diffs.iter().map(|d| d.relative).fold(0.0, f64::max);
    let exceeded = diffs.iter().filter(|d| !d.within).count();
    Ok(Comparison { kind: ka.unwrap_or_default(), rel_tol, abs_tol, fields: diffs.len(), max_relative, exceeded, diffs })
}

fn walk(a: &Value, b: &Value, path: String, rel_tol: f64, abs_tol: f64, out: &mut Vec<FieldDiff>) -> Result<(), CliError> {
    let mismatch = || CliError::Schema(format!("structure differs at '{path}'"));
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            if ma.len() != mb.len() || ma.keys().any(|k| !mb.contains_key(k)) {
                return Err(mismatch());
            }
            for (k, va) in ma {
                walk(va, &mb[k], format!("{path}/{k}"), rel_tol, abs_tol, out)?;
            }
        }
        (Value::Array(xa), Value::Array(xb)) => {
            if xa.len() != xb.len() {
                return Err(mismatch());
            }
            for (i, (va, vb)) in xa.iter().zip(xb).enumerate() {
                walk(va, vb, format!("{path}/{i}"), rel_tol, abs_tol, out)?;
            }
        }
        (Value::Number(na), Value::Number(nb)) => {
            let (x, y) = (na.as_f64().unwrap_or(f64::NAN), nb.as_f64().unwrap_or(f64::NAN));
            let relative = relative_difference(x, y);
            let within = relative <= rel_tol || (x - y).abs() <= abs_tol;
            out.push(FieldDiff { path, a: a.clone(), b: b.clone(), relative, within });
        }
        // a quantity that could not be computed in one run (null) but could in the other
        (Value::Null, Value::Null) => {}
        (Value::Null, _) | (_, Value::Null) => {
            out.push(FieldDiff { path, a: a.clone(), b: b.clone(), relative: f64::INFINITY, within: false });
        }
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => {
            let same = a == b;
            let relative = if same { 0.0 } else { 1.0 };
            out.push(FieldDiff { path, a: a.clone(), b: b.clone(), relative, within: same });
        }
        _ => return Err(mismatch()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn report(kind: &str, result: Value) -> Value {
        json!({ "schema": crate::report::SCHEMA, "kind": kind, "config": {}, "result": result, "checks": [] })
    }

    #[test]
    fn identical_reports_have_zero_differences() {
        let r = report("cmc-deficit", json!({ "x": 1.5, "v": [0.0, -2.0], "ok": true }));
        let c = compare(&r, &r, 0.0, 0.0).unwrap();
        assert_eq!((c.fields, c.exceeded, c.max_relative), (4, 0, 0.0));
    }

    #[test]
    fn relative_differences_and_tolerances() {
        let a = report("sweep", json!({ "x": 1.0, "y": 1e-20 }));
        let b = report("sweep", json!({ "x": 1.01, "y": 2e-20 }));
        let c = compare(&a, &b, 0.02, 0.0).unwrap();
        assert_eq!(c.exceeded, 1);
        assert!((c.diffs[0].relative - 0.01 / 1.01).abs() < 1e-15);
        assert_eq!(compare(&a, &b, 0.02, 1e-19).unwrap().exceeded, 0);
    }

    #[test]
    fn mismatched_kinds_and_shapes_are_schema_errors() {
        let a = report("hk-deficit", json!({ "x": 1.0 }));
        assert!(matches!(compare(&a, &report("cmc-deficit", json!({ "x": 1.0 })), 1.0, 0.0), Err(CliError::Schema(_))));
        assert!(matches!(compare(&a, &report("hk-deficit", json!({ "y": 1.0 })), 1.0, 0.0), Err(CliError::Schema(_))));
        let mut other = a.clone();
        other["schema"] = json!("warpstab-report/0");
        assert!(matches!(compare(&a, &other, 1.0, 0.0), Err(CliError::Schema(_))));
    }
}
