//! JSON persistence of j-maps and sphere points.
//!
//! A j-map file is `{"m": int, "j1": [[[re, im], ...], ...], "j2": ...}` with
//! matrices row-major. Numbers are written in shortest round-trip form, so a
//! file written here is reproduced byte for byte by `store(load(file))`.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::jmap::JMap;
use crate::sphere::{CVector, SpherePoint};
use crate::su_algebra::{validate_su, ComplexMatrix, DEFAULT_VALIDATION_TOL};

fn schema(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::SchemaError {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_complex(v: &Value, field: &str) -> Result<Complex64> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| schema(field, "expected a [re, im] pair"))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| schema(format!("{field}[0]"), "expected a number"))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| schema(format!("{field}[1]"), "expected a number"))?;
    Ok(Complex64::new(re, im))
}

fn parse_matrix(v: &Value, field: &str, m: usize) -> Result<ComplexMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| schema(field, "expected an array of rows"))?;
    if rows.len() != m {
        return Err(schema(field, format!("expected {m} rows, found {}", rows.len())));
    }
    let mut out = ComplexMatrix::zeros(m, m);
    for (r, row) in rows.iter().enumerate() {
        let name = format!("{field}[{r}]");
        let cols = row
            .as_array()
            .ok_or_else(|| schema(&name, "expected an array of entries"))?;
        if cols.len() != m {
            return Err(schema(&name, format!("expected {m} entries, found {}", cols.len())));
        }
        for (c, entry) in cols.iter().enumerate() {
            out[(r, c)] = parse_complex(entry, &format!("{name}[{c}]"))?;
        }
    }
    Ok(out)
}

/// Parses and validates a j-map document; every failure names its field.
pub fn jmap_from_json(text: &str) -> Result<JMap> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema("<document>", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| schema("<document>", "expected a JSON object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "m" | "j1" | "j2") {
            return Err(schema(key, "unknown field"));
        }
    }
    let m = obj
        .get("m")
        .ok_or_else(|| schema("m", "missing field"))?
        .as_u64()
        .ok_or_else(|| schema("m", "expected a non-negative integer"))? as usize;
    if m < 3 {
        return Err(schema("m", format!("m must be >= 3, got {m}")));
    }
    let mut parts = Vec::with_capacity(2);
    for field in ["j1", "j2"] {
        let raw = obj.get(field).ok_or_else(|| schema(field, "missing field"))?;
        let mat = parse_matrix(raw, field, m)?;
        let el = validate_su(&mat, DEFAULT_VALIDATION_TOL).map_err(|e| schema(field, e.to_string()))?;
        parts.push(el);
    }
    let j2 = parts.pop().expect("two parts");
    let j1 = parts.pop().expect("two parts");
    JMap::new(j1, j2)
}

#[derive(Serialize)]
struct JMapDoc {
    m: usize,
    j1: Vec<Vec<[f64; 2]>>,
    j2: Vec<Vec<[f64; 2]>>,
}

fn rows(x: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..x.nrows())
        .map(|r| (0..x.ncols()).map(|c| [x[(r, c)].re, x[(r, c)].im]).collect())
        .collect()
}

/// Canonical text: one line, keys `m`, `j1`, `j2`, newline-terminated.
pub fn jmap_to_json(j: &JMap) -> String {
    let doc = JMapDoc {
        m: j.m(),
        j1: rows(j.j1().as_matrix()),
        j2: rows(j.j2().as_matrix()),
    };
    let mut s = serde_json::to_string(&doc).expect("finite entries serialize");
    s.push('\n');
    s
}

pub fn load_jmap(path: &Path) -> Result<JMap> {
    jmap_from_json(&std::fs::read_to_string(path)?)
}

pub fn store_jmap(path: &Path, j: &JMap) -> Result<()> {
    std::fs::write(path, jmap_to_json(j))?;
    Ok(())
}

/// Points off the sphere by more than this are rejected.
pub const POINT_REJECT_TOL: f64 = 1e-9;
/// Points off the sphere by more than this (but within the rejection bound)
/// are renormalized with a warning.
pub const POINT_RENORMALIZE_TOL: f64 = 1e-12;

/// `{"u": [[re, im], ...], "v": [[re, im], [re, im]]}`.
pub fn point_from_json(text: &str) -> Result<SpherePoint> {
    let doc: Value = serde_json::from_str(text).map_err(|e| schema("<document>", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| schema("<document>", "expected a JSON object"))?;
    let vector = |field: &str| -> Result<CVector> {
        let arr = obj
            .get(field)
            .ok_or_else(|| schema(field, "missing field"))?
            .as_array()
            .ok_or_else(|| schema(field, "expected an array of [re, im] pairs"))?;
        let entries = arr
            .iter()
            .enumerate()
            .map(|(k, v)| parse_complex(v, &format!("{field}[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(CVector::from_vec(entries))
    };
    let u = vector("u")?;
    let v = vector("v")?;
    if v.len() != 2 {
        return Err(schema("v", format!("expected 2 entries, found {}", v.len())));
    }
    if u.len() < 3 {
        return Err(schema("u", format!("expected at least 3 entries, found {}", u.len())));
    }
    let residual = (u.norm_squared() + v.norm_squared() - 1.0).abs();
    if residual > POINT_REJECT_TOL {
        return Err(Error::NotOnSphere { residual });
    }
    if residual > POINT_RENORMALIZE_TOL {
        log::warn!("point is {residual:e} off the unit sphere; renormalizing");
        return SpherePoint::normalized(u, v);
    }
    SpherePoint::new(u, v)
}
