//! JSON model files.
//!
//! ```json
//! {"kind": "discrete", "N": 1,
//!  "blocks": [{"B": [["1/2"]], "A": [["1/2"]]},
//!             {"B": [[0]], "A": [["1/2"]], "C": [["1/2"]]},
//!             {"B": [["1/2"]], "C": [["1/2"]]}],
//!  "pi0": [[1]]}
//! ```
//!
//! Entries are JSON numbers or `"p/q"` strings. Level 0 omits `"C"`, the last
//! level may omit `"A"`. `"pi0"` is optional; for `N = 1` it defaults to `[[1]]`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::matrix::Mat;
use crate::model::{BlockTridiagonal, Kind, Level, ModelError};
use crate::scalar::{ParseScalarError, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("cannot read model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry {context}: {source}")]
    Entry { context: String, source: ParseScalarError },
    #[error("entry {0} must be a number or a \"p/q\" string")]
    EntryType(String),
    #[error("matrix {0} is ragged or empty")]
    Ragged(String),
    #[error("pi0 is required when N > 1")]
    MissingSeed,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBlocks {
    #[serde(rename = "B")]
    b: Vec<Vec<Value>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<Vec<Value>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<Value>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    kind: Kind,
    #[serde(rename = "N")]
    n: usize,
    blocks: Vec<RawBlocks>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi0: Option<Vec<Vec<Value>>>,
}

/// A parsed model together with its seed `Π_0`.
#[derive(Debug, Clone)]
pub struct ModelFile<T> {
    pub model: BlockTridiagonal<T>,
    pub pi0: Mat<T>,
}

fn entry<T: Scalar>(v: &Value, context: &str) -> Result<T, ModelFileError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(ModelFileError::EntryType(context.to_string())),
    };
    T::parse_literal(&text).map_err(|source| ModelFileError::Entry {
        context: context.to_string(),
        source,
    })
}

fn matrix<T: Scalar>(rows: &[Vec<Value>], context: &str) -> Result<Mat<T>, ModelFileError> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(ModelFileError::Ragged(context.to_string()));
    }
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            data.push(entry(v, &format!("{context}[{i}][{j}]"))?);
        }
    }
    Ok(Mat::from_vec(rows.len(), cols, data))
}

/// Parses and validates a model file.
pub fn parse_model<T: Scalar>(json: &str) -> Result<ModelFile<T>, ModelFileError> {
    let raw: RawModel = serde_json::from_str(json)?;
    let levels = raw
        .blocks
        .iter()
        .enumerate()
        .map(|(n, blk)| {
            let b = matrix(&blk.b, &format!("blocks[{n}].B"))?;
            let a = blk
                .a
                .as_ref()
                .map(|m| matrix(m, &format!("blocks[{n}].A")))
                .transpose()?;
            let c = blk
                .c
                .as_ref()
                .map(|m| matrix(m, &format!("blocks[{n}].C")))
                .transpose()?;
            Ok(Level::new(b, a, c))
        })
        .collect::<Result<Vec<_>, ModelFileError>>()?;
    let model = BlockTridiagonal::new(raw.n, raw.kind, levels)?;
    let pi0 = match &raw.pi0 {
        Some(m) => matrix(m, "pi0")?,
        None if raw.n == 1 => Mat::identity(1),
        None => return Err(ModelFileError::MissingSeed),
    };
    Ok(ModelFile { model, pi0 })
}

pub fn read_model<T: Scalar>(path: &std::path::Path) -> Result<ModelFile<T>, ModelFileError> {
    parse_model(&std::fs::read_to_string(path)?)
}

fn encode<T: Scalar>(m: &Mat<T>) -> Vec<Vec<Value>> {
    m.to_rows()
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|v| {
                    if T::EXACT {
                        Value::String(v.to_string())
                    } else {
                        serde_json::Number::from_f64(v.to_f64()).map_or(Value::Null, Value::Number)
                    }
                })
                .collect()
        })
        .collect()
}

/// Serializes the stored levels of `model` (and `pi0`, when given).
pub fn write_model<T: Scalar>(model: &BlockTridiagonal<T>, pi0: Option<&Mat<T>>) -> String {
    let blocks = (0..model.len())
        .map(|n| RawBlocks {
            b: encode(model.b(n)),
            a: model.has_a(n).then(|| encode(model.a(n))),
            c: (n > 0).then(|| encode(model.c(n))),
        })
        .collect();
    let raw = RawModel {
        kind: model.kind(),
        n: model.phases(),
        blocks,
        pi0: pi0.map(encode),
    };
    serde_json::to_string_pretty(&raw).expect("model JSON is always serializable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{ratio, Rational};

    const WALK: &str = r#"{"kind": "discrete", "N": 1,
        "blocks": [{"B": [["1/2"]], "A": [["1/2"]]},
                   {"B": [[0]], "A": [[0.5]], "C": [["1/2"]]},
                   {"B": [["1/2"]], "C": [["1/2"]]}]}"#;

    #[test]
    fn parses_walk_with_default_seed() {
        let f = parse_model::<Rational>(WALK).unwrap();
        assert_eq!(f.model.len(), 3);
        assert_eq!(f.model.a(1).get(0, 0), &ratio(1, 2));
        assert_eq!(f.pi0, Mat::identity(1));
        assert!(!f.model.has_a(2));
    }

    #[test]
    fn round_trip() {
        let f = parse_model::<Rational>(WALK).unwrap();
        let text = write_model(&f.model, Some(&f.pi0));
        let g = parse_model::<Rational>(&text).unwrap();
        for n in 0..3 {
            assert_eq!(f.model.b(n), g.model.b(n));
        }
        let fl = parse_model::<f64>(WALK).unwrap();
        let again = parse_model::<f64>(&write_model(&fl.model, None)).unwrap();
        assert_eq!(again.model.b(0), fl.model.b(0));
    }

    #[test]
    fn rejects_bad_input() {
        let broken = WALK.replace(r#"{"B": [[0]], "A": [[0.5]]"#, r#"{"B": [[0.25]], "A": [[0.5]]"#);
        assert!(matches!(
            parse_model::<Rational>(&broken),
            Err(ModelFileError::Model(ModelError::RowSum { .. }))
        ));
        let two = r#"{"kind": "discrete", "N": 2, "blocks": [{"B": [[1, 0], [0, 1]]}]}"#;
        assert!(matches!(parse_model::<Rational>(two), Err(ModelFileError::MissingSeed)));
        let bool_entry = WALK.replace("[[0]]", "[[true]]");
        assert!(matches!(
            parse_model::<f64>(&bool_entry),
            Err(ModelFileError::EntryType(_))
        ));
        let garbage = WALK.replace("[[0]]", r#"[["x/2"]]"#);
        assert!(matches!(
            parse_model::<f64>(&garbage),
            Err(ModelFileError::Entry { .. })
        ));
        assert!(matches!(parse_model::<f64>("{"), Err(ModelFileError::Json(_))));
    }
}
