use serde_json::error::Category;
use thiserror::Error;

use super::{ScenarioSpec, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("input is not valid UTF-8 (byte {offset})")]
    Encoding { offset: usize },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("type mismatch at `{path}`: {message}")]
    TypeMismatch { path: String, message: String },
    #[error("unknown field `{field}` at `{path}`")]
    UnknownField { path: String, field: String },
    #[error("invalid document at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl ParseError {
    /// Path into the document, when the error has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::TypeMismatch { path, .. }
            | ParseError::UnknownField { path, .. }
            | ParseError::Invalid { path, .. } => Some(path),
            _ => None,
        }
    }
}

/// Parses a scenario document into a structurally well-typed [`ScenarioSpec`].
///
/// Referential and domain checks are left to [`super::validate_scenario`];
/// this stage only rejects what cannot be represented: bad JSON, wrong
/// types, unknown fields, malformed conditions, a wrong `schemaVersion`, and
/// property initial values whose type disagrees with the declared kind.
pub fn parse_scenario(bytes: &[u8]) -> Result<ScenarioSpec, ParseError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ParseError::Encoding { offset: e.valid_up_to() })?;
    let mut de = serde_json::Deserializer::from_str(text);
    let spec: ScenarioSpec =
        serde_path_to_error::deserialize(&mut de).map_err(map_serde_error)?;
    de.end().map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: "trailing characters after the document".into(),
    })?;

    if spec.schema_version != SCHEMA_VERSION {
        return Err(ParseError::Invalid {
            path: "schemaVersion".into(),
            message: format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                spec.schema_version
            ),
        });
    }
    for (d, device) in spec.devices.iter().enumerate() {
        for (p, prop) in device.properties.iter().enumerate() {
            let want = prop.kind.literal_kind();
            let got = prop.initial.kind();
            if want != got {
                return Err(ParseError::TypeMismatch {
                    path: format!("devices[{d}].properties[{p}].initial"),
                    message: format!("expected a {want} value, found {got}"),
                });
            }
        }
    }
    Ok(spec)
}

/// Serializes a spec back to a scenario document.
pub fn to_json(spec: &ScenarioSpec) -> String {
    serde_json::to_string_pretty(spec).expect("scenario specs always serialize")
}

fn map_serde_error(err: serde_path_to_error::Error<serde_json::Error>) -> ParseError {
    let path = err.path().to_string();
    let inner = err.into_inner();
    let full = inner.to_string();
    let message = match full.rsplit_once(" at line ") {
        Some((m, _)) => m.to_string(),
        None => full,
    };
    match inner.classify() {
        Category::Syntax | Category::Eof | Category::Io => ParseError::Syntax {
            line: inner.line(),
            column: inner.column(),
            message,
        },
        Category::Data => {
            let path = if path == "." { String::new() } else { path };
            if let Some(field) = message
                .strip_prefix("unknown field `")
                .and_then(|rest| rest.split_once('`'))
                .map(|(f, _)| f.to_string())
            {
                let path = if path.is_empty() {
                    field.clone()
                } else if path.ends_with(&format!(".{field}")) || path == field {
                    path
                } else {
                    format!("{path}.{field}")
                };
                ParseError::UnknownField { path, field }
            } else if message.starts_with("invalid type") || message.starts_with("invalid value") {
                ParseError::TypeMismatch { path, message }
            } else {
                ParseError::Invalid { path, message }
            }
        }
    }
}
