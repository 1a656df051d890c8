//! Scalar values shared by device properties, context variables and conditions.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar value as it appears in scenario documents and world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Bool(bool),
    Num(f64),
    Str(String),
}

/// The type of a [`Literal`], used for kind checking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LiteralKind {
    Boolean,
    Numeric,
    String,
}

impl Literal {
    pub fn kind(&self) -> LiteralKind {
        match self {
            Literal::Bool(_) => LiteralKind::Boolean,
            Literal::Num(_) => LiteralKind::Numeric,
            Literal::Str(_) => LiteralKind::String,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Literal::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Literal::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for LiteralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LiteralKind::Boolean => "boolean",
            LiteralKind::Numeric => "numeric",
            LiteralKind::String => "string",
        })
    }
}

/// Condition-language rendering: strings are quoted, numbers use the
/// shortest representation that parses back to the same value.
impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Num(n) => write!(f, "{n}"),
            Literal::Str(s) => {
                let quoted = serde_json::to_string(s).map_err(|_| fmt::Error)?;
                f.write_str(&quoted)
            }
        }
    }
}

impl From<bool> for Literal {
    fn from(b: bool) -> Self {
        Literal::Bool(b)
    }
}

impl From<f64> for Literal {
    fn from(n: f64) -> Self {
        Literal::Num(n)
    }
}

impl From<i32> for Literal {
    fn from(n: i32) -> Self {
        Literal::Num(f64::from(n))
    }
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Str(s.to_string())
    }
}

impl From<String> for Literal {
    fn from(s: String) -> Self {
        Literal::Str(s)
    }
}

/// Formats a number with at most `decimals` fractional digits and no
/// trailing zeros (`15.50` -> `15.5`, `10.0` -> `10`).
pub fn format_number(value: f64, decimals: usize) -> String {
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Number of fractional digits needed to print `step` exactly (capped at 9).
pub fn decimals_of(step: f64) -> usize {
    let repr = format!("{step}");
    match repr.split_once('.') {
        Some((_, frac)) => frac.len().min(9),
        None => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untagged_json_shapes() {
        let v: Vec<Literal> = serde_json::from_str(r#"[true, 1.5, "x", 3]"#).unwrap();
        assert_eq!(
            v,
            vec![Literal::Bool(true), Literal::Num(1.5), Literal::from("x"), Literal::Num(3.0)]
        );
        assert_eq!(serde_json::to_string(&Literal::Num(3.0)).unwrap(), "3.0");
    }

    #[test]
    fn number_formatting_trims_zeros() {
        assert_eq!(format_number(15.5, 1), "15.5");
        assert_eq!(format_number(15.50, 2), "15.5");
        assert_eq!(format_number(10.0, 1), "10");
        assert_eq!(format_number(-0.0, 2), "0");
        assert_eq!(format_number(0.1 + 0.2, 1), "0.3");
        assert_eq!(decimals_of(0.5), 1);
        assert_eq!(decimals_of(10.0), 0);
        assert_eq!(decimals_of(0.25), 2);
    }

    #[test]
    fn display_quotes_strings() {
        assert_eq!(Literal::from("a\"b").to_string(), r#""a\"b""#);
        assert_eq!(Literal::Num(15.0).to_string(), "15");
        assert_eq!(Literal::Num(-2.5).to_string(), "-2.5");
    }
}
