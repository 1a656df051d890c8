//! Condition expressions used by rule conditions and task goals.
//!
//! Grammar (keywords are case-insensitive):
//!
//! ```text
//! expr     := or
//! or       := and ( "OR" and )*
//! and      := unary ( "AND" unary )*
//! unary    := "NOT" unary | "(" expr ")" | compare
//! compare  := operand ( "==" | "!=" | "<" | "<=" | ">" | ">=" ) operand
//! operand  := "device." ID "." ID | "context." ID
//!           | NUMBER | STRING | "true" | "false" | "on" | "off"
//! ```
//!
//! `on`/`off` are aliases for `true`/`false`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::compile::SlotTable;
use super::ScenarioSpec;
use crate::literal::{Literal, LiteralKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn is_ordered(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Device { device_id: String, property: String },
    Context(String),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionExpr {
    Compare { left: Operand, op: CmpOp, right: Operand },
    And(Box<ConditionExpr>, Box<ConditionExpr>),
    Or(Box<ConditionExpr>, Box<ConditionExpr>),
    Not(Box<ConditionExpr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unresolved reference `{reference}`")]
    Unresolved { reference: String },
    #[error("kind mismatch: {message}")]
    KindMismatch { message: String },
}

impl ConditionExpr {
    pub fn parse(text: &str) -> Result<Self, ConditionError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0, len: text.len() };
        let expr = parser.parse_or()?;
        if let Some((offset, tok)) = parser.tokens.get(parser.pos) {
            return Err(ConditionError::Syntax {
                offset: *offset,
                message: format!("unexpected {tok:?} after complete expression"),
            });
        }
        Ok(expr)
    }

    pub fn compare(left: Operand, op: CmpOp, right: Operand) -> Self {
        ConditionExpr::Compare { left, op, right }
    }

    pub fn and(self, other: ConditionExpr) -> Self {
        ConditionExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: ConditionExpr) -> Self {
        ConditionExpr::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        ConditionExpr::Not(Box::new(self))
    }

    /// Every operand that refers to world state, in source order.
    pub fn references(&self) -> Vec<&Operand> {
        let mut out = Vec::new();
        self.walk_operands(&mut |op| {
            if !matches!(op, Operand::Literal(_)) {
                out.push(op);
            }
        });
        out
    }

    fn walk_operands<'a>(&'a self, f: &mut impl FnMut(&'a Operand)) {
        match self {
            ConditionExpr::Compare { left, right, .. } => {
                f(left);
                f(right);
            }
            ConditionExpr::And(a, b) | ConditionExpr::Or(a, b) => {
                a.walk_operands(f);
                b.walk_operands(f);
            }
            ConditionExpr::Not(a) => a.walk_operands(f),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            ConditionExpr::Or(..) => 1,
            ConditionExpr::And(..) => 2,
            ConditionExpr::Not(..) => 3,
            ConditionExpr::Compare { .. } => 4,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Device { device_id, property } => write!(f, "device.{device_id}.{property}"),
            Operand::Context(name) => write!(f, "context.{name}"),
            Operand::Literal(lit) => write!(f, "{lit}"),
        }
    }
}

impl fmt::Display for ConditionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Left operands need parens only below our precedence, right operands
        // also at equal precedence, so the printed form reparses to the same tree.
        fn child(
            f: &mut fmt::Formatter<'_>,
            e: &ConditionExpr,
            min_prec: u8,
        ) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            ConditionExpr::Compare { left, op, right } => {
                write!(f, "{left} {} {right}", op.symbol())
            }
            ConditionExpr::And(a, b) => {
                child(f, a, 2)?;
                f.write_str(" AND ")?;
                child(f, b, 3)
            }
            ConditionExpr::Or(a, b) => {
                child(f, a, 1)?;
                f.write_str(" OR ")?;
                child(f, b, 2)
            }
            ConditionExpr::Not(a) => {
                f.write_str("NOT ")?;
                child(f, a, 3)
            }
        }
    }
}

impl Serialize for ConditionExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConditionExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        ConditionExpr::parse(&text)
            .map_err(|e| serde::de::Error::custom(format!("invalid condition: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    LParen,
    RParen,
    And,
    Or,
    Not,
    Op(CmpOp),
    Operand(Operand),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ConditionError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset: usize, message: String| ConditionError::Syntax { offset, message };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                out.push((start, Token::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Token::RParen));
                i += 1;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, width) = match (c, next) {
                    (b'=', Some(b'=')) => (CmpOp::Eq, 2),
                    (b'!', Some(b'=')) => (CmpOp::Ne, 2),
                    (b'<', Some(b'=')) => (CmpOp::Le, 2),
                    (b'>', Some(b'=')) => (CmpOp::Ge, 2),
                    (b'<', _) => (CmpOp::Lt, 1),
                    (b'>', _) => (CmpOp::Gt, 1),
                    _ => return Err(err(start, format!("unknown operator starting with `{}`", c as char))),
                };
                out.push((start, Token::Op(op)));
                i += width;
            }
            b'"' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j] != b'"' {
                    if bytes[j] == b'\\' {
                        j += 1;
                    }
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(err(start, "unterminated string".into()));
                }
                let s: String = serde_json::from_str(&text[i..=j])
                    .map_err(|e| err(start, format!("bad string literal: {e}")))?;
                out.push((start, Token::Operand(Operand::Literal(Literal::Str(s)))));
                i = j + 1;
            }
            b'\'' => {
                let mut s = String::new();
                let mut j = i + 1;
                let rest = &text[j..];
                let mut chars = rest.char_indices();
                let mut closed = false;
                while let Some((k, ch)) = chars.next() {
                    match ch {
                        '\\' => {
                            if let Some((_, esc)) = chars.next() {
                                s.push(esc);
                            }
                        }
                        '\'' => {
                            j += k + 1;
                            closed = true;
                            break;
                        }
                        other => s.push(other),
                    }
                }
                if !closed {
                    return Err(err(start, "unterminated string".into()));
                }
                out.push((start, Token::Operand(Operand::Literal(Literal::Str(s)))));
                i = j;
            }
            b'-' | b'0'..=b'9' | b'.' => {
                let mut j = i + 1;
                while j < bytes.len() {
                    let d = bytes[j];
                    let exp_sign = (d == b'+' || d == b'-') && matches!(bytes[j - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let lexeme = &text[i..j];
                let n: f64 = lexeme
                    .parse()
                    .map_err(|_| err(start, format!("bad number `{lexeme}`")))?;
                if !n.is_finite() {
                    return Err(err(start, format!("number `{lexeme}` is not finite")));
                }
                out.push((start, Token::Operand(Operand::Literal(Literal::Num(n)))));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || matches!(bytes[j], b'_' | b'-' | b'.'))
                {
                    j += 1;
                }
                let word = &text[i..j];
                out.push((start, word_token(word).map_err(|m| err(start, m))?));
                i = j;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(err(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

fn word_token(word: &str) -> Result<Token, String> {
    let lit = |l: Literal| Ok(Token::Operand(Operand::Literal(l)));
    match word.to_ascii_lowercase().as_str() {
        "and" => return Ok(Token::And),
        "or" => return Ok(Token::Or),
        "not" => return Ok(Token::Not),
        "true" | "on" => return lit(Literal::Bool(true)),
        "false" | "off" => return lit(Literal::Bool(false)),
        _ => {}
    }
    let parts: Vec<&str> = word.split('.').collect();
    match parts.as_slice() {
        ["device", device, prop] if !device.is_empty() && !prop.is_empty() => {
            Ok(Token::Operand(Operand::Device {
                device_id: device.to_string(),
                property: prop.to_string(),
            }))
        }
        ["context", name] if !name.is_empty() => {
            Ok(Token::Operand(Operand::Context(name.to_string())))
        }
        _ => Err(format!(
            "`{word}` is not a reference; expected device.<id>.<property> or context.<name>"
        )),
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.len)
    }

    fn syntax(&self, message: impl Into<String>) -> ConditionError {
        ConditionError::Syntax { offset: self.offset(), message: message.into() }
    }

    fn parse_or(&mut self) -> Result<ConditionExpr, ConditionError> {
        let mut left = self.parse_and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let right = self.parse_and()?;
            left = left.or(right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<ConditionExpr, ConditionError> {
        let mut left = self.parse_unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let right = self.parse_unary()?;
            left = left.and(right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<ConditionExpr, ConditionError> {
        match self.peek() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(self.parse_unary()?.not())
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.parse_or()?;
                if self.peek() != Some(&Token::RParen) {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            _ => self.parse_compare(),
        }
    }

    fn parse_compare(&mut self) -> Result<ConditionExpr, ConditionError> {
        let left = self.operand()?;
        let op = match self.peek() {
            Some(Token::Op(op)) => *op,
            _ => return Err(self.syntax("expected a comparison operator")),
        };
        self.pos += 1;
        let right = self.operand()?;
        Ok(ConditionExpr::compare(left, op, right))
    }

    fn operand(&mut self) -> Result<Operand, ConditionError> {
        match self.peek() {
            Some(Token::Operand(op)) => {
                let op = op.clone();
                self.pos += 1;
                Ok(op)
            }
            Some(other) => Err(self.syntax(format!("expected an operand, found {other:?}"))),
            None => Err(self.syntax("expected an operand, found end of input")),
        }
    }
}

/// A resolved operand: either a slot in the world-state value vector or a constant.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CheckedOperand {
    Slot(usize),
    Const(Literal),
}

#[derive(Debug, Clone, PartialEq)]
enum CheckedNode {
    Compare { left: CheckedOperand, op: CmpOp, right: CheckedOperand },
    And(Box<CheckedNode>, Box<CheckedNode>),
    Or(Box<CheckedNode>, Box<CheckedNode>),
    Not(Box<CheckedNode>),
}

/// A condition whose references are resolved to state slots and kind-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedCondition {
    expr: ConditionExpr,
    node: CheckedNode,
    slots: Vec<usize>,
    warnings: Vec<String>,
}

impl CheckedCondition {
    pub fn expr(&self) -> &ConditionExpr {
        &self.expr
    }

    /// Distinct state slots read by the condition, ascending.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    /// Non-fatal findings, such as comparing an enumeration with a value it can never take.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn eval(&self, values: &[Literal]) -> bool {
        eval_node(&self.node, values)
    }
}

fn eval_node(node: &CheckedNode, values: &[Literal]) -> bool {
    match node {
        CheckedNode::Compare { left, op, right } => {
            let l = operand_value(left, values);
            let r = operand_value(right, values);
            compare(l, *op, r)
        }
        CheckedNode::And(a, b) => eval_node(a, values) && eval_node(b, values),
        CheckedNode::Or(a, b) => eval_node(a, values) || eval_node(b, values),
        CheckedNode::Not(a) => !eval_node(a, values),
    }
}

fn operand_value<'a>(op: &'a CheckedOperand, values: &'a [Literal]) -> &'a Literal {
    match op {
        CheckedOperand::Slot(i) => &values[*i],
        CheckedOperand::Const(l) => l,
    }
}

pub(crate) fn compare(l: &Literal, op: CmpOp, r: &Literal) -> bool {
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        _ => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) => match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            },
            _ => false,
        },
    }
}

/// Resolves and kind-checks `expr` against the devices and context variables of `spec`.
pub fn compile_condition(
    expr: &ConditionExpr,
    spec: &ScenarioSpec,
) -> Result<CheckedCondition, ConditionError> {
    check_condition(expr, &SlotTable::build(spec))
}

pub(crate) fn check_condition(
    expr: &ConditionExpr,
    table: &SlotTable,
) -> Result<CheckedCondition, ConditionError> {
    let mut warnings = Vec::new();
    let node = check_node(expr, table, &mut warnings)?;
    let mut slots = Vec::new();
    collect_slots(&node, &mut slots);
    slots.sort_unstable();
    slots.dedup();
    Ok(CheckedCondition { expr: expr.clone(), node, slots, warnings })
}

fn collect_slots(node: &CheckedNode, out: &mut Vec<usize>) {
    match node {
        CheckedNode::Compare { left, right, .. } => {
            for op in [left, right] {
                if let CheckedOperand::Slot(s) = op {
                    out.push(*s);
                }
            }
        }
        CheckedNode::And(a, b) | CheckedNode::Or(a, b) => {
            collect_slots(a, out);
            collect_slots(b, out);
        }
        CheckedNode::Not(a) => collect_slots(a, out),
    }
}

fn resolve(op: &Operand, table: &SlotTable) -> Result<(CheckedOperand, LiteralKind), ConditionError> {
    match op {
        Operand::Literal(l) => Ok((CheckedOperand::Const(l.clone()), l.kind())),
        Operand::Device { device_id, property } => table
            .device_slot(device_id, property)
            .map(|s| (CheckedOperand::Slot(s), table.slot_kind(s)))
            .ok_or_else(|| ConditionError::Unresolved { reference: op.to_string() }),
        Operand::Context(name) => table
            .context_slot(name)
            .map(|s| (CheckedOperand::Slot(s), table.slot_kind(s)))
            .ok_or_else(|| ConditionError::Unresolved { reference: op.to_string() }),
    }
}

fn check_node(
    expr: &ConditionExpr,
    table: &SlotTable,
    warnings: &mut Vec<String>,
) -> Result<CheckedNode, ConditionError> {
    Ok(match expr {
        ConditionExpr::Compare { left, op, right } => {
            let (l, lk) = resolve(left, table)?;
            let (r, rk) = resolve(right, table)?;
            if op.is_ordered() {
                if lk != LiteralKind::Numeric || rk != LiteralKind::Numeric {
                    return Err(ConditionError::KindMismatch {
                        message: format!(
                            "`{}` compares {lk} with {rk}; ordered comparisons need numeric operands",
                            op.symbol()
                        ),
                    });
                }
            } else if lk != rk {
                return Err(ConditionError::KindMismatch {
                    message: format!("`{left} {} {right}` compares {lk} with {rk}", op.symbol()),
                });
            }
            for (slot_side, other) in [(&l, &r), (&r, &l)] {
                if let (CheckedOperand::Slot(s), CheckedOperand::Const(c)) = (slot_side, other) {
                    if let Some(kind) = table.slot_domain(*s) {
                        if !op.is_ordered() && !kind.contains(c) {
                            warnings.push(format!(
                                "`{left} {} {right}`: {c} is outside the property's domain",
                                op.symbol()
                            ));
                        }
                    }
                }
            }
            CheckedNode::Compare { left: l, op: *op, right: r }
        }
        ConditionExpr::And(a, b) => CheckedNode::And(
            Box::new(check_node(a, table, warnings)?),
            Box::new(check_node(b, table, warnings)?),
        ),
        ConditionExpr::Or(a, b) => CheckedNode::Or(
            Box::new(check_node(a, table, warnings)?),
            Box::new(check_node(b, table, warnings)?),
        ),
        ConditionExpr::Not(a) => CheckedNode::Not(Box::new(check_node(a, table, warnings)?)),
    })
}
