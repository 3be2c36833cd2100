//! A small arithmetic language for describing the system functions as text.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | ident | ident "(" [ expr { "," expr } ] ")" | "(" expr ")" ;
//! ```
//!
//! Built-in calls are `sin cos exp log abs sqrt` (one argument), `z(i)`,
//! `zd(i, lag)` with a constant lag and `yq(j, i)`. The names `t x u v` are
//! reserved variables; every other bare identifier is a named parameter.

mod ast;
mod lexer;
mod parser;

use std::fmt;

pub use ast::{BinOp, Env, Expr, Func, Var, VarRef};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

/// Where an expression is used; decides which variables it may read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// `phi` components: `t` and parameters.
    History,
    /// Entries of `A`: `t` and parameters.
    Matrix,
    /// `f` components: `t`, `z(i)`, `zd(i, d)`.
    Drift,
    /// `G_i` components: `t`, `z(i)`.
    Impulse,
    /// `g` components: `t`, `yq(j, i)`.
    NonLocal,
    /// `Psi`: `x`.
    Envelope1,
    /// `K`: `u`, `v`.
    Envelope2,
    /// Growth majorant `h`: `t`.
    Growth,
    /// Parameters and numbers only.
    Constant,
}

impl Slot {
    pub fn allows_var(self, v: Var) -> bool {
        match v {
            Var::T => matches!(
                self,
                Slot::History | Slot::Matrix | Slot::Drift | Slot::Impulse | Slot::NonLocal | Slot::Growth
            ),
            Var::X => self == Slot::Envelope1,
            Var::U | Var::V => self == Slot::Envelope2,
        }
    }

    pub fn allows_state(self) -> bool {
        matches!(self, Slot::Drift | Slot::Impulse)
    }

    pub fn allows_delayed(self) -> bool {
        self == Slot::Drift
    }

    pub fn allows_nonlocal(self) -> bool {
        self == Slot::NonLocal
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slot::History => "phi",
            Slot::Matrix => "A",
            Slot::Drift => "f",
            Slot::Impulse => "G",
            Slot::NonLocal => "g",
            Slot::Envelope1 => "Psi",
            Slot::Envelope2 => "K",
            Slot::Growth => "h",
            Slot::Constant => "a constant expression",
        })
    }
}

/// Lexing, parsing and evaluation failures. Positions are 0-based character
/// offsets; messages print them as 1-based columns.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("column {}: unexpected character {ch:?}", offset + 1)]
    Lex { offset: usize, ch: char },
    #[error("column {}: {message}", offset + 1)]
    Syntax { offset: usize, message: String },
    #[error("column {}: {name} takes {expected} argument(s), got {got}", offset + 1)]
    Arity { offset: usize, name: String, expected: usize, got: usize },
    #[error("column {}: '{name}' is not allowed in {slot}", offset + 1)]
    IllegalVariable { offset: usize, name: String, slot: Slot },
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} is undefined at {arg}")]
    Domain { func: &'static str, arg: f64 },
}

impl ExprError {
    /// Source offset, for errors raised before evaluation.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ExprError::Lex { offset, .. }
            | ExprError::Syntax { offset, .. }
            | ExprError::Arity { offset, .. }
            | ExprError::IllegalVariable { offset, .. } => Some(*offset),
            _ => None,
        }
    }
}

impl From<ExprError> for crate::error::CallbackError {
    fn from(e: ExprError) -> Self {
        crate::error::CallbackError(e.to_string())
    }
}

/// Tokenizes and parses `text` for `slot`.
pub fn parse_str(text: &str, slot: Slot) -> Result<Expr, ExprError> {
    parse(&tokenize(text)?, slot)
}
