//! Coefficient expressions: parsing, printing, evaluation and symbolic
//! differentiation.

mod ast;
mod diff;
mod eval;
mod field;
mod parser;

pub use ast::{BinOp, Expr, UnaryOp, Var};
pub use eval::{EvalArgs, EvalError};
pub use field::{ArgSignature, CoefficientField, FieldError};
pub use parser::{parse_expression, ParseError};
