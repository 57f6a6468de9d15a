use super::ast::{BinOp, Expr, Var};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in \"{node}\"")]
    DivisionByZero { node: String },
    #[error("non-finite value in \"{node}\"")]
    NonFinite { node: String },
    #[error("variable {var} is out of range (x has {nx}, y has {ny}, z has {nz} components)")]
    MissingVariable {
        var: String,
        nx: usize,
        ny: usize,
        nz: usize,
    },
}

/// Arguments for evaluating an expression.
#[derive(Debug, Clone, Copy)]
pub struct EvalArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
}

impl<'a> EvalArgs<'a> {
    pub fn new(t: f64, x: &'a [f64], y: &'a [f64]) -> Self {
        EvalArgs { t, x, y, z: &[] }
    }

    pub fn with_z(mut self, z: &'a [f64]) -> Self {
        self.z = z;
        self
    }

    fn lookup(&self, v: Var) -> Option<f64> {
        match v {
            Var::T => Some(self.t),
            Var::X(i) => self.x.get(i).copied(),
            Var::Y(i) => self.y.get(i).copied(),
            Var::Z(i) => self.z.get(i).copied(),
        }
    }
}

impl Expr {
    /// Evaluates the tree. Fails on division by zero or any non-finite
    /// intermediate, naming the offending sub-expression.
    pub fn eval(&self, args: &EvalArgs<'_>) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(var) => args.lookup(*var).ok_or_else(|| EvalError::MissingVariable {
                var: var.to_string(),
                nx: args.x.len(),
                ny: args.y.len(),
                nz: args.z.len(),
            })?,
            Expr::Unary(op, e) => op.apply(e.eval(args)?),
            Expr::Binary(op, l, r) => {
                let a = l.eval(args)?;
                let b = r.eval(args)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero {
                                node: self.to_string(),
                            });
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, n) => {
                let b = base.eval(args)?;
                if b == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero {
                        node: self.to_string(),
                    });
                }
                b.powi(*n)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite {
                node: self.to_string(),
            })
        }
    }
}
