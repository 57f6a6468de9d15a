use super::ast::{Expr, Var};
use super::eval::{EvalArgs, EvalError};
use super::parser::{parse_expression, ParseError};
use thiserror::Error;

/// Which arguments a coefficient may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgSignature {
    pub t: bool,
    pub x: bool,
    pub y: bool,
}

impl ArgSignature {
    /// b, c, sigma, H: functions of (x, y).
    pub const XY: ArgSignature = ArgSignature {
        t: false,
        x: true,
        y: true,
    };
    /// F: functions of (t, x, y).
    pub const TXY: ArgSignature = ArgSignature {
        t: true,
        x: true,
        y: true,
    };
    /// G: functions of (t, y).
    pub const TY: ArgSignature = ArgSignature {
        t: true,
        x: false,
        y: true,
    };

    pub fn describe(self) -> String {
        let mut parts = Vec::new();
        if self.t {
            parts.push("t");
        }
        if self.x {
            parts.push("x");
        }
        if self.y {
            parts.push("y");
        }
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("{field}[{row},{col}]: {source}")]
    Parse {
        field: String,
        row: usize,
        col: usize,
        source: ParseError,
    },
    #[error("{field}: expected {rows}x{cols} entries, found {found}")]
    Shape {
        field: String,
        rows: usize,
        cols: usize,
        found: usize,
    },
    #[error("argument-signature rule: {field} may only depend on {allowed}, but entry [{row},{col}] references {var}")]
    Signature {
        field: String,
        allowed: String,
        row: usize,
        col: usize,
        var: String,
    },
    #[error("{field}[{row},{col}] references {var}, outside the declared dimensions (d1={d1}, d2={d2})")]
    OutOfRange {
        field: String,
        row: usize,
        col: usize,
        var: String,
        d1: usize,
        d2: usize,
    },
}

/// A matrix of expressions, stored row-major. Vectors have `cols == 1`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Expr>,
    pub signature: ArgSignature,
}

impl CoefficientField {
    pub fn new(
        name: &str,
        rows: usize,
        cols: usize,
        entries: Vec<Expr>,
        signature: ArgSignature,
    ) -> Result<Self, FieldError> {
        if entries.len() != rows * cols {
            return Err(FieldError::Shape {
                field: name.to_string(),
                rows,
                cols,
                found: entries.len(),
            });
        }
        Ok(CoefficientField {
            name: name.to_string(),
            rows,
            cols,
            entries,
            signature,
        })
    }

    /// Parses row-major expression strings.
    pub fn parse(
        name: &str,
        rows: usize,
        cols: usize,
        texts: &[impl AsRef<str>],
        signature: ArgSignature,
    ) -> Result<Self, FieldError> {
        if texts.len() != rows * cols {
            return Err(FieldError::Shape {
                field: name.to_string(),
                rows,
                cols,
                found: texts.len(),
            });
        }
        let entries = texts
            .iter()
            .enumerate()
            .map(|(k, s)| {
                parse_expression(s.as_ref()).map_err(|source| FieldError::Parse {
                    field: name.to_string(),
                    row: k / cols,
                    col: k % cols,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, rows, cols, entries, signature)
    }

    /// Checks the argument signature and variable index bounds.
    pub fn validate(&self, d1: usize, d2: usize) -> Result<(), FieldError> {
        for (k, e) in self.entries.iter().enumerate() {
            let (row, col) = (k / self.cols, k % self.cols);
            for v in e.variables() {
                let allowed = match v {
                    Var::T => self.signature.t,
                    Var::X(_) => self.signature.x,
                    Var::Y(_) => self.signature.y,
                    Var::Z(_) => false,
                };
                if !allowed {
                    return Err(FieldError::Signature {
                        field: self.name.clone(),
                        allowed: self.signature.describe(),
                        row,
                        col,
                        var: v.to_string(),
                    });
                }
                let in_range = match v {
                    Var::X(i) => i < d1,
                    Var::Y(i) => i < d2,
                    _ => true,
                };
                if !in_range {
                    return Err(FieldError::OutOfRange {
                        field: self.name.clone(),
                        row,
                        col,
                        var: v.to_string(),
                        d1,
                        d2,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True if any entry references a variable of the given kind.
    pub fn depends_on(&self, pred: impl Fn(Var) -> bool) -> bool {
        self.entries.iter().any(|e| e.variables().into_iter().any(&pred))
    }

    pub fn depends_on_x(&self) -> bool {
        self.depends_on(|v| matches!(v, Var::X(_)))
    }

    pub fn depends_on_y(&self) -> bool {
        self.depends_on(|v| matches!(v, Var::Y(_)))
    }

    pub fn is_zero(&self) -> bool {
        self.entries
            .iter()
            .all(|e| matches!(e, Expr::Const(c) if *c == 0.0))
    }

    /// Evaluates every entry into `out` (row-major).
    pub fn eval_into(&self, args: &EvalArgs<'_>, out: &mut [f64]) -> Result<(), EvalError> {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(args)?;
        }
        Ok(())
    }

    pub fn eval(&self, args: &EvalArgs<'_>) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.entries.len()];
        self.eval_into(args, &mut out)?;
        Ok(out)
    }

    /// Entry-wise derivative with respect to `v`, same shape.
    pub fn differentiate(&self, v: Var) -> CoefficientField {
        CoefficientField {
            name: format!("d{}/d{}", self.name, v),
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.differentiate(v)).collect(),
            signature: self.signature,
        }
    }
}
