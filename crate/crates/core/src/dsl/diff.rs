//! Symbolic differentiation with light algebraic simplification.

use super::ast::{BinOp, Expr, UnaryOp, Var};

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn finite(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

pub(crate) fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        e => Expr::unary(UnaryOp::Neg, e),
    }
}

pub(crate) fn add(l: Expr, r: Expr) -> Expr {
    if is_const(&l, 0.0) {
        return r;
    }
    if is_const(&r, 0.0) {
        return l;
    }
    if let (Some(a), Some(b)) = (as_const(&l), as_const(&r)) {
        if let Some(c) = finite(a + b) {
            return c;
        }
    }
    if let Expr::Unary(UnaryOp::Neg, inner) = r {
        return sub(l, *inner);
    }
    Expr::binary(BinOp::Add, l, r)
}

pub(crate) fn sub(l: Expr, r: Expr) -> Expr {
    if is_const(&r, 0.0) {
        return l;
    }
    if is_const(&l, 0.0) {
        return neg(r);
    }
    if let (Some(a), Some(b)) = (as_const(&l), as_const(&r)) {
        if let Some(c) = finite(a - b) {
            return c;
        }
    }
    if l == r {
        return Expr::Const(0.0);
    }
    Expr::binary(BinOp::Sub, l, r)
}

pub(crate) fn mul(l: Expr, r: Expr) -> Expr {
    if is_const(&l, 0.0) || is_const(&r, 0.0) {
        return Expr::Const(0.0);
    }
    if is_const(&l, 1.0) {
        return r;
    }
    if is_const(&r, 1.0) {
        return l;
    }
    if is_const(&l, -1.0) {
        return neg(r);
    }
    if is_const(&r, -1.0) {
        return neg(l);
    }
    match (as_const(&l), as_const(&r)) {
        (Some(a), Some(b)) => {
            if let Some(c) = finite(a * b) {
                return c;
            }
        }
        // keep constants on the left and merge c1*(c2*u)
        (None, Some(_)) => return mul(r, l),
        (Some(a), None) => {
            if let Expr::Binary(BinOp::Mul, il, ir) = &r {
                if let Some(b) = as_const(il) {
                    if let Some(c) = finite(a * b) {
                        return mul(c, (**ir).clone());
                    }
                }
            }
        }
        (None, None) => {}
    }
    Expr::binary(BinOp::Mul, l, r)
}

pub(crate) fn div(l: Expr, r: Expr) -> Expr {
    if is_const(&r, 1.0) {
        return l;
    }
    if is_const(&l, 0.0) && !is_const(&r, 0.0) {
        return Expr::Const(0.0);
    }
    if let (Some(a), Some(b)) = (as_const(&l), as_const(&r)) {
        if b != 0.0 {
            if let Some(c) = finite(a / b) {
                return c;
            }
        }
    }
    Expr::binary(BinOp::Div, l, r)
}

pub(crate) fn pow(base: Expr, n: i32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => base,
        _ => match as_const(&base) {
            Some(b) if b != 0.0 || n > 0 => finite(b.powi(n)).unwrap_or(Expr::pow(base, n)),
            _ => Expr::pow(base, n),
        },
    }
}

impl Expr {
    /// Derivative with respect to `v`, simplified.
    pub fn differentiate(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
            Expr::Unary(op, u) => {
                let du = u.differentiate(v);
                if is_const(&du, 0.0) {
                    return Expr::Const(0.0);
                }
                let u = (**u).clone();
                let outer = match op {
                    UnaryOp::Neg => return neg(du),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, u),
                    UnaryOp::Cos => neg(Expr::unary(UnaryOp::Sin, u)),
                    UnaryOp::Exp => Expr::unary(UnaryOp::Exp, u),
                    UnaryOp::Tanh => sub(Expr::Const(1.0), pow(Expr::unary(UnaryOp::Tanh, u), 2)),
                    UnaryOp::Abs => Expr::unary(UnaryOp::Sgn, u),
                    UnaryOp::Sgn => return Expr::Const(0.0),
                };
                mul(outer, du)
            }
            Expr::Binary(op, l, r) => {
                let dl = l.differentiate(v);
                let dr = r.differentiate(v);
                match op {
                    BinOp::Add => add(dl, dr),
                    BinOp::Sub => sub(dl, dr),
                    BinOp::Mul => add(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                    BinOp::Div => {
                        if is_const(&dr, 0.0) {
                            div(dl, (**r).clone())
                        } else {
                            div(
                                sub(mul(dl, (**r).clone()), mul((**l).clone(), dr)),
                                pow((**r).clone(), 2),
                            )
                        }
                    }
                }
            }
            Expr::Pow(u, n) => {
                let du = u.differentiate(v);
                if *n == 0 || is_const(&du, 0.0) {
                    return Expr::Const(0.0);
                }
                mul(mul(Expr::Const(*n as f64), pow((**u).clone(), n - 1)), du)
            }
        }
    }

    /// Bottom-up simplification using the same rules as differentiation.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(UnaryOp::Neg, e) => neg(e.simplify()),
            Expr::Unary(op, e) => {
                let s = e.simplify();
                match as_const(&s) {
                    Some(c) => finite(op.apply(c)).unwrap_or_else(|| Expr::unary(*op, s)),
                    None => Expr::unary(*op, s),
                }
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.simplify(), r.simplify());
                match op {
                    BinOp::Add => add(l, r),
                    BinOp::Sub => sub(l, r),
                    BinOp::Mul => mul(l, r),
                    BinOp::Div => div(l, r),
                }
            }
            Expr::Pow(b, n) => pow(b.simplify(), *n),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::dsl::{parse_expression, EvalArgs, Var};

    fn d(s: &str, v: Var) -> String {
        parse_expression(s).unwrap().differentiate(v).to_string()
    }

    #[test]
    fn printed_derivatives() {
        assert_eq!(d("sin(y1)", Var::Y(0)), "cos(y1)");
        assert_eq!(d("x1^2 - 1", Var::X(0)), "2*x1");
        assert_eq!(d("-x1 + sin(y1)", Var::X(0)), "-1");
        assert_eq!(d("x1^2 - 1", Var::Y(0)), "0");
        assert_eq!(d("3*x1^3", Var::X(0)), "9*x1^2");
        assert_eq!(d("cos(x1)", Var::X(0)), "-sin(x1)");
    }

    #[test]
    fn mixed_derivative_value() {
        let e = parse_expression("x1*y1 + y1^2").unwrap().differentiate(Var::Y(0));
        assert_eq!(e.eval(&EvalArgs::new(0.0, &[1.0], &[2.0])).unwrap(), 5.0);
    }

    #[test]
    fn quotient_and_chain() {
        let e = parse_expression("exp(x1)/(1 + x1^2)").unwrap();
        let de = e.differentiate(Var::X(0));
        let x: f64 = 0.7;
        let exact = x.exp() * (1.0 + x * x - 2.0 * x) / (1.0 + x * x).powi(2);
        let got = de.eval(&EvalArgs::new(0.0, &[x], &[])).unwrap();
        assert!((got - exact).abs() < 1e-14);
    }

    #[test]
    fn simplify_folds_constants() {
        let e = parse_expression("0*x1 + 1*(2 + 3)*y1").unwrap().simplify();
        assert_eq!(e.to_string(), "5*y1");
    }
}
