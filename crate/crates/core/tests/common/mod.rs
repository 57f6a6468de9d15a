//! Expression generators shared by the property and acceptance suites.
#![allow(dead_code)]

use mslab::dsl::{BinOp, EvalArgs, Expr, UnaryOp, Var};
use proptest::prelude::*;

pub fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000, 0u32..4).prop_map(|(m, s)| Expr::constant(m as f64 / 10f64.powi(s as i32))),
        any::<f64>()
            .prop_filter("finite, non-negative", |v| v.is_finite() && *v >= 0.0)
            .prop_map(Expr::constant),
        Just(Expr::var(Var::T)),
        (0usize..3).prop_map(|i| Expr::var(Var::X(i))),
        (0usize..3).prop_map(|i| Expr::var(Var::Y(i))),
        (0usize..2).prop_map(|i| Expr::var(Var::Z(i))),
    ]
}

pub fn any_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 48, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Tanh),
            Just(UnaryOp::Abs),
            Just(UnaryOp::Sgn),
        ];
        let binary = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div)
        ];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, e)| Expr::unary(op, e)),
            (binary, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (inner, -4i32..6).prop_map(|(e, n)| Expr::pow(e, n)),
        ]
    })
}

/// Smooth expressions over `t`, `x1`, `y1`; division only by `1 + e^2`.
pub fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..30).prop_map(|m| Expr::constant(m as f64 / 10.0)),
        Just(Expr::var(Var::T)),
        Just(Expr::var(Var::X(0))),
        Just(Expr::var(Var::Y(0))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Tanh),
        ];
        let binary = prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, e)| Expr::unary(op, e)),
            (binary, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (inner.clone(), 0i32..4).prop_map(|(e, n)| Expr::pow(e, n)),
            (inner.clone(), inner).prop_map(|(n, d)| Expr::binary(
                BinOp::Div,
                n,
                Expr::binary(BinOp::Add, Expr::constant(1.0), Expr::pow(d, 2))
            )),
        ]
    })
}

pub fn at(e: &Expr, t: f64, x: f64, y: f64) -> Option<f64> {
    e.eval(&EvalArgs::new(t, &[x], &[y])).ok()
}
