//! Pratt parser for coefficient expressions.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, prefix `-`, `^`.
//! Binary operators associate left except `^`, which associates right and
//! only accepts a constant integer exponent.

use super::ast::{BinOp, Expr, UnaryOp, Var};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at column {}: {message}", .pos + 1)]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier \"{name}\" at column {}", .pos + 1)]
    UnknownIdentifier { name: String, pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        pos,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s = &text[start..i];
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(start, format!("malformed number \"{s}\"")))?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                pos: start,
            });
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(syntax(start, format!("unexpected character '{c}'"))),
            };
            out.push(Token { tok, pos: start });
            i += c.len_utf8();
        }
    }
    Ok(out)
}

fn variable(name: &str) -> Option<Var> {
    if name == "t" {
        return Some(Var::T);
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let idx: usize = digits.parse().ok()?;
    let i = idx - 1;
    match head {
        "x" => Some(Var::X(i)),
        "y" => Some(Var::Y(i)),
        "z" => Some(Var::Z(i)),
        _ => None,
    }
}

const PREFIX_BP: u8 = 30;

fn infix_bp(op: char) -> Option<(u8, u8)> {
    Some(match op {
        '+' | '-' => (10, 11),
        '*' | '/' => (20, 21),
        '^' => (41, 40),
        _ => return None,
    })
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.idx).cloned();
        self.idx += 1;
        t
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Token { tok: Tok::RParen, .. }) => Ok(()),
            Some(t) => Err(syntax(t.pos, "expected ')'")),
            None => Err(syntax(self.end, "expected ')' before end of input")),
        }
    }

    fn parse_bp(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_prefix()?;
        loop {
            let (op, pos) = match self.peek() {
                Some(Token {
                    tok: Tok::Op(op),
                    pos,
                }) => (*op, *pos),
                Some(Token { tok: Tok::RParen, .. }) | None => break,
                Some(t) => return Err(syntax(t.pos, "expected an operator")),
            };
            let Some((l_bp, r_bp)) = infix_bp(op) else {
                return Err(syntax(pos, format!("unknown operator '{op}'")));
            };
            if l_bp < min_bp {
                break;
            }
            self.next();
            let rhs = self.parse_bp(r_bp)?;
            lhs = match op {
                '^' => {
                    let n = constant_integer(&rhs)
                        .ok_or_else(|| syntax(pos, "exponent must be a constant integer"))?;
                    Expr::pow(lhs, n)
                }
                '+' => Expr::binary(BinOp::Add, lhs, rhs),
                '-' => Expr::binary(BinOp::Sub, lhs, rhs),
                '*' => Expr::binary(BinOp::Mul, lhs, rhs),
                '/' => Expr::binary(BinOp::Div, lhs, rhs),
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        let Some(token) = self.next() else {
            return Err(syntax(pos, "unexpected end of input"));
        };
        match token.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op('-') => {
                // A literal directly after '-' folds into a negative constant,
                // unless a '^' follows (since -2^2 means -(2^2)).
                if let (Some(Token { tok: Tok::Num(v), .. }), next) =
                    (self.tokens.get(self.idx).cloned(), self.tokens.get(self.idx + 1))
                {
                    if !matches!(
                        next,
                        Some(Token {
                            tok: Tok::Op('^'),
                            ..
                        })
                    ) {
                        self.idx += 1;
                        return Ok(Expr::Const(-v));
                    }
                }
                let e = self.parse_bp(PREFIX_BP)?;
                Ok(Expr::unary(UnaryOp::Neg, e))
            }
            Tok::Op(op) => Err(syntax(token.pos, format!("unexpected operator '{op}'"))),
            Tok::LParen => {
                let e = self.parse_bp(0)?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::RParen => Err(syntax(token.pos, "unexpected ')'")),
            Tok::Ident(name) => {
                if let Some(op) = UnaryOp::function(&name) {
                    match self.next() {
                        Some(Token { tok: Tok::LParen, .. }) => {}
                        _ => {
                            return Err(syntax(
                                token.pos,
                                format!("expected '(' after function \"{name}\""),
                            ))
                        }
                    }
                    let arg = self.parse_bp(0)?;
                    self.expect_rparen()?;
                    Ok(Expr::unary(op, arg))
                } else if let Some(v) = variable(&name) {
                    Ok(Expr::Var(v))
                } else {
                    Err(ParseError::UnknownIdentifier { name, pos: token.pos })
                }
            }
        }
    }
}

/// Folds a constant-only exponent expression to an `i32`.
fn constant_integer(e: &Expr) -> Option<i32> {
    fn fold(e: &Expr) -> Option<f64> {
        match e {
            Expr::Const(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Unary(UnaryOp::Neg, a) => fold(a).map(|v| -v),
            Expr::Unary(_, _) => None,
            Expr::Binary(op, l, r) => {
                let (l, r) = (fold(l)?, fold(r)?);
                Some(match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => l / r,
                })
            }
            Expr::Pow(b, n) => fold(b).map(|v| v.powi(*n)),
        }
    }
    let v = fold(e)?;
    if v.is_finite() && v.fract() == 0.0 && v.abs() <= i32::MAX as f64 {
        Some(v as i32)
    } else {
        None
    }
}

/// Parses an expression over `t`, `x1..`, `y1..`, `z1..`.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let mut p = Parser {
        tokens,
        idx: 0,
        end: text.len(),
    };
    let e = p.parse_bp(0)?;
    if let Some(t) = p.peek() {
        return Err(syntax(t.pos, "unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::Var(Var::X(i))
    }

    #[test]
    fn neg_plus_sin() {
        let e = parse_expression("-x1 + sin(y1)").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Add,
                Expr::unary(UnaryOp::Neg, x(0)),
                Expr::unary(UnaryOp::Sin, Expr::Var(Var::Y(0)))
            )
        );
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        let err = parse_expression("2*a").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "a".into(),
                pos: 2
            }
        );
        assert!(err.to_string().contains("\"a\""));
    }

    #[test]
    fn power_binds_tighter_than_minus() {
        let e = parse_expression("x1^2 - 1").unwrap();
        assert_eq!(e, Expr::binary(BinOp::Sub, Expr::pow(x(0), 2), Expr::Const(1.0)));
        let e = parse_expression("-x1^2").unwrap();
        assert_eq!(e, Expr::unary(UnaryOp::Neg, Expr::pow(x(0), 2)));
        let e = parse_expression("-2^2").unwrap();
        assert_eq!(e, Expr::unary(UnaryOp::Neg, Expr::pow(Expr::Const(2.0), 2)));
    }

    #[test]
    fn associativity() {
        let e = parse_expression("x1 - x2 - x3").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Sub, Expr::binary(BinOp::Sub, x(0), x(1)), x(2))
        );
        // right-assoc power with constant folding of the exponent tower
        let e = parse_expression("x1^2^3").unwrap();
        assert_eq!(e, Expr::pow(x(0), 8));
        let e = parse_expression("x1^-2").unwrap();
        assert_eq!(e, Expr::pow(x(0), -2));
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(
            parse_expression(" x1*  y2 ").unwrap(),
            parse_expression("x1*y2").unwrap()
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_expression("x1 + * 2").unwrap_err() {
            ParseError::Syntax { pos, .. } => assert_eq!(pos, 5),
            e => panic!("{e:?}"),
        }
        assert!(parse_expression("sin(x1").is_err());
        assert!(parse_expression("x1^y1").is_err());
        assert!(parse_expression("x1^1.5").is_err());
        assert!(parse_expression("").is_err());
        assert!(parse_expression("x0").is_err());
        assert!(parse_expression("x1 x2").is_err());
        assert!(parse_expression("3 $ 4").is_err());
    }

    #[test]
    fn printer_examples() {
        for s in [
            "-x1 + sin(y1)",
            "x1^2 - 1",
            "2*x1",
            "-(2)",
            "(-x1)^2",
            "x1 - (x2 - x3)",
        ] {
            assert_eq!(parse_expression(s).unwrap().to_string(), s);
        }
    }
}
