//! Recursive-descent parser and evaluator for scalar math expressions.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    := term { ("+" | "-") term }
//! term    := factor { ("*" | "/") factor }
//! factor  := "-" factor | power
//! power   := atom [ "^" factor ]
//! atom    := NUMBER | CONST | VAR | FUNC "(" expr ")" | "(" expr ")"
//! FUNC    := "sin" | "cos" | "exp" | "sqrt" | "abs"
//! CONST   := "pi" | "e"
//! VAR     := "x" (dim 1 only) | "x1" .. "xd"
//! NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! parses as `-(x^2)`. Whitespace is insignificant.

use std::fmt;

use thiserror::Error;

/// Expression tree. Variables are referenced by zero-based index.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: found {found}, expected {}", expected.join(", "))]
    Unexpected {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable `{name}` at offset {offset} exceeds dimension {dim}")]
    VariableOutOfRange {
        offset: usize,
        name: String,
        dim: usize,
    },
    #[error("malformed number at offset {offset}")]
    BadNumber { offset: usize },
}

impl ParseError {
    /// Byte offset into the source where the error was detected.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Unexpected { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. }
            | ParseError::BadNumber { offset } => *offset,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("square root of negative value in `{subexpr}`")]
    NegativeSqrt { subexpr: String },
    #[error("non-finite result in `{subexpr}`")]
    NonFinite { subexpr: String },
    #[error("variable x{} not bound (got {given} values)", index + 1)]
    UnboundVariable { index: usize, given: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "number `{v}`"),
            Token::Ident(s) => write!(f, "`{s}`"),
            Token::Plus => write!(f, "`+`"),
            Token::Minus => write!(f, "`-`"),
            Token::Star => write!(f, "`*`"),
            Token::Slash => write!(f, "`/`"),
            Token::Caret => write!(f, "`^`"),
            Token::LParen => write!(f, "`(`"),
            Token::RParen => write!(f, "`)`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Token::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Token::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Token::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Token::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Token::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(ParseError::BadNumber { offset: start });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent suffix only when followed by digits; otherwise the
                // `e` belongs to the next token (the Euler constant).
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
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| ParseError::BadNumber { offset: start })?;
                out.push((Token::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Unexpected {
                    offset: i,
                    found: format!("`{}`", &src[i..i + c.len_utf8_guess()]),
                    expected: vec!["number", "identifier", "operator", "`(`", "`)`"],
                })
            }
        }
    }
    Ok(out)
}

trait Utf8Guess {
    fn len_utf8_guess(self) -> usize;
}

impl Utf8Guess for u8 {
    fn len_utf8_guess(self) -> usize {
        match self {
            0x00..=0x7f => 1,
            0xc0..=0xdf => 2,
            0xe0..=0xef => 3,
            _ => 4,
        }
    }
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    dim: usize,
    src_len: usize,
}

const ATOM_EXPECTED: [&str; 4] = ["number", "identifier", "`(`", "`-`"];

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Token, usize)> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&(Token, usize)> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn unexpected(&self, expected: Vec<&'static str>) -> ParseError {
        match self.peek() {
            Some((tok, off)) => ParseError::Unexpected {
                offset: *off,
                found: tok.to_string(),
                expected,
            },
            None => ParseError::Unexpected {
                offset: self.src_len,
                found: "end of input".to_string(),
                expected,
            },
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some((Token::RParen, _)) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(vec!["`)`"])),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some((Token::Plus, _)) => BinOp::Add,
                Some((Token::Minus, _)) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some((Token::Star, _)) => BinOp::Mul,
                Some((Token::Slash, _)) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if let Some((Token::Minus, _)) = self.peek() {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some((Token::Caret, _)) = self.peek() {
            self.pos += 1;
            // Exponent at factor level: right-associative, admits unary minus.
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, off) = match self.bump() {
            Some(t) => (t.0.clone(), t.1),
            None => {
                self.pos -= 1;
                return Err(self.unexpected(ATOM_EXPECTED.to_vec()));
            }
        };
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => self.ident(&name, off),
            _ => {
                self.pos -= 1;
                Err(self.unexpected(ATOM_EXPECTED.to_vec()))
            }
        }
    }

    fn ident(&mut self, name: &str, off: usize) -> Result<Expr, ParseError> {
        let func = match name {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            _ => None,
        };
        if let Some(op) = func {
            match self.peek() {
                Some((Token::LParen, _)) => {
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Unary(op, Box::new(arg)));
                }
                _ => return Err(self.unexpected(vec!["`(`"])),
            }
        }
        if name == "x" {
            if self.dim == 1 {
                return Ok(Expr::Var(0));
            }
            return Err(ParseError::VariableOutOfRange {
                offset: off,
                name: name.to_string(),
                dim: self.dim,
            });
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest
                    .parse()
                    .map_err(|_| ParseError::BadNumber { offset: off })?;
                if idx >= 1 && idx <= self.dim {
                    return Ok(Expr::Var(idx - 1));
                }
                return Err(ParseError::VariableOutOfRange {
                    offset: off,
                    name: name.to_string(),
                    dim: self.dim,
                });
            }
        }
        Err(ParseError::UnknownIdentifier {
            offset: off,
            name: name.to_string(),
        })
    }
}

/// Parse `src` as an expression over `dim` variables.
pub fn parse(src: &str, dim: usize) -> Result<Expr, ParseError> {
    let tokens = lex(src)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        dim,
        src_len: src.len(),
    };
    let expr = parser.expr()?;
    if parser.pos < tokens.len() {
        return Err(parser.unexpected(vec!["operator", "end of input"]));
    }
    Ok(expr)
}

impl Expr {
    /// Evaluate with the given variable bindings.
    ///
    /// Division by zero, negative square roots, and any non-finite
    /// intermediate surface as errors instead of silent NaN/inf.
    pub fn eval(&self, vars: &[f64]) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => {
                if *i >= vars.len() {
                    return Err(EvalError::UnboundVariable {
                        index: *i,
                        given: vars.len(),
                    });
                }
                vars[*i]
            }
            Expr::Unary(op, inner) => {
                let x = inner.eval(vars)?;
                match op {
                    UnaryOp::Neg => -x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::NegativeSqrt {
                                subexpr: self.to_string(),
                            });
                        }
                        x.sqrt()
                    }
                    UnaryOp::Abs => x.abs(),
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(vars)?;
                let b = r.eval(vars)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero {
                                subexpr: self.to_string(),
                            });
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite {
                subexpr: self.to_string(),
            });
        }
        Ok(v)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, inner) => inner.max_var(),
            Expr::Binary(_, l, r) => match (l.max_var(), r.max_var()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    /// Prints with the minimal parentheses that reparse to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn paren(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
            write!(f, "(")?;
            e.fmt(f)?;
            write!(f, ")")
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Unary(UnaryOp::Neg, inner) => {
                write!(f, "-")?;
                if inner.precedence() < 3 {
                    paren(f, inner)
                } else {
                    inner.fmt(f)
                }
            }
            Expr::Unary(op, inner) => {
                let name = match op {
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}(")?;
                inner.fmt(f)?;
                write!(f, ")")
            }
            Expr::Binary(op, l, r) => {
                let prec = self.precedence();
                let (sym, left_assoc) = match op {
                    BinOp::Add => ("+", true),
                    BinOp::Sub => ("-", true),
                    BinOp::Mul => ("*", true),
                    BinOp::Div => ("/", true),
                    BinOp::Pow => ("^", false),
                };
                if left_assoc {
                    if l.precedence() < prec {
                        paren(f, l)?;
                    } else {
                        l.fmt(f)?;
                    }
                    write!(f, "{sym}")?;
                    // Right operand of a left-associative operator needs
                    // parentheses at equal precedence too: x-(y-z) != x-y-z.
                    if r.precedence() <= prec {
                        paren(f, r)?;
                    } else {
                        r.fmt(f)?;
                    }
                } else {
                    // `^` is right-associative; its base binds tighter than
                    // unary minus, so Neg and Pow bases both need parens.
                    if l.precedence() <= prec {
                        paren(f, l)?;
                    } else {
                        l.fmt(f)?;
                    }
                    write!(f, "{sym}")?;
                    if r.precedence() < 3 {
                        paren(f, r)?;
                    } else {
                        r.fmt(f)?;
                    }
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(src: &str, x: f64) -> f64 {
        parse(src, 1).unwrap().eval(&[x]).unwrap()
    }

    #[test]
    fn product_of_binomials() {
        assert_eq!(eval1("(x+1)*(x+2)", 0.0), 2.0);
    }

    #[test]
    fn sine_power_peak() {
        // The first peak of sin(5.1*pi*x+0.5)^6 has value 1.
        let v = eval1("sin(5.1*pi*x+0.5)^6", 0.066832364);
        assert!((v - 1.0).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn two_variable_expression() {
        let e = parse("x1^2+x2^2-cos(18*x1)-cos(18*x2)", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), -2.0);
    }

    #[test]
    fn syntax_error_carries_offset() {
        let err = parse("2*^3", 1).unwrap_err();
        assert_eq!(err.offset(), 2);
        assert!(matches!(err, ParseError::Unexpected { .. }));
    }

    #[test]
    fn constants() {
        assert_eq!(Expr::Const(7.0).eval(&[]).unwrap(), 7.0);
        assert_eq!(eval1("e^0", 0.0), 1.0);
        assert!((eval1("pi", 0.0) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = parse("1/x", 1).unwrap();
        assert!(matches!(
            e.eval(&[0.0]),
            Err(EvalError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn negative_sqrt_is_an_error() {
        let e = parse("sqrt(x)", 1).unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(EvalError::NegativeSqrt { .. })));
    }

    #[test]
    fn overflow_is_an_error() {
        let e = parse("exp(x)", 1).unwrap();
        assert!(matches!(e.eval(&[1e6]), Err(EvalError::NonFinite { .. })));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        // -x^2 = -(x^2)
        assert_eq!(eval1("-x^2", 3.0), -9.0);
        // (-x)^2 must be written explicitly
        assert_eq!(eval1("(-x)^2", 3.0), 9.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval1("2^3^2", 0.0), 512.0);
    }

    #[test]
    fn power_admits_unary_exponent() {
        assert_eq!(eval1("2^-2", 0.0), 0.25);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(eval1("1e-4", 0.0), 1e-4);
        assert_eq!(eval1("2.5E2", 0.0), 250.0);
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(
            parse("foo(3)", 1),
            Err(ParseError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn variable_out_of_range() {
        assert!(matches!(
            parse("x3", 2),
            Err(ParseError::VariableOutOfRange { .. })
        ));
        // plain `x` is only valid in one dimension
        assert!(matches!(
            parse("x", 2),
            Err(ParseError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn function_requires_parenthesis() {
        let err = parse("sin x", 1).unwrap_err();
        assert!(matches!(err, ParseError::Unexpected { .. }));
    }

    #[test]
    fn trailing_garbage_rejected() {
        let err = parse("1+2 3", 1).unwrap_err();
        assert_eq!(err.offset(), 4);
    }

    #[test]
    fn display_roundtrips_structurally() {
        for src in [
            "(x+1)*(x+2)",
            "sin(5.1*pi*x+0.5)^6",
            "-x^2",
            "(-x)^2",
            "x-(1-x)",
            "x/(2/x)",
            "2^3^2",
            "x^-2",
            "abs(-x)+sqrt(x)",
        ] {
            let tree = parse(src, 1).unwrap();
            let printed = tree.to_string();
            let reparsed = parse(&printed, 1).unwrap();
            assert_eq!(tree, reparsed, "source `{src}` printed as `{printed}`");
        }
    }
}
