//! Recursive-descent parser for the scalar expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' exponent)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! func   := sin | cos | exp | log | sqrt | neg
//! ident  := t[0-9]+ | x[0-9]+ | p[0-9]+_[0-9]+
//! ```
//!
//! The exponent is a constant: an optionally negated number, possibly parenthesized.

use super::{Expr, UnaryOp};
use crate::chart::Chart;
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < bytes.len() {
        let c = bytes[k];
        if c.is_ascii_whitespace() {
            k += 1;
            continue;
        }
        let start = k;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while k < bytes.len() && (bytes[k].is_ascii_digit() || bytes[k] == b'.') {
                    k += 1;
                }
                if k < bytes.len() && (bytes[k] == b'e' || bytes[k] == b'E') {
                    let mut j = k + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        k = j;
                    }
                }
                let text = &src[start..k];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_') {
                    k += 1;
                }
                out.push((Tok::Ident(src[start..k].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        k += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    chart: Chart,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("expected {wanted}, found {}", self.peek().describe()),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc * self.factor()?;
                }
                Tok::Slash => {
                    self.bump();
                    acc = acc / self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.factor()?);
        }
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.exponent()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<f64, ParseError> {
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let negate = *self.peek() == Tok::Minus;
        if negate {
            self.bump();
        }
        let value = match self.peek() {
            Tok::Num(v) => *v,
            _ => return Err(self.unexpected("a constant exponent")),
        };
        self.bump();
        if parenthesized {
            self.expect(Tok::RParen)?;
        }
        Ok(if negate { -value } else { value })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::constant(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(op) = UnaryOp::from_name(&name) {
                    if *self.peek() == Tok::LParen {
                        self.bump();
                        let arg = self.expr()?;
                        self.expect(Tok::RParen)?;
                        return Ok(Expr::unary(op, arg));
                    }
                    return Err(self.unexpected(&format!("`(` after `{name}`")));
                }
                match self.chart.lookup(&name) {
                    Some(v) => Ok(Expr::var(v)),
                    None => Err(ParseError::UnknownVariable { name, offset }),
                }
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }
}

/// Parses `source` against the variables declared by `chart`.
pub fn parse_scalar(source: &str, chart: Chart) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0, chart };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Var;

    fn chart() -> Chart {
        Chart::new(2, 2).unwrap()
    }

    #[test]
    fn grammar_membership() {
        let e = parse_scalar("sin(x1)^2 + t1*p1_1", chart()).unwrap();
        assert_eq!(e.variables(), vec![Var::T(0), Var::X(0), Var::P { i: 0, a: 0 }]);
    }

    #[test]
    fn dangling_operator() {
        let err = parse_scalar("x1 +", chart()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn undeclared_symbol() {
        let err = parse_scalar("y9", chart()).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownVariable {
                name: "y9".into(),
                offset: 0
            }
        );
        // declared pattern, but outside the chart
        assert!(matches!(
            parse_scalar("x1 + x3", chart()),
            Err(ParseError::UnknownVariable { offset: 5, .. })
        ));
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_scalar("-x1^2 + 2*3", chart()).unwrap();
        let expected = Expr::constant(6.0) + (-Expr::var(Var::X(0)).pow(2.0));
        // 6 is moved to the left of the sum by the constant-first rule
        assert_eq!(e, expected);
        let e = parse_scalar("x1^-2", chart()).unwrap();
        assert_eq!(e, Expr::var(Var::X(0)).pow(-2.0));
        let e = parse_scalar("x1^(-0.5)", chart()).unwrap();
        assert_eq!(e, Expr::var(Var::X(0)).pow(-0.5));
        let e = parse_scalar("2e-3*x1", chart()).unwrap();
        assert_eq!(e, 0.002 * Expr::var(Var::X(0)));
    }

    #[test]
    fn function_needs_parenthesis() {
        assert!(matches!(
            parse_scalar("sin x1", chart()),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            parse_scalar("x1 x2", chart()),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            parse_scalar("x1 # 2", chart()),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "sin(x1)^2 + t1*p1_1",
            "exp(-t2)/(1 + x2^2) - log(2 + cos(x1))",
            "sqrt(1 + p2_2^2)^-3 * neg(t1)",
            "(x1^2)^0.5 - 1e-7*x2",
            "-3.25",
        ] {
            let e = parse_scalar(src, chart()).unwrap();
            let back = parse_scalar(&e.to_string(), chart()).unwrap();
            assert_eq!(e, back, "{src} -> {e}");
        }
    }
}
