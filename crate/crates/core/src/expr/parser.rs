use std::collections::BTreeMap;

use super::{BinOp, Constant, Expr, Func, ParseError, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when digits follow, so `2e` stays `2 e`-style error
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
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                expected: "a numeric literal".into(),
                found: format!("`{text}`"),
            })?;
            if !v.is_finite() {
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "a finite numeric literal".into(),
                    found: format!("`{text}`"),
                });
            }
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: i,
                    expected: "an operator, number, identifier or parenthesis".into(),
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'p> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    params: &'p BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, offset),
            other => {
                self.pos -= 1;
                Err(ParseError::Syntax {
                    offset,
                    expected: "a number, identifier or `(`".into(),
                    found: other.describe(),
                })
            }
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            self.expect(Tok::LParen, &format!("`(` after function `{name}`"))?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        match name.as_str() {
            "t" => return Ok(Expr::Var(Var::T)),
            "pi" => return Ok(Expr::Const(Constant::Pi)),
            "e" => return Ok(Expr::Const(Constant::E)),
            _ => {}
        }
        if let Some(v) = self.params.get(&name) {
            return Ok(Expr::Num(*v));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && !rest.starts_with('0') && rest.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(k) = rest.parse::<usize>() {
                    return Ok(Expr::Var(Var::X(k - 1)));
                }
            }
        }
        Err(ParseError::UnknownIdentifier { name, offset })
    }
}

/// Parses an expression over `t`, `x1..xn` and the built-in constants.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    parse_with_params(source, &BTreeMap::new())
}

/// Parses with additional named constants (problem-file parameters). A
/// parameter may not shadow a variable, function or built-in constant.
pub fn parse_with_params(
    source: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        params,
    };
    if *p.peek() == Tok::End {
        return Err(p.error("an expression"));
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Point;

    #[test]
    fn precedence() {
        let e = parse("1 + 2 * 3 ^ 2").unwrap();
        assert_eq!(e.eval(&Point::at(0.0)).unwrap(), 19.0);
        let e = parse("-t^2").unwrap();
        assert_eq!(e.eval(&Point::at(3.0)).unwrap(), -9.0);
        let e = parse("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(&Point::at(0.0)).unwrap(), 1.0);
        let e = parse("2 * -3").unwrap();
        assert_eq!(e.eval(&Point::at(0.0)).unwrap(), -6.0);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("2 * (t + 1").unwrap_err() {
            ParseError::Syntax { offset, expected, .. } => {
                assert_eq!(offset, 10);
                assert_eq!(expected, "`)`");
            }
            e => panic!("{e:?}"),
        }
        assert_eq!(parse("2 $ 3").unwrap_err().offset(), 2);
        assert_eq!(parse("sin t").unwrap_err().offset(), 4);
        assert!(parse("").is_err());
        assert!(parse("   ").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(
            parse("t + foo").unwrap_err(),
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                offset: 4
            }
        );
        assert!(parse("x0").is_err());
        assert!(parse("x01").is_err());
        assert!(parse("x12").is_ok());
    }

    #[test]
    fn parameters_fold_to_literals() {
        let mut params = BTreeMap::new();
        params.insert("eps".to_string(), 0.25);
        let e = parse_with_params("-eps*x1^3", &params).unwrap();
        assert_eq!(e.eval(&Point::new(0.0, &[2.0])).unwrap(), -2.0);
        assert!(e.free_vars().contains("x1"));
        assert!(parse("eps").is_err());
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Num(1.5e-3));
        assert_eq!(parse(".5").unwrap(), Expr::Num(0.5));
        assert_eq!(parse("2E+2").unwrap(), Expr::Num(200.0));
    }
}
