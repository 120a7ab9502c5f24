//! Recursive-descent parser for the field grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          (right associative)
//! atom    := number | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! var     := 'x' digits | 't'
//! ```

use super::ast::{BinOp, Func, Node, Var};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        offset: usize,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let done = tok == Tok::End;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => self.number(start)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        while matches!(self.peek(), Some(b'0'..=b'9' | b'.')) {
            self.pos += 1;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(b'0'..=b'9')) {
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            } else {
                // `2e` followed by something else: not an exponent.
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&bytes[start..self.pos]).unwrap_or_default();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Tok::Num(v)),
            Ok(_) => Err(ParseError::Syntax {
                offset: start,
                message: format!("number `{text}` out of range"),
            }),
            Err(_) => Err(ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            }),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

pub(crate) fn parse(src: &str) -> Result<Node, ParseError> {
    let toks = Lexer::tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let node = p.expr()?;
    match p.peek() {
        Tok::End => Ok(node),
        tok => Err(ParseError::Syntax {
            offset: p.offset(),
            message: format!("unexpected {}", describe(tok)),
        }),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser {
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

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: self.offset(),
                message: format!("expected {}, found {}", describe(&want), describe(self.peek())),
            })
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(name, at),
            other => Err(ParseError::Syntax {
                offset: at,
                message: format!("expected operand, found {}", describe(&other)),
            }),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Node, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            if *self.peek() != Tok::LParen {
                return Err(ParseError::Syntax {
                    offset: self.offset(),
                    message: format!("expected `(` after function `{name}`"),
                });
            }
            self.bump();
            let mut args = vec![self.expr()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.expr()?);
            }
            self.expect(Tok::RParen)?;
            if args.len() != func.arity() {
                return Err(ParseError::Arity {
                    name,
                    expected: func.arity(),
                    found: args.len(),
                    offset: at,
                });
            }
            return Ok(Node::Call(func, args));
        }
        if name == "t" {
            return Ok(Node::Var(Var::T));
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if idx >= 1 && !name[1..].starts_with('0') {
                return Ok(Node::Var(Var::X(idx - 1)));
            }
        }
        Err(ParseError::UnknownIdentifier { name, offset: at })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let n = parse("2 + 0.2*sin(3*x1)*t").unwrap();
        assert!(matches!(n, Node::Binary(BinOp::Add, _, _)));
        // -x^2 is -(x^2); 2^3^2 is 2^(3^2)
        assert_eq!(parse("-x1^2").unwrap(), parse("-(x1^2)").unwrap());
        assert_eq!(parse("2^3^2").unwrap(), parse("2^(3^2)").unwrap());
        assert_eq!(parse("1-2-3").unwrap(), parse("(1-2)-3").unwrap());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1e-3").unwrap(), Node::Const(1e-3));
        assert_eq!(parse(".5").unwrap(), Node::Const(0.5));
        assert_eq!(parse("2.5E+2").unwrap(), Node::Const(250.0));
        assert!(parse("1e999").is_err());
        assert!(parse("1.2.3").is_err());
    }

    #[test]
    fn errors_carry_offsets() {
        let e = parse("1 + * 2").unwrap_err();
        assert_eq!(e.offset(), 4);
        let e = parse("sin(x1) + foo").unwrap_err();
        assert_eq!(
            e,
            ParseError::UnknownIdentifier {
                name: "foo".into(),
                offset: 10
            }
        );
        let e = parse("min(x1)").unwrap_err();
        assert!(matches!(
            e,
            ParseError::Arity {
                expected: 2,
                found: 1,
                ..
            }
        ));
        let e = parse("(x1 + 2").unwrap_err();
        assert_eq!(e.offset(), 7);
        assert!(parse("x0").is_err());
        assert!(parse("x01").is_err());
        assert!(parse("2 $ 3").is_err());
        assert!(parse("").is_err());
        assert!(parse("sin x1").is_err());
    }

    #[test]
    fn variables() {
        assert_eq!(parse("x12").unwrap(), Node::Var(Var::X(11)));
        assert_eq!(parse("t").unwrap(), Node::Var(Var::T));
    }
}
