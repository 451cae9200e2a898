use super::Node;
use crate::error::{Error, Result};

pub(super) struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str, n: usize) -> Self {
        Self { src, bytes: src.as_bytes(), pos: 0, n }
    }

    pub(super) fn parse(mut self) -> Result<Node> {
        let node = self.expr()?;
        self.skip_ws();
        if self.pos < self.bytes.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(node)
    }

    fn err(&self, message: &str) -> Error {
        Error::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let k: i32 = self.src[start..self.pos]
            .parse()
            .map_err(|_| Error::Syntax { offset: start, message: "exponent out of range".into() })?;
        Ok(Node::Pow(Box::new(base), if neg { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let b = self.bytes;
        let digits = |p: &mut usize| {
            let s = *p;
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < b.len() && b[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.err("malformed number"));
        }
        if p < b.len() && (b[p] == b'e' || b[p] == b'E') {
            let mut q = p + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = q;
                return Err(self.err("malformed exponent"));
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Node::Const)
            .map_err(|_| Error::Syntax { offset: start, message: "malformed number".into() })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "exp" | "log" | "sqrt" => {
                self.expect(b'(')?;
                let a = Box::new(self.expr()?);
                self.expect(b')')?;
                Ok(match name {
                    "exp" => Node::Exp(a),
                    "log" => Node::Log(a),
                    _ => Node::Sqrt(a),
                })
            }
            "abs2" => {
                self.expect(b'(')?;
                if self.eat(b')') {
                    return Ok(Node::Abs2 { lo: 0, hi: self.n - 1 });
                }
                let lo = self.variable_index()?;
                self.expect(b',')?;
                let hi = self.variable_index()?;
                self.expect(b')')?;
                if lo > hi {
                    return Err(self.err("empty abs2 range"));
                }
                Ok(Node::Abs2 { lo, hi })
            }
            _ => self.resolve_variable(name).map(Node::Var),
        }
    }

    fn variable_index(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected variable"));
        }
        let name = &self.src[start..self.pos];
        self.resolve_variable(name)
    }

    fn resolve_variable(&self, name: &str) -> Result<usize> {
        let idx = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && !d.starts_with('0'))
            .and_then(|d| d.parse::<usize>().ok());
        match idx {
            Some(i) if (1..=self.n).contains(&i) => Ok(i - 1),
            _ => Err(Error::UnknownVariable(name.into())),
        }
    }
}
