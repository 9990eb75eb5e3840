//! Arithmetic expressions over `t`, `r2`, `x1`, `y1`, `x2`, `y2` and the
//! family index `j`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, `pi`, `e`, and
//! the functions `exp sin cos log abs` (one argument) and `min max` (two).

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    T,
    R2,
    X1,
    Y1,
    X2,
    Y2,
    J,
}

impl Var {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "t" => Var::T,
            "r2" => Var::R2,
            "x1" => Var::X1,
            "y1" => Var::Y1,
            "x2" => Var::X2,
            "y2" => Var::Y2,
            "j" => Var::J,
            _ => return None,
        })
    }

    /// Real coordinate slot, if the variable is a coordinate.
    fn coordinate(self) -> Option<usize> {
        match self {
            Var::X1 => Some(0),
            Var::Y1 => Some(1),
            Var::X2 => Some(2),
            Var::Y2 => Some(3),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Exp,
    Sin,
    Cos,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at offset {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

/// A parsed expression, remembering its source text.
#[derive(Clone, Debug)]
pub struct Expr {
    source: String,
    root: Node,
}

/// Values bound to the variables during evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    pub t: f64,
    pub j: f64,
    /// Real coordinates `(x1, y1, x2, y2)`, zero-padded.
    pub x: [f64; 4],
}

impl Env {
    pub fn at(x: &[f64]) -> Self {
        let mut e = Env::default();
        e.x[..x.len()].copy_from_slice(x);
        e
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_j(mut self, j: f64) -> Self {
        self.j = j;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut k = i + 1;
                if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                    k += 1;
                }
                if k < b.len() && (b[k] as char).is_ascii_digit() {
                    i = k;
                    while i < b.len() && (b[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &s[start..i];
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError { position: start, message: format!("bad number `{text}`") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(s[start..i].to_string())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ParseError { position: i, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { position: self.offset(), message: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op(c)) if *c == '+' || *c == '-' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op(c)) if *c == '*' || *c == '/' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    // `^` is right-associative and binds tighter than unary minus on its left.
    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.pos += 1;
                if let Some(f) = Func::parse(&name) {
                    if !self.eat('(') {
                        return self.err(format!("expected `(` after `{name}`"));
                    }
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return self.err("expected `)`");
                    }
                    if args.len() != f.arity() {
                        return Err(ParseError {
                            position: at,
                            message: format!("`{name}` takes {} argument(s), got {}", f.arity(), args.len()),
                        });
                    }
                    return Ok(Node::Call(f, args));
                }
                if let Some(v) = Var::parse(&name) {
                    return Ok(Node::Var(v));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ParseError { position: at, message: format!("unknown name `{name}`") }),
                }
            }
            Tok::Op(c) => self.err(format!("unexpected `{c}`")),
        }
    }
}

fn eval(node: &Node, env: &Env) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(v) => match v {
            Var::T => env.t,
            Var::J => env.j,
            Var::R2 => env.x.iter().map(|c| c * c).sum(),
            other => env.x[other.coordinate().unwrap()],
        },
        Node::Neg(a) => -eval(a, env),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, env), eval(b, env));
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                _ => x.powf(y),
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], env);
            match f {
                Func::Exp => x.exp(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Log => x.ln(),
                Func::Abs => x.abs(),
                Func::Min => x.min(eval(&args[1], env)),
                Func::Max => x.max(eval(&args[1], env)),
            }
        }
    }
}

fn collect_vars(node: &Node, out: &mut Vec<Var>) {
    match node {
        Node::Num(_) => {}
        Node::Var(v) => {
            if !out.contains(v) {
                out.push(*v);
            }
        }
        Node::Neg(a) => collect_vars(a, out),
        Node::Bin(_, a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Node::Call(_, args) => args.iter().for_each(|a| collect_vars(a, out)),
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let toks = tokenize(source)?;
        if toks.is_empty() {
            return Err(ParseError { position: 0, message: "empty expression".into() });
        }
        let mut p = Parser { toks, pos: 0, end: source.len() };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("trailing input");
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, env: &Env) -> f64 {
        eval(&self.root, env)
    }

    /// Variables referenced, in order of first appearance.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        collect_vars(&self.root, &mut out);
        out
    }

    pub fn uses(&self, v: Var) -> bool {
        self.variables().contains(&v)
    }

    /// Value of an expression without variables.
    pub fn constant_value(&self) -> Option<f64> {
        self.variables().is_empty().then(|| self.eval(&Env::default()))
    }
}
