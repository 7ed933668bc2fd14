//! Arithmetic expressions over named variables, used for the data functions
//! of a scenario (`f`, `g`, `u0`, oblique directions, custom Hamiltonians).
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | name | name '(' sum (',' sum)* ')' | '(' sum ')'
//! ```
//!
//! so `-x^2` is `-(x^2)` and `2^-1` is `0.5`. Names are the declared
//! variables plus the constants `pi` and `e`; functions are `abs`, `min`,
//! `max`, `sin`, `cos`, `tan`, `exp`, `ln` and `sqrt`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column}")]
pub struct ExprError {
    pub message: String,
    /// 1-based character column in the source string.
    pub column: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Min,
    Max,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                if y == y.trunc() && y.abs() <= 64.0 {
                    x.powi(y as i32)
                } else {
                    x.powf(y)
                }
            }
            Node::Call(f, args) => {
                let x = args[0].eval(vars);
                match f {
                    Func::Abs => x.abs(),
                    Func::Min => args[1..].iter().fold(x, |m, a| m.min(a.eval(vars))),
                    Func::Max => args[1..].iter().fold(x, |m, a| m.max(a.eval(vars))),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sqrt => x.sqrt(),
                }
            }
        }
    }
}

/// A parsed expression bound to an ordered list of variable names.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    arity: usize,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let tokens = lex(source)?;
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
            end: source.chars().count() + 1,
        };
        let root = p.sum()?;
        if let Some(t) = p.peek() {
            return Err(p.error_at(t.column, format!("unexpected {}", t.kind)));
        }
        Ok(Expr {
            source: source.to_string(),
            root,
            arity: vars.len(),
        })
    }

    /// `vars` must match the names given to `parse`, in order.
    pub fn eval(&self, vars: &[f64]) -> f64 {
        debug_assert_eq!(vars.len(), self.arity);
        self.root.eval(vars)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Name(String),
    Op(char),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(v) => write!(f, "number {v}"),
            Kind::Name(n) => write!(f, "name '{n}'"),
            Kind::Op(c) => write!(f, "'{c}'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent: only when followed by digits, so `2e` stays "2 * e"-free
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ExprError {
                message: format!("malformed number '{text}'"),
                column,
            })?;
            out.push(Token {
                kind: Kind::Num(v),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Name(chars[start..i].iter().collect()),
                column,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                kind: Kind::Op(c),
                column,
            });
            i += 1;
        } else {
            return Err(ExprError {
                message: format!("unexpected character '{c}'"),
                column,
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error_at(&self, column: usize, message: String) -> ExprError {
        ExprError { message, column }
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: Kind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: char) -> Result<(), ExprError> {
        if self.eat_op(op) {
            return Ok(());
        }
        match self.peek() {
            Some(t) => Err(self.error_at(t.column, format!("expected '{op}', found {}", t.kind))),
            None => Err(self.error_at(self.end, format!("expected '{op}' before the end"))),
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat_op('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat_op('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat_op('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_at(self.end, "unexpected end of expression".into()));
        };
        self.pos += 1;
        match tok.kind {
            Kind::Num(v) => Ok(Node::Num(v)),
            Kind::Op('(') => {
                let inner = self.sum()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Kind::Name(name) => {
                if self.eat_op('(') {
                    let Some(f) = Func::lookup(&name) else {
                        return Err(self.error_at(tok.column, format!("unknown function '{name}'")));
                    };
                    let mut args = vec![self.sum()?];
                    while self.eat_op(',') {
                        args.push(self.sum()?);
                    }
                    self.expect_op(')')?;
                    let ok = if f.variadic() { args.len() >= 2 } else { args.len() == 1 };
                    if !ok {
                        return Err(self.error_at(
                            tok.column,
                            format!("wrong number of arguments ({}) for '{name}'", args.len()),
                        ));
                    }
                    return Ok(Node::Call(f, args));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => {
                        let hint = if Func::lookup(&name).is_some() {
                            format!("function '{name}' needs parentheses")
                        } else {
                            format!("unknown name '{name}' (variables: {})", self.vars.join(", "))
                        };
                        Err(self.error_at(tok.column, hint))
                    }
                }
            }
            other => Err(self.error_at(tok.column, format!("unexpected {other}"))),
        }
    }
}
