//! A small expression language for finitary gambles.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | factor
//! factor := number
//!         | 'ind' '(' bool ')'
//!         | ('min' | 'max') '(' expr ',' expr ')'
//!         | 'sum' '(' ident '=' int '..' int ',' expr ')'
//!         | '(' expr ')'
//! bool   := conj ('||' conj)*
//! conj   := neg ('&&' neg)*
//! neg    := '!' neg | atom
//! atom   := 'X' '[' index ']' ('==' | '!=') label | '(' bool ')'
//! index  := int | ident (('+' | '-') int)?
//! label  := ident | int | "quoted"
//! ```
//!
//! Indices are 1-based; `X[1]` is the first state after the root. The depth
//! of an expression is the largest index it can reference.

use std::fmt;

use crate::error::{Error, Result};
use crate::gambles::FinitaryGamble;
use crate::local::StateSpace;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Ind(Box<BoolExpr>),
    Sum {
        var: String,
        lo: i64,
        hi: i64,
        body: Box<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoolExpr {
    StateIs {
        index: Index,
        label: String,
        state: usize,
        negated: bool,
    },
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Index {
    Lit(i64),
    Var { name: String, offset: i64 },
}

/// A parsed expression together with its inferred depth.
#[derive(Debug, Clone, PartialEq)]
pub struct GambleExpr {
    pub expr: Expr,
    pub depth: usize,
}

type Env = Vec<(String, i64)>;

fn lookup(env: &Env, name: &str) -> Option<i64> {
    env.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
}

impl Index {
    fn resolve(&self, env: &Env) -> Result<i64> {
        match self {
            Index::Lit(i) => Ok(*i),
            Index::Var { name, offset } => lookup(env, name)
                .map(|v| v + offset)
                .ok_or_else(|| Error::invalid(format!("unbound index variable {name:?}"))),
        }
    }
}

impl Expr {
    /// Largest referenced index; errors on indices `≤ 0` or unbound variables.
    fn max_index(&self, env: &mut Env) -> Result<usize> {
        match self {
            Expr::Num(_) => Ok(0),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => {
                Ok(a.max_index(env)?.max(b.max_index(env)?))
            }
            Expr::Neg(a) => a.max_index(env),
            Expr::Ind(b) => b.max_index(env),
            Expr::Sum { var, lo, hi, body } => {
                let mut m = 0;
                for i in *lo..=*hi {
                    env.push((var.clone(), i));
                    let r = body.max_index(env);
                    env.pop();
                    m = m.max(r?);
                }
                Ok(m)
            }
        }
    }

    fn eval(&self, path: &[usize], env: &mut Env) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Add(a, b) => a.eval(path, env) + b.eval(path, env),
            Expr::Sub(a, b) => a.eval(path, env) - b.eval(path, env),
            Expr::Mul(a, b) => a.eval(path, env) * b.eval(path, env),
            Expr::Neg(a) => -a.eval(path, env),
            Expr::Min(a, b) => a.eval(path, env).min(b.eval(path, env)),
            Expr::Max(a, b) => a.eval(path, env).max(b.eval(path, env)),
            Expr::Ind(b) => {
                if b.eval(path, env) {
                    1.0
                } else {
                    0.0
                }
            }
            Expr::Sum { var, lo, hi, body } => {
                let mut acc = 0.0;
                for i in *lo..=*hi {
                    env.push((var.clone(), i));
                    acc += body.eval(path, env);
                    env.pop();
                }
                acc
            }
        }
    }
}

impl BoolExpr {
    fn max_index(&self, env: &mut Env) -> Result<usize> {
        match self {
            BoolExpr::StateIs { index, .. } => {
                let i = index.resolve(env)?;
                if i <= 0 {
                    return Err(Error::invalid(format!("state index {i} must be at least 1")));
                }
                Ok(i as usize)
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => Ok(a.max_index(env)?.max(b.max_index(env)?)),
            BoolExpr::Not(a) => a.max_index(env),
        }
    }

    fn eval(&self, path: &[usize], env: &mut Env) -> bool {
        match self {
            BoolExpr::StateIs {
                index,
                state,
                negated,
                ..
            } => {
                // indices were validated against the depth when compiling
                let i = index.resolve(env).expect("validated index") as usize;
                (path[i - 1] == *state) != *negated
            }
            BoolExpr::And(a, b) => a.eval(path, env) && b.eval(path, env),
            BoolExpr::Or(a, b) => a.eval(path, env) || b.eval(path, env),
            BoolExpr::Not(a) => !a.eval(path, env),
        }
    }
}

/// Parses `source` and infers its depth.
pub fn parse_gamble(source: &str, space: &StateSpace) -> Result<GambleExpr> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        space,
    };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(parser.error_at(tok, format!("unexpected {}", tok.kind)));
    }
    let depth = expr.max_index(&mut Vec::new())?;
    Ok(GambleExpr { expr, depth })
}

/// Tabulates the expression over all state strings of length `depth`
/// (the inferred depth unless overridden with a larger one).
pub fn compile(expr: &GambleExpr, k: usize, depth: Option<usize>, cap: usize) -> Result<FinitaryGamble> {
    let depth = match depth {
        Some(d) if d < expr.depth => {
            return Err(Error::invalid(format!(
                "depth override {d} is below the expression's depth {}",
                expr.depth
            )))
        }
        Some(d) => d,
        None => expr.depth,
    };
    let mut env = Vec::new();
    FinitaryGamble::from_fn(k, depth, cap, |s| expr.expr.eval(s.states(), &mut env))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
            Expr::Ind(b) => write!(f, "ind({b})"),
            Expr::Sum { var, lo, hi, body } => write!(f, "sum({var}={lo}..{hi}, {body})"),
        }
    }
}

fn is_plain_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_alphanumeric() || c == '_')
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::StateIs {
                index,
                label,
                negated,
                ..
            } => {
                let op = if *negated { "!=" } else { "==" };
                if is_plain_label(label) {
                    write!(f, "X[{index}] {op} {label}")
                } else {
                    write!(f, "X[{index}] {op} {label:?}")
                }
            }
            BoolExpr::And(a, b) => write!(f, "({a} && {b})"),
            BoolExpr::Or(a, b) => write!(f, "({a} || {b})"),
            BoolExpr::Not(a) => write!(f, "!({a})"),
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Lit(i) => write!(f, "{i}"),
            Index::Var { name, offset: 0 } => f.write_str(name),
            Index::Var { name, offset } if *offset > 0 => write!(f, "{name}+{offset}"),
            Index::Var { name, offset } => write!(f, "{name}-{}", -offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Number(f64),
    Int(i64),
    Ident(String),
    Quoted(String),
    Sym(&'static str),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Number(x) => write!(f, "number {x}"),
            Kind::Int(i) => write!(f, "integer {i}"),
            Kind::Ident(s) => write!(f, "identifier {s:?}"),
            Kind::Quoted(s) => write!(f, "string {s:?}"),
            Kind::Sym(s) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 15] = [
    "..", "==", "!=", "&&", "||", "(", ")", "[", "]", ",", "+", "-", "*", "!", "=",
];

fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let syntax = |message: String| Error::Syntax {
            line: start_line,
            column: start_col,
            message,
        };
        let kind = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            column += i - start;
            if is_float {
                Kind::Number(text.parse().map_err(|_| syntax(format!("bad number {text}")))?)
            } else {
                match text.parse::<i64>() {
                    Ok(v) => Kind::Int(v),
                    Err(_) => Kind::Number(text.parse().map_err(|_| syntax(format!("bad number {text}")))?),
                }
            }
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            Kind::Ident(chars[start..i].iter().collect())
        } else if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(syntax("unterminated string".into()));
            }
            let text: String = chars[start + 1..i].iter().collect();
            i += 1;
            column += i - start;
            Kind::Quoted(text)
        } else {
            let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(syntax(format!("unexpected character {c:?}")));
            };
            i += sym.len();
            column += sym.len();
            Kind::Sym(sym)
        };
        tokens.push(Token {
            kind,
            line: start_line,
            column: start_col,
        });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    space: &'a StateSpace,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn error_at(&self, tok: &Token, message: String) -> Error {
        Error::Syntax {
            line: tok.line,
            column: tok.column,
            message,
        }
    }

    fn error_here(&self, message: String) -> Error {
        match self.peek() {
            Some(tok) => self.error_at(tok, format!("{message}, found {}", tok.kind)),
            None => {
                let (line, column) = self
                    .tokens
                    .last()
                    .map_or((1, 1), |t| (t.line, t.column + 1));
                Error::Syntax {
                    line,
                    column,
                    message: format!("{message}, found end of input"),
                }
            }
        }
    }

    fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: Kind::Sym(s), .. }) if *s == sym)
    }

    fn at_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: Kind::Ident(s), .. }) if s == name)
    }

    fn expect_sym(&mut self, sym: &str) -> Result<()> {
        if self.at_sym(sym) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(format!("expected '{sym}'")))
        }
    }

    fn expect_int(&mut self) -> Result<i64> {
        let negative = self.at_sym("-");
        if negative {
            self.pos += 1;
        }
        match self.peek() {
            Some(Token { kind: Kind::Int(v), .. }) => {
                let v = *v;
                self.pos += 1;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error_here("expected an integer".into())),
        }
    }

    fn expect_ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Token { kind: Kind::Ident(s), .. }) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here("expected an identifier".into())),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.at_sym("+") {
                self.pos += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.at_sym("-") {
                self.pos += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.at_sym("*") {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if !self.at_sym("-") {
            return self.factor();
        }
        self.pos += 1;
        // a minus directly on a literal is part of the literal
        match self.peek().map(|t| t.kind.clone()) {
            Some(Kind::Int(v)) => {
                self.pos += 1;
                Ok(Expr::Num(-(v as f64)))
            }
            Some(Kind::Number(x)) => {
                self.pos += 1;
                Ok(Expr::Num(-x))
            }
            _ => Ok(Expr::Neg(Box::new(self.unary()?))),
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected an expression".into()));
        };
        match &tok.kind {
            Kind::Int(v) => {
                self.pos += 1;
                Ok(Expr::Num(*v as f64))
            }
            Kind::Number(x) => {
                self.pos += 1;
                Ok(Expr::Num(*x))
            }
            Kind::Sym("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Kind::Ident(name) if name == "ind" => {
                self.pos += 1;
                self.expect_sym("(")?;
                let b = self.boolean()?;
                self.expect_sym(")")?;
                Ok(Expr::Ind(Box::new(b)))
            }
            Kind::Ident(name) if name == "min" || name == "max" => {
                self.pos += 1;
                self.expect_sym("(")?;
                let a = self.expr()?;
                self.expect_sym(",")?;
                let b = self.expr()?;
                self.expect_sym(")")?;
                Ok(if name == "min" {
                    Expr::Min(Box::new(a), Box::new(b))
                } else {
                    Expr::Max(Box::new(a), Box::new(b))
                })
            }
            Kind::Ident(name) if name == "sum" => {
                self.pos += 1;
                self.expect_sym("(")?;
                let var = self.expect_ident()?;
                self.expect_sym("=")?;
                let lo = self.expect_int()?;
                self.expect_sym("..")?;
                let hi = self.expect_int()?;
                self.expect_sym(",")?;
                let body = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::Sum {
                    var,
                    lo,
                    hi,
                    body: Box::new(body),
                })
            }
            _ => Err(self.error_here("expected an expression".into())),
        }
    }

    fn boolean(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.conj()?;
        while self.at_sym("||") {
            self.pos += 1;
            lhs = BoolExpr::Or(Box::new(lhs), Box::new(self.conj()?));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<BoolExpr> {
        let mut lhs = self.neg()?;
        while self.at_sym("&&") {
            self.pos += 1;
            lhs = BoolExpr::And(Box::new(lhs), Box::new(self.neg()?));
        }
        Ok(lhs)
    }

    fn neg(&mut self) -> Result<BoolExpr> {
        if self.at_sym("!") {
            self.pos += 1;
            return Ok(BoolExpr::Not(Box::new(self.neg()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<BoolExpr> {
        if self.at_sym("(") {
            self.pos += 1;
            let b = self.boolean()?;
            self.expect_sym(")")?;
            return Ok(b);
        }
        if !self.at_ident("X") {
            return Err(self.error_here("expected 'X[i] == label'".into()));
        }
        self.pos += 1;
        self.expect_sym("[")?;
        let index_tok = self.peek().cloned();
        let index = match index_tok.as_ref().map(|t| &t.kind) {
            Some(Kind::Int(i)) => {
                let i = *i;
                self.pos += 1;
                if i <= 0 {
                    let tok = index_tok.as_ref().expect("peeked");
                    return Err(self.error_at(tok, format!("state index {i} must be at least 1")));
                }
                Index::Lit(i)
            }
            Some(Kind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                let offset = if self.at_sym("+") {
                    self.pos += 1;
                    self.expect_int()?
                } else if self.at_sym("-") {
                    self.pos += 1;
                    -self.expect_int()?
                } else {
                    0
                };
                Index::Var { name, offset }
            }
            _ => return Err(self.error_here("expected a state index".into())),
        };
        self.expect_sym("]")?;
        let negated = if self.at_sym("==") {
            false
        } else if self.at_sym("!=") {
            true
        } else {
            return Err(self.error_here("expected '==' or '!='".into()));
        };
        self.pos += 1;
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected a state label".into()));
        };
        let label = match &tok.kind {
            Kind::Ident(s) | Kind::Quoted(s) => s.clone(),
            Kind::Int(i) => i.to_string(),
            _ => return Err(self.error_here("expected a state label".into())),
        };
        let Some(state) = self.space.index_of(&label) else {
            return Err(self.error_at(&tok, format!("unknown state label {label:?}")));
        };
        self.pos += 1;
        Ok(BoolExpr::StateIs {
            index,
            label,
            state,
            negated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gambles::DEFAULT_TABLE_CAP;
    use crate::tree::Situation;
    use proptest::prelude::*;

    fn coin() -> StateSpace {
        StateSpace::new(["H", "T"]).unwrap()
    }

    fn table(src: &str) -> FinitaryGamble {
        let e = parse_gamble(src, &coin()).unwrap();
        compile(&e, 2, None, DEFAULT_TABLE_CAP).unwrap()
    }

    #[test]
    fn indicator_and_counting() {
        let f = table("ind(X[1]==H)");
        assert_eq!(f.depth(), 1);
        assert_eq!(f.values(), &[1.0, 0.0]);

        let heads = table("sum(i=1..3, ind(X[i]==H))");
        assert_eq!(heads.depth(), 3);
        assert_eq!(heads.value(&Situation::new(vec![0, 0, 1])), 2.0);
    }

    #[test]
    fn min_of_indicators_is_conjunction() {
        assert_eq!(
            table("min(ind(X[1]==H), ind(X[2]==H))"),
            table("ind(X[1]==H && X[2]==H)")
        );
    }

    #[test]
    fn arithmetic_precedence() {
        let f = table("1 + 2 * 3 - 4 - ind(X[1] != H)");
        assert_eq!(f.values(), &[3.0, 2.0]);
        assert_eq!(table("-2 * -(1 + 1)").values(), &[4.0]);
        assert_eq!(table("max(-1.5e0, 2.5)").values(), &[2.5]);
    }

    #[test]
    fn lift_by_depth_override() {
        let e = parse_gamble("ind(X[1]==H)", &coin()).unwrap();
        let f = compile(&e, 2, Some(3), DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(f.values(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(compile(&e, 2, Some(0), DEFAULT_TABLE_CAP).is_err());
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_gamble("ind(X[1]==H\n  + ", &coin()) {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        match parse_gamble("ind(X[1]==Q)", &coin()) {
            Err(Error::Syntax { column, message, .. }) => {
                assert_eq!(column, 11);
                assert!(message.contains("unknown state label"));
            }
            other => panic!("{other:?}"),
        }
        match parse_gamble("ind(X[0]==H)", &coin()) {
            Err(Error::Syntax { column, .. }) => assert_eq!(column, 7),
            other => panic!("{other:?}"),
        }
        assert!(parse_gamble("sum(i=0..2, ind(X[i]==H))", &coin()).is_err());
        assert!(parse_gamble("ind(X[j]==H)", &coin()).is_err());
        assert!(parse_gamble("1 2", &coin()).is_err());
    }

    #[test]
    fn variable_offsets() {
        let f = table("sum(i=1..2, ind(X[i]==H && X[i+1]==H))");
        assert_eq!(f.depth(), 3);
        assert_eq!(f.value(&Situation::new(vec![0, 0, 0])), 2.0);
        assert_eq!(f.value(&Situation::new(vec![0, 0, 1])), 1.0);
    }

    fn arb_bool(var: Option<&'static str>) -> impl Strategy<Value = BoolExpr> {
        let index = match var {
            Some(name) => prop_oneof![
                (1i64..4).prop_map(Index::Lit),
                (0i64..3).prop_map(move |offset| Index::Var { name: name.into(), offset }),
            ]
            .boxed(),
            None => (1i64..4).prop_map(Index::Lit).boxed(),
        };
        let leaf = (index, 0usize..2, any::<bool>()).prop_map(|(index, state, negated)| BoolExpr::StateIs {
            index,
            label: ["H", "T"][state].into(),
            state,
            negated,
        });
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::Or(Box::new(a), Box::new(b))),
                inner.prop_map(|a| BoolExpr::Not(Box::new(a))),
            ]
        })
    }

    fn arb_expr(var: Option<&'static str>) -> BoxedStrategy<Expr> {
        let leaf = prop_oneof![
            (-100i32..100).prop_map(|v| Expr::Num(v as f64 / 4.0)),
            arb_bool(var).prop_map(|b| Expr::Ind(Box::new(b))),
        ];
        let rec = leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Min(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Max(Box::new(a), Box::new(b))),
                inner.prop_map(|a| Expr::Neg(Box::new(a))),
            ]
        });
        if var.is_some() {
            return rec.boxed();
        }
        prop_oneof![
            3 => rec,
            1 => (1i64..3, 1i64..3, arb_expr(Some("i"))).prop_map(|(lo, len, body)| Expr::Sum {
                var: "i".into(),
                lo,
                hi: lo + len,
                body: Box::new(body),
            }),
        ]
        .boxed()
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(expr in arb_expr(None)) {
            let printed = expr.to_string();
            let parsed = parse_gamble(&printed, &coin()).unwrap();
            prop_assert_eq!(&parsed.expr, &expr);
            // and the tabulated gambles agree
            let again = parse_gamble(&parsed.expr.to_string(), &coin()).unwrap();
            let a = compile(&parsed, 2, None, DEFAULT_TABLE_CAP).unwrap();
            let b = compile(&again, 2, None, DEFAULT_TABLE_CAP).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
