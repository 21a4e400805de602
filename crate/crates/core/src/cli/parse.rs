//! Session DSL: lexer and recursive-descent parser.
//!
//! ```text
//! session  := decl*
//! decl     := "vars" ids ";" | "deps" ids ";" | "params" ids ";"
//!           | "funcs" funcsig ("," funcsig)* ";" | "unknown" ID "(" atoms ")" ";"
//!           | "let" ID "=" expr ";"
//!           | "equation" ID "=" expr "solve" jetref ";"
//!           | "expect" cmdname (key "=" value)* ";"
//! expr     := sum with the usual precedence; factors are numbers, parenthesized
//!             sums, `u[t,x]` jet coordinates, `b(u)` / `b'(u)` function
//!             applications, `int(b,u)` antiderivatives, `exp(...)`
//!             exponentials of linear forms, `D[t,x](e)` total derivatives,
//!             `Q[t,u]` unknown-function partials, and `^` integer powers.
//! ```

use crate::desystem::{DESystem, SystemError};
use crate::expr::{Atom, ExprError, Expression, MultiIndex};
use crate::jet::{JetError, JetSpace};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: unknown symbol `{name}`")]
    UnknownSymbol { line: u32, col: u32, name: String },
    #[error("{line}:{col}: invalid leading derivative: {msg}")]
    LeadingDerivativeInvalid { line: u32, col: u32, msg: String },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    System(#[from] SystemError),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Equals,
    Prime,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars>,
                        line: &mut u32,
                        col: &mut u32| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars, &mut line, &mut col);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(bump(&mut chars, &mut line, &mut col));
                } else {
                    break;
                }
            }
            out.push(Spanned {
                tok: Tok::Ident(s),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(bump(&mut chars, &mut line, &mut col));
                } else {
                    break;
                }
            }
            let value = s.parse::<i64>().map_err(|_| ParseError::Syntax {
                line: tline,
                col: tcol,
                msg: format!("integer literal `{s}` out of range"),
            })?;
            out.push(Spanned {
                tok: Tok::Int(value),
                line: tline,
                col: tcol,
            });
            continue;
        }
        if c == '"' {
            bump(&mut chars, &mut line, &mut col);
            let mut s = String::new();
            loop {
                match chars.peek() {
                    None => {
                        return Err(ParseError::Syntax {
                            line: tline,
                            col: tcol,
                            msg: "unterminated string literal".to_string(),
                        })
                    }
                    Some(&'"') => {
                        bump(&mut chars, &mut line, &mut col);
                        break;
                    }
                    Some(_) => s.push(bump(&mut chars, &mut line, &mut col)),
                }
            }
            out.push(Spanned {
                tok: Tok::Str(s),
                line: tline,
                col: tcol,
            });
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '=' => Tok::Equals,
            '\'' => Tok::Prime,
            other => {
                return Err(ParseError::Syntax {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        bump(&mut chars, &mut line, &mut col);
        out.push(Spanned {
            tok,
            line: tline,
            col: tcol,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

/// One expectation from a fixture's expectations block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub command: String,
    pub fields: BTreeMap<String, String>,
}

/// Fully resolved session: jet space, named expressions, the declared
/// system (when any equations were given), and fixture expectations.
#[derive(Debug, Clone)]
pub struct Session {
    pub space: JetSpace,
    pub lets: BTreeMap<String, Expression>,
    pub system: Option<DESystem>,
    pub expectations: Vec<Expectation>,
}

impl Session {
    /// Parses an expression string in this session's scope.
    pub fn parse_expr(&self, text: &str) -> Result<Expression, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            space: self.space.clone(),
            lets: self.lets.clone(),
            max_order: self.space.max_order(),
        };
        let e = p.expr()?;
        p.expect_tok(&Tok::Eof, "end of expression")?;
        Ok(e.normalize()?)
    }

    /// Parses a comma-separated tuple of expressions.
    pub fn parse_tuple(&self, text: &str) -> Result<Vec<Expression>, ParseError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            space: self.space.clone(),
            lets: self.lets.clone(),
            max_order: self.space.max_order(),
        };
        let mut out = vec![p.expr()?];
        while p.eat(&Tok::Comma) {
            out.push(p.expr()?);
        }
        p.expect_tok(&Tok::Eof, "end of expression")?;
        out.iter()
            .map(|e| e.normalize().map_err(ParseError::from))
            .collect()
    }
}

/// Parses a full session source.
pub fn parse_session(text: &str, max_order: u32) -> Result<Session, ParseError> {
    let tokens = lex(text)?;
    let decl = SessionParser {
        inner: Parser {
            tokens,
            pos: 0,
            space: JetSpace::new(&[], &[]).with_max_order(max_order),
            lets: BTreeMap::new(),
            max_order,
        },
        vars: Vec::new(),
        deps: Vec::new(),
        funcs: Vec::new(),
        params: Vec::new(),
        unknowns: Vec::new(),
        frozen: false,
        equations: Vec::new(),
        expectations: Vec::new(),
    };
    decl.session()
}

struct SessionParser {
    inner: Parser,
    vars: Vec<String>,
    deps: Vec<String>,
    funcs: Vec<String>,
    params: Vec<String>,
    unknowns: Vec<(String, Vec<Atom>)>,
    /// Set once the first expression is built; later vars/deps decls would
    /// invalidate existing atoms and are rejected.
    frozen: bool,
    equations: Vec<(String, Expression, u16, MultiIndex, u32, u32)>,
    expectations: Vec<Expectation>,
}

impl SessionParser {
    fn rebuild_space(&mut self) {
        let vars: Vec<&str> = self.vars.iter().map(|s| s.as_str()).collect();
        let deps: Vec<&str> = self.deps.iter().map(|s| s.as_str()).collect();
        let funcs: Vec<&str> = self.funcs.iter().map(|s| s.as_str()).collect();
        let params: Vec<&str> = self.params.iter().map(|s| s.as_str()).collect();
        let mut space = JetSpace::new(&vars, &deps)
            .with_max_order(self.inner.max_order)
            .with_funcs(&funcs)
            .with_params(&params);
        for (name, args) in &self.unknowns {
            space = space.with_unknown(name, args.clone());
        }
        self.inner.space = space;
    }

    fn session(mut self) -> Result<Session, ParseError> {
        loop {
            let next = self.inner.peek().clone();
            match &next.tok {
                Tok::Eof => break,
                Tok::Ident(kw) => {
                    let kw = kw.clone();
                    self.inner.pos += 1;
                    match kw.as_str() {
                        "vars" | "deps" | "params" | "funcs" => {
                            if self.frozen && (kw == "vars" || kw == "deps") {
                                return Err(ParseError::Syntax {
                                    line: next.line,
                                    col: next.col,
                                    msg: format!(
                                        "`{kw}` declarations must precede expressions"
                                    ),
                                });
                            }
                            let names = self.ident_list(&kw)?;
                            match kw.as_str() {
                                "vars" => self.vars.extend(names),
                                "deps" => self.deps.extend(names),
                                "params" => self.params.extend(names),
                                _ => self.funcs.extend(names),
                            }
                            self.rebuild_space();
                        }
                        "unknown" => {
                            let name = self.inner.ident("ansatz name")?;
                            self.inner.expect_tok(&Tok::LParen, "`(`")?;
                            let mut args = Vec::new();
                            loop {
                                args.push(self.inner.atom_ref()?);
                                if !self.inner.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                            self.inner.expect_tok(&Tok::RParen, "`)`")?;
                            self.inner.expect_tok(&Tok::Semi, "`;`")?;
                            self.unknowns.push((name, args));
                            self.rebuild_space();
                            self.frozen = true;
                        }
                        "let" => {
                            self.frozen = true;
                            let name = self.inner.ident("binding name")?;
                            self.inner.expect_tok(&Tok::Equals, "`=`")?;
                            let e = self.inner.expr()?.normalize()?;
                            self.inner.expect_tok(&Tok::Semi, "`;`")?;
                            self.inner.lets.insert(name, e);
                        }
                        "equation" => {
                            self.frozen = true;
                            let name = self.inner.ident("equation name")?;
                            self.inner.expect_tok(&Tok::Equals, "`=`")?;
                            let e = self.inner.expr()?.normalize()?;
                            let kw_pos = self.inner.peek().clone();
                            let solve = self.inner.ident("`solve`")?;
                            if solve != "solve" {
                                return Err(ParseError::Syntax {
                                    line: kw_pos.line,
                                    col: kw_pos.col,
                                    msg: "expected `solve <leading derivative>`".to_string(),
                                });
                            }
                            let lead_pos = self.inner.peek().clone();
                            let lead = self.inner.jet_ref()?;
                            self.inner.expect_tok(&Tok::Semi, "`;`")?;
                            let (dep, index) = match lead {
                                Atom::Jet { dep, index } => (dep, index),
                                _ => {
                                    return Err(ParseError::LeadingDerivativeInvalid {
                                        line: lead_pos.line,
                                        col: lead_pos.col,
                                        msg: "leading must be a jet coordinate".to_string(),
                                    })
                                }
                            };
                            self.equations
                                .push((name, e, dep, index, lead_pos.line, lead_pos.col));
                        }
                        "expect" => {
                            let command = self.command_name()?;
                            let mut fields = BTreeMap::new();
                            while let Tok::Ident(_) = self.inner.peek().tok {
                                let key = self.inner.ident("expectation key")?;
                                self.inner.expect_tok(&Tok::Equals, "`=`")?;
                                let value = self.inner.string_or_ident()?;
                                fields.insert(key, value);
                            }
                            self.inner.expect_tok(&Tok::Semi, "`;`")?;
                            self.expectations.push(Expectation { command, fields });
                        }
                        other => {
                            return Err(ParseError::Syntax {
                                line: next.line,
                                col: next.col,
                                msg: format!("unknown declaration `{other}`"),
                            })
                        }
                    }
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line: next.line,
                        col: next.col,
                        msg: "expected a declaration".to_string(),
                    })
                }
            }
        }
        let system = if self.equations.is_empty() {
            None
        } else {
            let eqs: Vec<(String, Expression, u16, MultiIndex)> = self
                .equations
                .iter()
                .map(|(n, e, d, i, _, _)| (n.clone(), e.clone(), *d, i.clone()))
                .collect();
            match DESystem::new(self.inner.space.clone(), eqs) {
                Ok(sys) => Some(sys),
                Err(err) => {
                    let (_, _, _, _, line, col) = &self.equations[0];
                    return Err(ParseError::LeadingDerivativeInvalid {
                        line: *line,
                        col: *col,
                        msg: err.to_string(),
                    });
                }
            }
        };
        Ok(Session {
            space: self.inner.space,
            lets: self.inner.lets,
            system,
            expectations: self.expectations,
        })
    }

    fn ident_list(&mut self, kw: &str) -> Result<Vec<String>, ParseError> {
        let mut names = Vec::new();
        loop {
            match &self.inner.peek().tok {
                Tok::Ident(_) => names.push(self.inner.ident("name")?),
                Tok::Comma => {
                    self.inner.pos += 1;
                }
                Tok::Semi => {
                    self.inner.pos += 1;
                    break;
                }
                Tok::LParen => {
                    // funcs may carry a formal argument: `funcs b(u)`.
                    if kw != "funcs" {
                        let s = self.inner.peek().clone();
                        return Err(ParseError::Syntax {
                            line: s.line,
                            col: s.col,
                            msg: "unexpected `(` in declaration".to_string(),
                        });
                    }
                    self.inner.pos += 1;
                    self.inner.ident("formal argument")?;
                    self.inner.expect_tok(&Tok::RParen, "`)`")?;
                }
                _ => {
                    let s = self.inner.peek().clone();
                    return Err(ParseError::Syntax {
                        line: s.line,
                        col: s.col,
                        msg: "expected names followed by `;`".to_string(),
                    });
                }
            }
        }
        Ok(names)
    }

    fn command_name(&mut self) -> Result<String, ParseError> {
        let mut name = self.inner.ident("command name")?;
        while self.inner.eat(&Tok::Minus) {
            name.push('-');
            name.push_str(&self.inner.ident("command name")?);
        }
        Ok(name)
    }
}

// ---------------------------------------------------------------------------
// Expression parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    space: JetSpace,
    lets: BTreeMap<String, Expression>,
    max_order: u32,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_tok(&mut self, tok: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            let s = self.peek().clone();
            Err(ParseError::Syntax {
                line: s.line,
                col: s.col,
                msg: format!("expected {what}"),
            })
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let s = self.peek().clone();
        match s.tok {
            Tok::Ident(name) => {
                self.pos += 1;
                Ok(name)
            }
            _ => Err(ParseError::Syntax {
                line: s.line,
                col: s.col,
                msg: format!("expected {what}"),
            }),
        }
    }

    fn string_or_ident(&mut self) -> Result<String, ParseError> {
        let s = self.peek().clone();
        match s.tok {
            Tok::Str(v) => {
                self.pos += 1;
                Ok(v)
            }
            Tok::Ident(v) => {
                self.pos += 1;
                let mut out = v;
                // Dash-joined values such as `adjoint-symmetry` or `xi-l`.
                while self.peek().tok == Tok::Minus {
                    if let Tok::Ident(next) = &self.tokens[self.pos + 1].tok {
                        out.push('-');
                        out.push_str(&next.clone());
                        self.pos += 2;
                    } else {
                        break;
                    }
                }
                Ok(out)
            }
            Tok::Int(v) => {
                self.pos += 1;
                Ok(v.to_string())
            }
            _ => Err(ParseError::Syntax {
                line: s.line,
                col: s.col,
                msg: "expected a value".to_string(),
            }),
        }
    }

    /// Atom reference used in unknown signatures: `t`, `u`, or `u[t]`.
    fn atom_ref(&mut self) -> Result<Atom, ParseError> {
        let s = self.peek().clone();
        let name = self.ident("an argument atom")?;
        if let Some(i) = self.space.indep_index(&name) {
            return Ok(Atom::Indep(i));
        }
        if self.space.dep_index(&name).is_some() {
            if self.peek().tok == Tok::LBracket {
                return self.jet_suffix(&name);
            }
            let d = self.space.dep_index(&name).unwrap();
            return Ok(Atom::jet(d, MultiIndex::zero(self.space.n_indep())));
        }
        Err(ParseError::UnknownSymbol {
            line: s.line,
            col: s.col,
            name,
        })
    }

    fn jet_ref(&mut self) -> Result<Atom, ParseError> {
        self.atom_ref()
    }

    fn jet_suffix(&mut self, dep: &str) -> Result<Atom, ParseError> {
        self.expect_tok(&Tok::LBracket, "`[`")?;
        let mut index = MultiIndex::zero(self.space.n_indep());
        loop {
            let s = self.peek().clone();
            let v = self.ident("an independent variable")?;
            match self.space.indep_index(&v) {
                Some(i) => index.0[i as usize] += 1,
                None => {
                    return Err(ParseError::UnknownSymbol {
                        line: s.line,
                        col: s.col,
                        name: v,
                    })
                }
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect_tok(&Tok::RBracket, "`]`")?;
        if index.order() > self.max_order {
            let s = self.peek().clone();
            return Err(ParseError::Syntax {
                line: s.line,
                col: s.col,
                msg: format!(
                    "jet order {} exceeds the maximum tracked order {}",
                    index.order(),
                    self.max_order
                ),
            });
        }
        let d = self.space.dep_index(dep).unwrap();
        Ok(Atom::jet(d, index))
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                acc = acc + self.term()?;
            } else if self.eat(&Tok::Minus) {
                acc = acc - self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(&Tok::Star) {
                acc = acc * self.factor()?;
            } else if self.eat(&Tok::Slash) {
                let rhs = self.factor()?;
                if rhs.is_zero() {
                    let s = self.peek().clone();
                    return Err(ParseError::Syntax {
                        line: s.line,
                        col: s.col,
                        msg: "division by zero".to_string(),
                    });
                }
                acc = acc.divided_by(&rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(-self.factor()?);
        }
        if self.eat(&Tok::Plus) {
            return self.factor();
        }
        let base = self.power_base()?;
        if self.eat(&Tok::Caret) {
            let s = self.peek().clone();
            match s.tok {
                Tok::Int(k) if k >= 0 => {
                    self.pos += 1;
                    return Ok(base.pow(k as u32));
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line: s.line,
                        col: s.col,
                        msg: "expected a nonnegative integer exponent".to_string(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn power_base(&mut self) -> Result<Expression, ParseError> {
        let s = self.peek().clone();
        match s.tok.clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(Expression::int(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                self.named(&name, s.line, s.col)
            }
            _ => Err(ParseError::Syntax {
                line: s.line,
                col: s.col,
                msg: "expected an expression".to_string(),
            }),
        }
    }

    fn named(&mut self, name: &str, line: u32, col: u32) -> Result<Expression, ParseError> {
        // Builtins first.
        if name == "exp" {
            self.expect_tok(&Tok::LParen, "`(`")?;
            let inner = self.expr()?.normalize()?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            return match self.space.exp(&inner) {
                Some(e) => Ok(e),
                None => Err(ParseError::Syntax {
                    line,
                    col,
                    msg: "exp argument must be linear in the independent variables with \
                          parameter coefficients"
                        .to_string(),
                }),
            };
        }
        if name == "int" {
            self.expect_tok(&Tok::LParen, "`(`")?;
            let fpos = self.peek().clone();
            let fname = self.ident("a function symbol")?;
            if !self.space.has_func(&fname) {
                return Err(ParseError::UnknownSymbol {
                    line: fpos.line,
                    col: fpos.col,
                    name: fname,
                });
            }
            self.expect_tok(&Tok::Comma, "`,`")?;
            let arg = self.expr()?.normalize()?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            return Ok(Expression::atom(Atom::func(&fname, -1, arg)));
        }
        if name == "D" {
            self.expect_tok(&Tok::LBracket, "`[`")?;
            let mut dirs = Vec::new();
            loop {
                let s = self.peek().clone();
                let v = self.ident("an independent variable")?;
                match self.space.indep_index(&v) {
                    Some(i) => dirs.push(i as usize),
                    None => {
                        return Err(ParseError::UnknownSymbol {
                            line: s.line,
                            col: s.col,
                            name: v,
                        })
                    }
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect_tok(&Tok::RBracket, "`]`")?;
            self.expect_tok(&Tok::LParen, "`(`")?;
            let mut e = self.expr()?.normalize()?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            for i in dirs {
                e = self.space.total_derivative(&e, i)?;
            }
            return Ok(e);
        }

        // Function symbols, with optional primes for derivatives.
        if self.space.has_func(name) {
            let mut order = 0;
            while self.eat(&Tok::Prime) {
                order += 1;
            }
            self.expect_tok(&Tok::LParen, "`(`")?;
            let arg = self.expr()?.normalize()?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            return Ok(Expression::atom(Atom::func(name, order, arg)));
        }

        // Unknown-function symbols: bare or with a partial list.
        if let Some(sig) = self.space.unknown_signature(name).cloned() {
            let mut partial = vec![0u8; sig.len()];
            if self.peek().tok == Tok::LBracket {
                self.pos += 1;
                loop {
                    let s = self.peek().clone();
                    let arg = self.atom_ref()?;
                    match sig.iter().position(|a| a == &arg) {
                        Some(m) => partial[m] += 1,
                        None => {
                            return Err(ParseError::Syntax {
                                line: s.line,
                                col: s.col,
                                msg: format!(
                                    "`{name}` has no such argument in its signature"
                                ),
                            })
                        }
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect_tok(&Tok::RBracket, "`]`")?;
            }
            return Ok(Expression::atom(Atom::Unknown {
                name: name.to_string(),
                args: sig,
                partial,
            }));
        }

        // Jet coordinates and plain variables.
        if self.space.dep_index(name).is_some() {
            if self.peek().tok == Tok::LBracket {
                let atom = self.jet_suffix(name)?;
                return Ok(Expression::atom(atom));
            }
            let d = self.space.dep_index(name).unwrap();
            return Ok(Expression::atom(Atom::jet(
                d,
                MultiIndex::zero(self.space.n_indep()),
            )));
        }
        if let Some(i) = self.space.indep_index(name) {
            return Ok(Expression::atom(Atom::Indep(i)));
        }
        if self.space.has_param(name) {
            return Ok(Expression::atom(Atom::Param(name.to_string())));
        }
        if let Some(e) = self.lets.get(name) {
            return Ok(e.clone());
        }
        Err(ParseError::UnknownSymbol {
            line,
            col,
            name: name.to_string(),
        })
    }
}
