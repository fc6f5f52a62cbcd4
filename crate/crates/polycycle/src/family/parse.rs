//! Family grammar: parse and serialize parametric polynomial fields.
//!
//! Grammar (UTF-8, whitespace insignificant):
//!
//! ```text
//! x' = <poly-expr> ; y' = <poly-expr> ; params <name> [, <name> ...]
//! ```
//!
//! poly-expr: real literals, `x`, `y`, parameter names, parentheses and the
//! operators `+ - * ^` (caret with a nonnegative integer literal exponent).
//! The parser expands the expression into a monomial table in (x, y) whose
//! coefficients are expression trees over the parameters; total degree above
//! `DEGREE_CAP` is rejected.

use std::collections::BTreeMap;

use super::{CoeffTable, Expr, FamilyError, ParametricFamily, DEGREE_CAP};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    Semi,
    Comma,
    Eq,
    Prime,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> FamilyError {
    FamilyError::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, FamilyError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        if ch.is_whitespace() {
            chars.next();
            bump(ch, &mut line, &mut col);
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                } else {
                    break;
                }
            }
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
            let mut s = String::new();
            let mut seen_exp = false;
            while let Some(&c) = chars.peek() {
                let take = c.is_ascii_digit()
                    || c == '.'
                    || ((c == 'e' || c == 'E') && !seen_exp)
                    || ((c == '+' || c == '-')
                        && matches!(s.chars().last(), Some('e') | Some('E')));
                if !take {
                    break;
                }
                if c == 'e' || c == 'E' {
                    seen_exp = true;
                }
                s.push(c);
                chars.next();
                bump(c, &mut line, &mut col);
            }
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(tl, tc, format!("bad number literal `{s}`")))?;
            out.push(Token {
                tok: Tok::Num(v),
                line: tl,
                col: tc,
            });
            continue;
        }
        let tok = match ch {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            '\'' => Tok::Prime,
            other => return Err(syntax(tl, tc, format!("unexpected character `{other}`"))),
        };
        chars.next();
        bump(ch, &mut line, &mut col);
        out.push(Token { tok, line: tl, col: tc });
    }
    Ok(out)
}

/// Bivariate polynomial in (x, y) with symbolic coefficients; the parser's
/// working representation.
type PolyExpr = BTreeMap<(usize, usize), Expr>;

fn pe_insert(table: &mut PolyExpr, key: (usize, usize), e: Expr) -> Result<(), FamilyError> {
    if key.0 + key.1 > DEGREE_CAP {
        return Err(FamilyError::DegreeOverflow {
            found: key.0 + key.1,
            cap: DEGREE_CAP,
        });
    }
    let merged = match table.remove(&key) {
        Some(old) => old.add(e),
        None => e,
    };
    if !merged.is_zero() {
        table.insert(key, merged);
    }
    Ok(())
}

fn pe_add(a: &PolyExpr, b: &PolyExpr) -> Result<PolyExpr, FamilyError> {
    let mut out = a.clone();
    for (&k, e) in b {
        pe_insert(&mut out, k, e.clone())?;
    }
    Ok(out)
}

fn pe_neg(a: &PolyExpr) -> PolyExpr {
    a.iter().map(|(&k, e)| (k, e.clone().neg())).collect()
}

fn pe_mul(a: &PolyExpr, b: &PolyExpr) -> Result<PolyExpr, FamilyError> {
    let mut out = PolyExpr::new();
    for (&(i1, j1), e1) in a {
        for (&(i2, j2), e2) in b {
            pe_insert(&mut out, (i1 + i2, j1 + j2), e1.clone().mul(e2.clone()))?;
        }
    }
    Ok(out)
}

fn pe_pow(a: &PolyExpr, k: u32) -> Result<PolyExpr, FamilyError> {
    let mut out = PolyExpr::new();
    out.insert((0, 0), Expr::Const(1.0));
    for _ in 0..k {
        out = pe_mul(&out, a)?;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    params: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> FamilyError {
        match self.toks.get(self.pos) {
            Some(t) => syntax(t.line, t.col, msg),
            None => syntax(0, 0, format!("{} (unexpected end of input)", msg.into())),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), FamilyError> {
        match self.peek() {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    // expr := ["+"|"-"] term (("+"|"-") term)*
    fn expr(&mut self) -> Result<PolyExpr, FamilyError> {
        let mut negate = false;
        if let Some(t) = self.peek() {
            match t.tok {
                Tok::Minus => {
                    negate = true;
                    self.pos += 1;
                }
                Tok::Plus => {
                    self.pos += 1;
                }
                _ => {}
            }
        }
        let mut acc = self.term()?;
        if negate {
            acc = pe_neg(&acc);
        }
        loop {
            match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = pe_add(&acc, &rhs)?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = pe_add(&acc, &pe_neg(&rhs))?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    // term := factor ("*" factor)*
    fn term(&mut self) -> Result<PolyExpr, FamilyError> {
        let mut acc = self.factor()?;
        while matches!(self.peek().map(|t| &t.tok), Some(Tok::Star)) {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = pe_mul(&acc, &rhs)?;
        }
        Ok(acc)
    }

    // factor := primary ["^" integer] | "-" factor
    fn factor(&mut self) -> Result<PolyExpr, FamilyError> {
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Minus)) {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(pe_neg(&inner));
        }
        let base = self.primary()?;
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Caret)) {
            self.pos += 1;
            let (line, col) = self
                .peek()
                .map(|t| (t.line, t.col))
                .unwrap_or((0, 0));
            match self.next().map(|t| t.tok.clone()) {
                Some(Tok::Num(n)) if n >= 0.0 && n.fract() == 0.0 => {
                    return pe_pow(&base, n as u32);
                }
                _ => {
                    return Err(syntax(line, col, "exponent must be a nonnegative integer"));
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<PolyExpr, FamilyError> {
        match self.peek().cloned() {
            Some(Token {
                tok: Tok::Num(n), ..
            }) => {
                self.pos += 1;
                let mut t = PolyExpr::new();
                if n != 0.0 {
                    t.insert((0, 0), Expr::Const(n));
                }
                Ok(t)
            }
            Some(Token {
                tok: Tok::Ident(name),
                ..
            }) => {
                self.pos += 1;
                let mut t = PolyExpr::new();
                match name.as_str() {
                    "x" => {
                        t.insert((1, 0), Expr::Const(1.0));
                    }
                    "y" => {
                        t.insert((0, 1), Expr::Const(1.0));
                    }
                    _ if self.params.contains(&name) => {
                        t.insert((0, 0), Expr::Param(name));
                    }
                    _ => return Err(FamilyError::UnknownSymbol { name }),
                }
                Ok(t)
            }
            Some(Token { tok: Tok::LParen, .. }) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            _ => Err(self.err_here("expected a number, symbol, or `(`")),
        }
    }
}

/// Parse a family definition in the grammar above.
pub fn parse_family(text: &str) -> Result<ParametricFamily, FamilyError> {
    let toks = tokenize(text)?;

    // The parameter list is declared last but needed to classify symbols, so
    // locate the top-level `params` keyword first.
    let params_idx = toks
        .iter()
        .rposition(|t| matches!(&t.tok, Tok::Ident(s) if s == "params"))
        .ok_or_else(|| syntax(1, 1, "missing `params` declaration"))?;
    let mut params: Vec<String> = Vec::new();
    let mut expect_name = true;
    for t in &toks[params_idx + 1..] {
        match (&t.tok, expect_name) {
            (Tok::Ident(n), true) => {
                if n == "x" || n == "y" {
                    return Err(syntax(t.line, t.col, "`x`/`y` cannot be parameter names"));
                }
                if params.contains(n) {
                    return Err(syntax(t.line, t.col, format!("duplicate parameter `{n}`")));
                }
                params.push(n.clone());
                expect_name = false;
            }
            (Tok::Comma, false) => expect_name = true,
            (Tok::Semi, false) => break,
            _ => return Err(syntax(t.line, t.col, "malformed parameter list")),
        }
    }
    if expect_name && !params.is_empty() {
        return Err(syntax(1, 1, "trailing comma in parameter list"));
    }

    let mut p = Parser {
        toks: &toks[..params_idx],
        pos: 0,
        params: &params,
    };

    let mut sides: Vec<PolyExpr> = Vec::new();
    for var in ["x", "y"] {
        match p.next().map(|t| t.tok.clone()) {
            Some(Tok::Ident(s)) if s == var => {}
            _ => {
                p.pos = p.pos.saturating_sub(1);
                return Err(p.err_here(format!("expected `{var}'` statement")));
            }
        }
        p.expect(Tok::Prime, "`'`")?;
        p.expect(Tok::Eq, "`=`")?;
        sides.push(p.expr()?);
        p.expect(Tok::Semi, "`;` after the right-hand side")?;
    }
    if p.pos != p.toks.len() {
        return Err(p.err_here("unexpected tokens before `params`"));
    }

    let py = sides.pop().unwrap();
    let px = sides.pop().unwrap();
    ParametricFamily::from_tables("parsed", params, px as CoeffTable, py as CoeffTable)
}

fn side_to_text(table: &CoeffTable) -> String {
    if table.is_empty() {
        return "0".to_string();
    }
    let mut parts = Vec::new();
    for (&(i, j), e) in table {
        let mut term = format!("({})", e);
        if i > 0 {
            term.push_str(if i == 1 { " * x" } else { "" });
            if i > 1 {
                term.push_str(&format!(" * x ^ {i}"));
            }
        }
        if j > 0 {
            term.push_str(if j == 1 { " * y" } else { "" });
            if j > 1 {
                term.push_str(&format!(" * y ^ {j}"));
            }
        }
        parts.push(term);
    }
    parts.join(" + ")
}

/// Render a family back to the grammar; `parse_family(serialize_family(f))`
/// reproduces the coefficient tables (up to trivial constant folding).
pub fn serialize_family(family: &ParametricFamily) -> String {
    format!(
        "x' = {}; y' = {}; params {}",
        side_to_text(family.px_coeffs()),
        side_to_text(family.py_coeffs()),
        family.params().join(", ")
    )
}
