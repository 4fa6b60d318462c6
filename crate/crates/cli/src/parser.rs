//! Reader for the line-oriented instance format.
//!
//! ```text
//! vars: z1 z2
//! objective: z1 + z2^2
//! ineq: -z1 + z2          # means <= 0
//! eq: ...                 # means = 0
//! switch: z1 , z2         # means G * H = 0
//! ```

use mpsc_core::expr::{Expr, UnaryFn};
use mpsc_core::model::MpscInstance;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown variable `{name}`")]
    UnknownVariable { line: usize, col: usize, name: String },
    #[error("{line}:{col}: `switch` takes exactly two expressions separated by a comma, found {found}")]
    Arity { line: usize, col: usize, found: usize },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, col, .. } | ParseError::UnknownVariable { line, col, .. } | ParseError::Arity { line, col, .. } => {
                (*line, *col)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

struct Lexer<'a> {
    src: &'a str,
    line: usize,
    /// Column (1-based, in characters) of the first byte of `src` within the line.
    col0: usize,
}

impl Lexer<'_> {
    fn tokens(&self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let chars: Vec<char> = self.src.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = self.col0 + i;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| self.syntax(col, format!("bad number `{text}`")))?;
                out.push((Tok::Num(v), col));
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else if "+-*/^(),".contains(c) {
                out.push((Tok::Op(c), col));
                i += 1;
            } else {
                return Err(self.syntax(col, format!("unexpected character `{c}`")));
            }
        }
        Ok(out)
    }

    fn syntax(&self, col: usize, message: String) -> ParseError {
        ParseError::Syntax { line: self.line, col, message }
    }
}

/// Recursive-descent parser over one expression.
struct ExprParser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    vars: &'a [String],
    line: usize,
    end_col: usize,
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col(), message: message.into() }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        loop {
            if self.eat('+') {
                e = e + self.term()?;
            } else if self.eat('-') {
                e = e - self.term()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary()?;
        loop {
            if self.eat('*') {
                e = e * self.unary()?;
            } else if self.eat('/') {
                e = e / self.unary()?;
            } else {
                return Ok(e);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(-self.unary()?)
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let negative = self.eat('-');
        match self.peek() {
            Some(&Tok::Num(v)) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.pos += 1;
                let k = v as i32;
                Ok(Expr::powi(base, if negative { -k } else { k }))
            }
            _ => Err(self.err("exponent must be an integer literal")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::constant(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let kind = UnaryFn::from_name(&name)
                        .ok_or_else(|| ParseError::Syntax { line: self.line, col, message: format!("unknown function `{name}`") })?;
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(Expr::unary(kind, arg));
                }
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Expr::var(i)),
                    None => Err(ParseError::UnknownVariable { line: self.line, col, name }),
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Op(c)) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("expected an expression")),
        }
    }
}

fn parse_expr(toks: &[(Tok, usize)], vars: &[String], line: usize, end_col: usize) -> Result<Expr, ParseError> {
    let mut p = ExprParser { toks, pos: 0, vars, line, end_col };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Parses an instance file.
pub fn parse_instance(text: &str) -> Result<MpscInstance, ParseError> {
    let mut vars: Option<Vec<String>> = None;
    let mut objective = None;
    let (mut ineq, mut eq, mut switch) = (Vec::new(), Vec::new(), Vec::new());
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let syntax = |col: usize, message: &str| ParseError::Syntax { line, col, message: message.to_string() };
        let Some(colon) = content.find(':') else {
            return Err(syntax(1, "expected `section: ...`"));
        };
        let key = content[..colon].trim();
        let body = &content[colon + 1..];
        let lexer = Lexer { src: body, line, col0: content[..colon + 1].chars().count() + 1 };
        let end_col = content.chars().count() + 1;
        let key_col = content.len() - content.trim_start().len() + 1;
        match key {
            "vars" => {
                if vars.is_some() {
                    return Err(syntax(key_col, "duplicate `vars` line"));
                }
                let names: Vec<String> = body.split_whitespace().map(str::to_string).collect();
                for (k, name) in names.iter().enumerate() {
                    let ok = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                        && name.chars().all(|c| c.is_alphanumeric() || c == '_')
                        && UnaryFn::from_name(name).is_none();
                    if !ok || names[..k].contains(name) {
                        return Err(syntax(key_col, &format!("invalid or repeated variable name `{name}`")));
                    }
                }
                if names.is_empty() {
                    return Err(syntax(end_col, "`vars` needs at least one name"));
                }
                vars = Some(names);
            }
            "objective" | "ineq" | "eq" | "switch" => {
                let Some(names) = vars.as_deref() else {
                    return Err(syntax(key_col, "`vars` must come first"));
                };
                let toks = lexer.tokens()?;
                if key == "switch" {
                    let commas: Vec<usize> = toks.iter().enumerate().filter(|(_, (t, _))| *t == Tok::Op(',')).map(|(i, _)| i).collect();
                    if commas.len() != 1 {
                        return Err(ParseError::Arity { line, col: key_col, found: commas.len() + 1 });
                    }
                    let c = commas[0];
                    let g = parse_expr(&toks[..c], names, line, toks[c].1)?;
                    let h = parse_expr(&toks[c + 1..], names, line, end_col)?;
                    switch.push((g, h));
                    continue;
                }
                if let Some((_, col)) = toks.iter().find(|(t, _)| *t == Tok::Op(',')) {
                    return Err(syntax(*col, "unexpected `,`"));
                }
                let e = parse_expr(&toks, names, line, end_col)?;
                match key {
                    "objective" if objective.is_some() => return Err(syntax(key_col, "duplicate `objective` line")),
                    "objective" => objective = Some(e),
                    "ineq" => ineq.push(e),
                    _ => eq.push(e),
                }
            }
            _ => return Err(syntax(key_col, &format!("unknown section `{key}`"))),
        }
    }
    let eof = |message: &str| ParseError::Syntax { line: last_line.max(1), col: 1, message: message.to_string() };
    let names = vars.ok_or_else(|| eof("missing `vars` line"))?;
    let objective = objective.ok_or_else(|| eof("missing `objective` line"))?;
    let n = names.len();
    MpscInstance::new(n, objective, ineq, eq, switch)
        .and_then(|i| i.with_names(names))
        .map_err(|e| eof(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "vars: z1 z2\nobjective: z1 + z2^2\nineq: -z1 + z2\nswitch: z1 , z2\n";

    #[test]
    fn reads_the_example() {
        let inst = parse_instance(EXAMPLE).unwrap();
        assert_eq!((inst.dim(), inst.num_ineq(), inst.num_eq(), inst.num_switch()), (2, 1, 0, 1));
        assert_eq!(inst.objective().value(&[1.0, 3.0]).unwrap(), 10.0);
        assert_eq!(inst.ineq(0).value(&[1.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn precedence_and_functions() {
        let inst = parse_instance("vars: x y\nobjective: -x^2 + 2*y/4 - exp(0*x) + sqrt(4) # c\n").unwrap();
        assert_eq!(inst.objective().value(&[3.0, 2.0]).unwrap(), -9.0 + 1.0 - 1.0 + 2.0);
        let inst = parse_instance("vars: x\nobjective: 2^-1 * x^-2 + 1e-1\n").unwrap();
        assert!((inst.objective().value(&[2.0]).unwrap() - (0.125 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn switch_without_pair_is_an_arity_error() {
        let err = parse_instance("vars: z1 z2 z3\nobjective: z1\nswitch: z1*z2, z3, z1\n").unwrap_err();
        assert!(matches!(err, ParseError::Arity { line: 3, found: 3, .. }));
        let err = parse_instance("vars: z1 z2\nobjective: z1\nswitch: z1*z2\n").unwrap_err();
        assert!(matches!(err, ParseError::Arity { line: 3, found: 1, .. }));
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(parse_instance("vars: z1\nobjective:\n"), Err(ParseError::Syntax { line: 2, .. })));
        let err = parse_instance("vars: z1\nobjective: z1 + w\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownVariable { line: 2, col: 17, name: "w".into() });
        let err = parse_instance("vars: z1\nobjective: z1 + (z1\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
        assert!(matches!(parse_instance("vars: z1\nobjective: z1 ^ 1.5\n"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_instance("objective: 1\n"), Err(ParseError::Syntax { line: 1, .. })));
    }
}
