//! Arithmetic for `equal`-style variables and `$(...)` immediates.
//!
//! Grammar, lowest to highest precedence:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | PI | v_name | func '(' sum ')' | '(' sum ')' | keyword
//! ```

/// Quantities that only exist once LAMMPS is running.
pub const RUNTIME_KEYWORDS: &[&str] = &[
    "step", "elapsed", "dt", "time", "temp", "press", "pe", "ke", "etotal", "enthalpy", "vol", "density", "lx", "ly",
    "lz", "atoms",
];

const FUNCTIONS: &[&str] = &["sqrt", "exp", "ln", "abs", "floor", "ceil"];

/// What a `v_name` reference resolves to.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Number(f64),
    Text(String),
    /// Bound, but only knowable at run time; carries the reason.
    Deferred(String),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    Malformed(String),
    Unresolvable(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Tok>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value = text.parse::<f64>().map_err(|_| ExprError::Malformed(format!("bad number `{text}`")))?;
            out.push(Tok::Num(value));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
        } else {
            match c {
                '+' | '-' | '*' | '/' | '^' => out.push(Tok::Op(c)),
                '(' => out.push(Tok::LParen),
                ')' => out.push(Tok::RParen),
                _ => return Err(ExprError::Malformed(format!("unexpected character `{c}`"))),
            }
            i += 1;
        }
    }
    Ok(out)
}

struct Evaluator<'a> {
    toks: Vec<Tok>,
    pos: usize,
    lookup: &'a dyn Fn(&str) -> Lookup,
}

impl Evaluator<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn sum(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.product()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            if op == '/' && rhs == 0.0 {
                return Err(ExprError::Malformed("division by zero".into()));
            }
            acc = if op == '*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<f64, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<f64, ExprError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<f64, ExprError> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(v),
            Some(Tok::LParen) => {
                let v = self.sum()?;
                self.expect_rparen()?;
                Ok(v)
            }
            Some(Tok::Ident(name)) => self.ident(&name),
            Some(t) => Err(ExprError::Malformed(format!("unexpected token {t:?}"))),
            None => Err(ExprError::Malformed("unexpected end of expression".into())),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.next() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(ExprError::Malformed("missing `)`".into())),
        }
    }

    fn ident(&mut self, name: &str) -> Result<f64, ExprError> {
        if FUNCTIONS.contains(&name) {
            if self.next() != Some(Tok::LParen) {
                return Err(ExprError::Malformed(format!("`{name}` needs an argument list")));
            }
            let arg = self.sum()?;
            self.expect_rparen()?;
            return Ok(match name {
                "sqrt" => arg.sqrt(),
                "exp" => arg.exp(),
                "ln" => arg.ln(),
                "abs" => arg.abs(),
                "floor" => arg.floor(),
                _ => arg.ceil(),
            });
        }
        if name == "PI" {
            return Ok(std::f64::consts::PI);
        }
        if let Some(var) = name.strip_prefix("v_") {
            return match (self.lookup)(var) {
                Lookup::Number(v) => Ok(v),
                Lookup::Text(t) => t
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| ExprError::Malformed(format!("variable `{var}` holds non-numeric `{t}`"))),
                Lookup::Deferred(reason) => {
                    Err(ExprError::Unresolvable(format!("variable `{var}` cannot be evaluated statically ({reason})")))
                }
                Lookup::Missing => Err(ExprError::Unresolvable(format!("variable `{var}` is not defined"))),
            };
        }
        if RUNTIME_KEYWORDS.contains(&name) {
            return Err(ExprError::Unresolvable(format!("`{name}` is a run-time thermodynamic quantity")));
        }
        Err(ExprError::Unresolvable(format!("unknown name `{name}` in expression")))
    }
}

/// Evaluate `src`, resolving `v_name` through `lookup`.
pub fn evaluate(src: &str, lookup: &dyn Fn(&str) -> Lookup) -> Result<f64, ExprError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(ExprError::Malformed("empty expression".into()));
    }
    let mut ev = Evaluator { toks, pos: 0, lookup };
    let v = ev.sum()?;
    if ev.pos != ev.toks.len() {
        return Err(ExprError::Malformed(format!("trailing input after position {}", ev.pos)));
    }
    if !v.is_finite() {
        return Err(ExprError::Malformed("expression is not finite".into()));
    }
    Ok(v)
}

/// Integers print without a decimal point; everything else uses the
/// shortest text that round-trips.
pub fn render_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
