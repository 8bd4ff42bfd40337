//! Typed parsing of canonical scripts against a signature registry.

mod registry;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Code, Diagnostic, Location};
use crate::lexical;
use crate::normalizer::{CanonicalScript, SourceLine};

pub use registry::{
    ArgKind, ArgSlot, CommandSignature, Grammar, KeywordGroup, RegistryError, SignatureRegistry, UnknownStyle,
};

/// A word of a canonical line with its 1-based column range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub column: usize,
    pub end_column: usize,
}

/// Split a canonical line into tokens. The flag reports an unterminated quote.
pub fn tokenize(line: &str) -> (Vec<Token>, bool) {
    let (words, open) = lexical::split_words(line);
    let tokens = words
        .into_iter()
        .map(|w| Token { text: w.text.to_string(), column: w.start + 1, end_column: w.end + 1 })
        .collect();
    (tokens, open)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum ArgValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ArgValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ArgValue::Int(i) => Some(*i as f64),
            ArgValue::Float(f) => Some(*f),
            ArgValue::Text(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ArgValue::Int(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedArg {
    pub slot: String,
    pub kind: String,
    pub value: ArgValue,
    /// Token text as written, quotes included.
    pub text: String,
    pub column: usize,
}

impl TypedArg {
    pub fn new(slot: impl Into<String>, kind: &ArgKind, value: ArgValue, text: impl Into<String>) -> Self {
        TypedArg { slot: slot.into(), kind: kind.tag().to_string(), value, text: text.into(), column: 0 }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.value.as_f64()
    }

    /// Text with one layer of quotes removed.
    pub fn word(&self) -> &str {
        lexical::unquote(&self.text)
    }

    fn same_structure(&self, other: &TypedArg) -> bool {
        self.slot == other.slot && self.kind == other.kind && self.value == other.value && self.text == other.text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordArg {
    pub keyword: String,
    pub args: Vec<TypedArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSpan {
    /// Index of the canonical line.
    pub line_index: usize,
    /// Raw lines the command came from.
    pub provenance: Vec<usize>,
}

impl CommandSpan {
    pub fn raw_line(&self) -> usize {
        self.provenance.first().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstCommand {
    pub name: String,
    pub args: Vec<TypedArg>,
    pub keywords: Vec<KeywordArg>,
    pub span: CommandSpan,
}

impl AstCommand {
    pub fn new(name: impl Into<String>, args: Vec<TypedArg>, span: CommandSpan) -> Self {
        AstCommand { name: name.into(), args, keywords: Vec::new(), span }
    }

    /// First positional argument filling `slot`.
    pub fn arg(&self, slot: &str) -> Option<&TypedArg> {
        self.args.iter().find(|a| a.slot == slot)
    }

    pub fn args_in<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a TypedArg> + 'a {
        self.args.iter().filter(move |a| a.slot == slot)
    }

    /// Last occurrence of a keyword, matching LAMMPS "latest wins".
    pub fn keyword(&self, name: &str) -> Option<&KeywordArg> {
        self.keywords.iter().rev().find(|k| k.keyword == name)
    }

    /// The style word, for commands whose signature dispatches on one.
    pub fn style(&self) -> Option<&str> {
        self.arg("style").map(|a| a.word())
    }

    pub fn to_text(&self) -> String {
        let mut parts = vec![self.name.clone()];
        parts.extend(self.args.iter().map(|a| a.text.clone()));
        for kw in &self.keywords {
            parts.push(kw.keyword.clone());
            parts.extend(kw.args.iter().map(|a| a.text.clone()));
        }
        parts.join(" ")
    }

    pub fn same_structure(&self, other: &AstCommand) -> bool {
        let args_eq =
            |a: &[TypedArg], b: &[TypedArg]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_structure(y));
        self.name == other.name
            && args_eq(&self.args, &other.args)
            && self.keywords.len() == other.keywords.len()
            && self
                .keywords
                .iter()
                .zip(&other.keywords)
                .all(|(x, y)| x.keyword == y.keyword && args_eq(&x.args, &y.args))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstScript {
    pub origin: String,
    pub commands: Vec<AstCommand>,
    pub registry_version: String,
}

impl AstScript {
    /// Equality ignoring spans and columns.
    pub fn same_structure(&self, other: &AstScript) -> bool {
        self.commands.len() == other.commands.len()
            && self.commands.iter().zip(&other.commands).all(|(a, b)| a.same_structure(b))
    }

    pub fn find<'a>(&'a self, name: &'a str) -> impl Iterator<Item = (usize, &'a AstCommand)> + 'a {
        self.commands.iter().enumerate().filter(move |(_, c)| c.name == name)
    }
}

/// Render an AST back to canonical text, one command per line.
pub fn serialize(ast: &AstScript) -> CanonicalScript {
    let lines = ast.commands.iter().map(|c| SourceLine::new(c.to_text(), c.span.provenance.clone())).collect();
    CanonicalScript::new(ast.origin.clone(), lines)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOutput {
    pub ast: AstScript,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseOutput {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

/// Parse every canonical line. Lines with an error are left out of the AST.
pub fn parse(script: &CanonicalScript, registry: &SignatureRegistry) -> ParseOutput {
    let mut commands = Vec::new();
    let mut diagnostics = Vec::new();
    for (index, line) in script.lines.iter().enumerate() {
        let mut line_diags = Vec::new();
        if let Some(cmd) = parse_line(index, line, registry, &mut line_diags) {
            if !line_diags.iter().any(Diagnostic::is_error) {
                commands.push(cmd);
            }
        }
        diagnostics.extend(line_diags);
    }
    ParseOutput {
        ast: AstScript { origin: script.origin.clone(), commands, registry_version: registry.version().to_string() },
        diagnostics,
    }
}

/// Parse a single canonical line.
pub fn parse_line(
    index: usize,
    line: &SourceLine,
    registry: &SignatureRegistry,
    diags: &mut Vec<Diagnostic>,
) -> Option<AstCommand> {
    let (tokens, open) = tokenize(&line.text);
    let raw_line = line.line();
    let at = |col: usize, end: usize| Location { line_index: index, raw_line, column: col, end_column: end };
    if open {
        let col = quote_start(&line.text).map(|c| c + 1).unwrap_or(1);
        diags.push(Diagnostic::new(Code::P006, at(col, line.text.len() + 1), "quote is never closed"));
        return None;
    }
    let head = tokens.first()?;
    let Some(sig) = registry.get(&head.text) else {
        diags.push(Diagnostic::new(
            Code::P001,
            at(head.column, head.end_column),
            format!("unknown command `{}`", head.text),
        ));
        return None;
    };
    let mut matcher = Matcher {
        tokens: &tokens,
        pos: 1,
        end: at(line.text.len() + 1, line.text.len() + 1),
        index,
        raw_line,
        diags,
        failed: false,
    };
    let mut cmd = AstCommand::new(
        sig.name.clone(),
        Vec::new(),
        CommandSpan { line_index: index, provenance: line.provenance.clone() },
    );
    matcher.run(sig, &mut cmd);
    Some(cmd)
}

fn quote_start(text: &str) -> Option<usize> {
    let mut state = lexical::QuoteState::default();
    let mut start = None;
    for (i, b) in text.bytes().enumerate() {
        let was_open = state.is_open();
        state.step(b);
        if !was_open && state.is_open() {
            start = Some(i);
        }
    }
    start
}

struct Matcher<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: Location,
    index: usize,
    raw_line: usize,
    diags: &'a mut Vec<Diagnostic>,
    failed: bool,
}

impl Matcher<'_> {
    fn loc(&self, tok: &Token) -> Location {
        Location { line_index: self.index, raw_line: self.raw_line, column: tok.column, end_column: tok.end_column }
    }

    fn report(&mut self, code: Code, loc: Location, message: String) {
        if code.default_severity() == crate::diagnostics::Severity::Error {
            self.failed = true;
        }
        self.diags.push(Diagnostic::new(code, loc, message));
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn run(&mut self, sig: &CommandSignature, cmd: &mut AstCommand) {
        let Some(slot) = sig.style_slot else {
            self.grammar(&sig.name, &sig.grammar, None, cmd);
            return;
        };
        self.positional(&sig.name, &sig.grammar, &BTreeSet::new(), cmd);
        if self.failed {
            return;
        }
        let style = cmd.args.get(slot).map(|a| a.word().to_string()).unwrap_or_default();
        let style_tok = self.tokens[slot + 1].clone();
        match sig.styles.get(&style) {
            Some(g) => self.grammar(&sig.name, g, Some(&sig.grammar), cmd),
            None => match sig.unknown_style {
                UnknownStyle::Open => {
                    while let Some(tok) = self.peek().cloned() {
                        cmd.args.push(typed("arg", &ArgKind::Word, ArgValue::Text(tok.text.clone()), &tok));
                        self.pos += 1;
                    }
                }
                UnknownStyle::UnknownCommand => {
                    let loc = self.loc(&style_tok);
                    self.report(Code::P001, loc, format!("unknown {} style `{style}`", sig.name));
                }
                UnknownStyle::BadEnum => {
                    let known: Vec<&str> = sig.styles.keys().map(String::as_str).collect();
                    let loc = self.loc(&style_tok);
                    self.report(
                        Code::P005,
                        loc,
                        format!("`{style}` is not a {} style (expected one of {})", sig.name, known.join(", ")),
                    );
                }
            },
        }
    }

    fn grammar(&mut self, name: &str, g: &Grammar, base: Option<&Grammar>, cmd: &mut AstCommand) {
        let mut keywords: BTreeSet<&str> = g.keywords.keys().map(String::as_str).collect();
        if let Some(b) = base {
            keywords.extend(b.keywords.keys().map(String::as_str));
        }
        let lookup = |k: &str| g.keywords.get(k).or_else(|| base.and_then(|b| b.keywords.get(k)));

        self.positional(name, g, &keywords, cmd);
        if self.failed {
            return;
        }
        if let Some(slot) = &g.variadic {
            let mut count = 0;
            while let Some(tok) = self.peek().cloned() {
                if keywords.contains(tok.text.as_str()) {
                    break;
                }
                self.take(slot, &tok, &mut cmd.args);
                count += 1;
            }
            if count < g.min_variadic {
                let loc = self.end;
                self.report(
                    Code::P002,
                    loc,
                    format!("`{name}` needs at least {} `{}` argument(s), got {count}", g.min_variadic, slot.name),
                );
            }
        }
        let mut seen = BTreeSet::new();
        while !self.failed {
            let Some(tok) = self.peek().cloned() else { break };
            let Some(group) = lookup(&tok.text) else {
                let loc = self.loc(&tok);
                if keywords.is_empty() {
                    self.report(Code::P002, loc, format!("unexpected extra argument `{}` for `{name}`", tok.text));
                } else {
                    self.report(Code::P004, loc, format!("unknown keyword `{}` for `{name}`", tok.text));
                }
                break;
            };
            self.pos += 1;
            if !seen.insert(tok.text.clone()) && !group.repeatable {
                let loc = self.loc(&tok);
                self.diags.push(Diagnostic {
                    severity: crate::diagnostics::Severity::Warning,
                    ..Diagnostic::new(Code::P002, loc, format!("keyword `{}` given more than once", tok.text))
                });
            }
            let mut kw = KeywordArg { keyword: tok.text.clone(), args: Vec::new() };
            for slot in &group.args {
                match self.peek().cloned() {
                    Some(arg) => self.take(slot, &arg, &mut kw.args),
                    None => {
                        let loc = self.end;
                        self.report(
                            Code::P002,
                            loc,
                            format!("keyword `{}` is missing its `{}` argument", tok.text, slot.name),
                        );
                        break;
                    }
                }
            }
            if let Some(slot) = &group.variadic {
                let mut count = 0;
                while let Some(arg) = self.peek().cloned() {
                    if keywords.contains(arg.text.as_str()) {
                        break;
                    }
                    self.take(slot, &arg, &mut kw.args);
                    count += 1;
                }
                if count < group.min_variadic {
                    let loc = self.end;
                    self.report(Code::P002, loc, format!("keyword `{}` needs more arguments", tok.text));
                }
            }
            cmd.keywords.push(kw);
        }
        if self.failed {
            return;
        }
        for req in &g.required_keywords {
            if !cmd.keywords.iter().any(|k| &k.keyword == req) {
                let loc = self.end;
                self.report(Code::P002, loc, format!("`{name}` requires the `{req}` keyword"));
            }
        }
    }

    fn positional(&mut self, name: &str, g: &Grammar, keywords: &BTreeSet<&str>, cmd: &mut AstCommand) {
        for (k, slot) in g.positional.iter().enumerate() {
            let Some(tok) = self.peek().cloned() else {
                if k < g.min_positional {
                    let loc = self.end;
                    self.report(
                        Code::P002,
                        loc,
                        format!(
                            "`{name}` expects at least {} positional argument(s); `{}` is missing",
                            g.min_positional, slot.name
                        ),
                    );
                }
                return;
            };
            if k >= g.min_positional && keywords.contains(tok.text.as_str()) {
                return;
            }
            self.take(slot, &tok, &mut cmd.args);
        }
    }

    fn take(&mut self, slot: &ArgSlot, tok: &Token, out: &mut Vec<TypedArg>) {
        self.pos += 1;
        match check(slot, &tok.text) {
            Ok(value) => out.push(typed(&slot.name, &slot.kind, value, tok)),
            Err((code, msg)) => {
                let loc = self.loc(tok);
                self.report(code, loc, msg);
            }
        }
    }
}

fn typed(slot: &str, kind: &ArgKind, value: ArgValue, tok: &Token) -> TypedArg {
    TypedArg { column: tok.column, ..TypedArg::new(slot, kind, value, tok.text.clone()) }
}

fn is_int(s: &str) -> bool {
    let d = s.strip_prefix(['+', '-']).unwrap_or(s);
    !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())
}

/// Accepts what LAMMPS accepts as a floating point literal.
fn is_double(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let (int, frac) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return false;
    }
    match exp {
        None => true,
        Some(e) => is_int(e),
    }
}

fn is_star(s: &str) -> bool {
    if is_int(s) && !s.starts_with(['+', '-']) {
        return true;
    }
    match s.split_once('*') {
        Some((a, b)) => {
            let ok = |t: &str| t.is_empty() || t.bytes().all(|c| c.is_ascii_digit());
            ok(a) && ok(b) && !b.contains('*')
        }
        None => false,
    }
}

fn check(slot: &ArgSlot, text: &str) -> Result<ArgValue, (Code, String)> {
    let bare = lexical::unquote(text);
    if slot.also.iter().any(|a| a == bare) {
        return Ok(ArgValue::Text(bare.to_string()));
    }
    let mismatch = |what: &str| Err((Code::P003, format!("`{}` expects {what}, got `{text}`", slot.name)));
    match &slot.kind {
        ArgKind::Int => match text.parse::<i64>() {
            Ok(v) if is_int(text) => Ok(ArgValue::Int(v)),
            _ => mismatch("an integer"),
        },
        ArgKind::Float => match text.parse::<f64>() {
            Ok(v) if is_double(text) => Ok(ArgValue::Float(v)),
            _ => mismatch("a number"),
        },
        ArgKind::NumberEither => {
            if is_int(text) {
                if let Ok(v) = text.parse::<i64>() {
                    return Ok(ArgValue::Int(v));
                }
            }
            match text.parse::<f64>() {
                Ok(v) if is_double(text) => Ok(ArgValue::Float(v)),
                _ => mismatch("a number"),
            }
        }
        ArgKind::Identifier => {
            if !text.is_empty() && text.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                Ok(ArgValue::Text(text.to_string()))
            } else {
                mismatch("an identifier")
            }
        }
        ArgKind::EnumOf { values } => {
            if values.iter().any(|v| v == bare) {
                Ok(ArgValue::Text(bare.to_string()))
            } else {
                Err((Code::P005, format!("`{}` must be one of {}, got `{text}`", slot.name, values.join(", "))))
            }
        }
        ArgKind::Star => {
            if is_star(text) {
                Ok(ArgValue::Text(text.to_string()))
            } else {
                mismatch("a type or type range")
            }
        }
        ArgKind::Word | ArgKind::QuotedString | ArgKind::FilePath => Ok(ArgValue::Text(text.to_string())),
    }
}
