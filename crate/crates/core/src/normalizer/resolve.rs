//! Variable binding, `$` substitution and removal of `variable` commands.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::expr::{self, ExprError, Lookup};
use super::{CanonicalScript, NormalizeError, NormalizeErrorKind, SourceLine};
use crate::lexical::{self, QuoteState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarStyle {
    Equal,
    String,
    Index,
    Loop,
    Internal,
    /// Any style we do not evaluate (atom, python, format, getenv, ...).
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Redefinition {
    pub name: String,
    pub line: usize,
    pub previous: Option<Binding>,
}

/// Bindings in effect after the last line. `equal` bindings are always
/// finite numbers; names that could not be evaluated live in `deferred`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariableEnvironment {
    pub bindings: BTreeMap<String, Binding>,
    pub styles: BTreeMap<String, VarStyle>,
    pub deferred: BTreeMap<String, String>,
    pub audit: Vec<Redefinition>,
}

impl VariableEnvironment {
    pub fn get(&self, name: &str) -> Option<&Binding> {
        self.bindings.get(name)
    }

    fn lookup(&self, name: &str) -> Lookup {
        match self.bindings.get(name) {
            Some(Binding::Number(v)) => Lookup::Number(*v),
            Some(Binding::Text(t)) => Lookup::Text(t.clone()),
            None => match self.deferred.get(name) {
                Some(reason) => Lookup::Deferred(reason.clone()),
                None => Lookup::Missing,
            },
        }
    }

    fn bind(&mut self, name: &str, style: VarStyle, value: Result<Binding, String>, line: usize) {
        let previous = self.bindings.get(name).cloned();
        if self.styles.contains_key(name) {
            self.audit.push(Redefinition { name: name.to_string(), line, previous });
        }
        self.styles.insert(name.to_string(), style);
        match value {
            Ok(v) => {
                self.deferred.remove(name);
                self.bindings.insert(name.to_string(), v);
            }
            Err(reason) => {
                self.bindings.remove(name);
                self.deferred.insert(name.to_string(), reason);
            }
        }
    }

    /// Text inserted for a `${name}` / `$x` reference.
    fn render(&self, name: &str, line: usize) -> Result<String, NormalizeError> {
        match self.lookup(name) {
            Lookup::Number(v) => Ok(expr::render_number(v)),
            Lookup::Text(t) => Ok(t),
            Lookup::Deferred(reason) => Err(NormalizeError::new(
                NormalizeErrorKind::UnresolvableVariable,
                line,
                format!("variable `{name}` cannot be resolved statically: {reason}"),
            )),
            Lookup::Missing => Err(NormalizeError::new(
                NormalizeErrorKind::UnresolvableVariable,
                line,
                format!("variable `{name}` is not defined"),
            )),
        }
    }
}

fn expr_error(err: ExprError, line: usize) -> NormalizeError {
    match err {
        ExprError::Malformed(m) => NormalizeError::new(NormalizeErrorKind::MalformedExpression, line, m),
        ExprError::Unresolvable(m) => NormalizeError::new(NormalizeErrorKind::UnresolvableVariable, line, m),
    }
}

/// Expand `${name}`, `$x` and `$(expr)` outside quotes.
fn substitute(text: &str, env: &VariableEnvironment, line: usize) -> Result<String, NormalizeError> {
    if !text.contains('$') {
        return Ok(text.to_string());
    }
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut state = QuoteState::default();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let outside = {
            let mut probe = state;
            probe.step(b)
        };
        if outside && b == b'$' {
            let malformed = |m: &str| NormalizeError::new(NormalizeErrorKind::MalformedExpression, line, m);
            match bytes.get(i + 1) {
                Some(b'{') => {
                    let close = text[i + 2..].find('}').ok_or_else(|| malformed("unterminated `${`"))?;
                    let name = &text[i + 2..i + 2 + close];
                    if name.is_empty() {
                        return Err(malformed("empty `${}` reference"));
                    }
                    out.push_str(&env.render(name, line)?);
                    i += close + 3;
                }
                Some(b'(') => {
                    let mut depth = 0usize;
                    let mut end = None;
                    for (k, &c) in bytes.iter().enumerate().skip(i + 1) {
                        match c {
                            b'(' => depth += 1,
                            b')' => {
                                depth -= 1;
                                if depth == 0 {
                                    end = Some(k);
                                    break;
                                }
                            }
                            _ => {}
                        }
                    }
                    let end = end.ok_or_else(|| malformed("unterminated `$(`"))?;
                    let inner = &text[i + 2..end];
                    let value = expr::evaluate(inner, &|n| env.lookup(n)).map_err(|e| expr_error(e, line))?;
                    out.push_str(&expr::render_number(value));
                    i = end + 1;
                }
                Some(&c) if c.is_ascii_alphanumeric() || c == b'_' => {
                    out.push_str(&env.render(&text[i + 1..i + 2], line)?);
                    i += 2;
                }
                _ => return Err(malformed("`$` not followed by a variable reference")),
            }
            continue;
        }
        state.step(b);
        let ch = text[i..].chars().next().unwrap_or('\u{FFFD}');
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

fn define(words: &[&str], env: &mut VariableEnvironment, line: usize) -> Result<(), NormalizeError> {
    let malformed = |m: String| NormalizeError::new(NormalizeErrorKind::MalformedExpression, line, m);
    let (name, style) = match words {
        [_, name, style, ..] => (*name, *style),
        _ => return Err(malformed("`variable` needs a name and a style".into())),
    };
    let args = &words[3..];
    if style == "delete" {
        return Err(malformed(format!("`variable {name} delete` is not supported")));
    }
    if args.is_empty() {
        return Err(malformed(format!("variable `{name}` ({style}) has no value")));
    }
    let first = lexical::unquote(args[0]).to_string();
    let (style, value) = match style {
        "equal" => {
            let src: Vec<&str> = args.iter().map(|a| lexical::unquote(a)).collect();
            match expr::evaluate(&src.join(" "), &|n| env.lookup(n)) {
                Ok(v) => (VarStyle::Equal, Ok(Binding::Number(v))),
                Err(ExprError::Unresolvable(reason)) => (VarStyle::Equal, Err(reason)),
                Err(ExprError::Malformed(m)) => {
                    return Err(malformed(format!("variable `{name}`: {m}")));
                }
            }
        }
        "string" => {
            let text: Vec<&str> = args.iter().map(|a| lexical::unquote(a)).collect();
            (VarStyle::String, Ok(Binding::Text(text.join(" "))))
        }
        "index" | "world" | "universe" => (VarStyle::Index, Ok(Binding::Text(first))),
        "loop" | "uloop" => {
            let nums: Vec<&&str> = args.iter().filter(|a| **a != "pad").collect();
            let start = match nums.as_slice() {
                [_] => Ok(1),
                [lo, _] => lo.parse::<i64>(),
                _ => return Err(malformed(format!("bad loop declaration for `{name}`"))),
            }
            .map_err(|_| malformed(format!("loop bound of `{name}` must be an integer")))?;
            (VarStyle::Loop, Ok(Binding::Number(start as f64)))
        }
        "internal" => {
            let v = first
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("internal variable `{name}` needs a number")))?;
            (VarStyle::Internal, Ok(Binding::Number(v)))
        }
        other => (VarStyle::Other, Err(format!("`{other}`-style variables are evaluated at run time"))),
    };
    env.bind(name, style, value, line);
    Ok(())
}

/// Resolve all variables; see [`resolve_with_environment`].
pub fn resolve_variables(lines: &[SourceLine], origin: &str) -> Result<CanonicalScript, NormalizeError> {
    resolve_with_environment(lines, origin).map(|(s, _)| s)
}

/// Bind each `variable` as it is reached, substitute every `$` reference,
/// drop the `variable` lines and collapse whitespace.
pub fn resolve_with_environment(
    lines: &[SourceLine],
    origin: &str,
) -> Result<(CanonicalScript, VariableEnvironment), NormalizeError> {
    let mut env = VariableEnvironment::default();
    let mut out = Vec::with_capacity(lines.len());
    for line in lines {
        let n = line.line();
        let text = substitute(&line.text, &env, n)?;
        let (words, _) = lexical::split_words(&text);
        let words: Vec<&str> = words.iter().map(|w| w.text).collect();
        match words.first() {
            None => continue,
            Some(&"variable") => define(&words, &mut env, n)?,
            Some(_) => out.push(SourceLine::new(words.join(" "), line.provenance.clone())),
        }
    }
    Ok((CanonicalScript::new(origin, out), env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::RawScript;

    fn resolve(src: &str) -> Result<(Vec<String>, VariableEnvironment), NormalizeError> {
        resolve_with_environment(&RawScript::new(src, "t").lines(), "t")
            .map(|(s, env)| (s.lines.into_iter().map(|l| l.text).collect(), env))
    }

    #[test]
    fn equal_variable_substitutes() {
        let (lines, _) = resolve("variable a equal 5*3\nrun ${a}").unwrap();
        assert_eq!(lines, ["run 15"]);
    }

    #[test]
    fn heating_rate_arithmetic_binds_ten() {
        let (lines, env) = resolve("variable r equal (2500-300)/220").unwrap();
        assert!(lines.is_empty());
        assert_eq!(env.get("r"), Some(&Binding::Number(10.0)));
        assert_eq!(env.styles["r"], VarStyle::Equal);
    }

    #[test]
    fn runtime_keyword_is_unresolvable_on_use() {
        let err = resolve("variable t equal temp\nfix 1 all nvt temp ${t} ${t} 0.1").unwrap_err();
        assert_eq!(err.kind, NormalizeErrorKind::UnresolvableVariable);
        assert_eq!(err.line, 2);
        let (_, env) = resolve("variable t equal temp").unwrap();
        assert!(env.deferred.contains_key("t"));
        assert!(!env.bindings.contains_key("t"));
    }

    #[test]
    fn undefined_reference_is_unresolvable() {
        assert_eq!(resolve("run ${steps}").unwrap_err().kind, NormalizeErrorKind::UnresolvableVariable);
        assert_eq!(resolve("run $n").unwrap_err().kind, NormalizeErrorKind::UnresolvableVariable);
    }

    #[test]
    fn malformed_expression() {
        let err = resolve("variable x equal 3*(2+").unwrap_err();
        assert_eq!(err.kind, NormalizeErrorKind::MalformedExpression);
        assert_eq!(resolve("variable x delete").unwrap_err().kind, NormalizeErrorKind::MalformedExpression);
    }

    #[test]
    fn immediate_and_single_char_forms() {
        let (lines, _) =
            resolve("variable T equal 300\nvariable d equal 0.1\nfix 1 all nvt temp $T $(v_T*2) $(100*v_d)").unwrap();
        assert_eq!(lines, ["fix 1 all nvt temp 300 600 10"]);
    }

    #[test]
    fn string_and_index_verbatim() {
        let (lines, _) = resolve(
            "variable s string eam/alloy\nvariable f index Al.eam.alloy\npair_style ${s}\npair_coeff * * ${f} Al",
        )
        .unwrap();
        assert_eq!(lines, ["pair_style eam/alloy", "pair_coeff * * Al.eam.alloy Al"]);
    }

    #[test]
    fn redefinition_is_latest_wins_and_audited() {
        let (lines, env) = resolve("variable a equal 1\nvariable a equal 2\nrun ${a}").unwrap();
        assert_eq!(lines, ["run 2"]);
        assert_eq!(env.audit.len(), 1);
        assert_eq!(env.audit[0].previous, Some(Binding::Number(1.0)));
    }

    #[test]
    fn quoted_dollar_is_left_alone() {
        let (lines, _) = resolve("fix 1 all print 100 \"${x}\"").unwrap();
        assert_eq!(lines, ["fix 1 all print 100 \"${x}\""]);
    }

    #[test]
    fn non_integer_renders_shortest() {
        let (lines, _) = resolve("variable dt equal 1/1000\ntimestep ${dt}").unwrap();
        assert_eq!(lines, ["timestep 0.001"]);
    }
}
