//! Structural unrolling of `label` / `next` / `jump SELF` loops.

use std::collections::{BTreeMap, BTreeSet};

use super::{NormalizeError, NormalizeErrorKind, SourceLine};
use crate::lexical::{self, QuoteState};

const MAX_LOOP_DEPTH: usize = 2;

#[derive(Debug, Clone)]
struct LoopVar {
    values: Vec<String>,
}

/// Unroll every loop. Loop variables are substituted textually in each copy
/// (`${x}`, `$x`, `v_x`); their declarations, labels, `next` and `jump`
/// commands do not survive.
pub fn expand_loops(lines: &[SourceLine], budget: usize) -> Result<Vec<SourceLine>, NormalizeError> {
    let mut produced = 0usize;
    unroll(lines, 0, &BTreeMap::new(), budget, &mut produced)
}

fn words(line: &SourceLine) -> Vec<&str> {
    lexical::split_words(&line.text).0.into_iter().map(|w| w.text).collect()
}

fn next_names(lines: &[SourceLine]) -> BTreeSet<String> {
    lines
        .iter()
        .filter(|l| l.command() == Some("next"))
        .flat_map(|l| words(l).into_iter().skip(1).map(str::to_string).collect::<Vec<_>>())
        .collect()
}

/// `variable NAME loop|uloop|index ...` declarations, as (name, values).
fn loop_declaration(line: &SourceLine) -> Result<Option<(String, LoopVar)>, NormalizeError> {
    let w = words(line);
    if w.first() != Some(&"variable") || w.len() < 3 {
        return Ok(None);
    }
    let name = w[1].to_string();
    let malformed = |msg: String| NormalizeError::new(NormalizeErrorKind::MalformedExpression, line.line(), msg);
    let values = match w[2] {
        "loop" | "uloop" => {
            let args = &w[3..];
            let pad = args.last() == Some(&"pad");
            let nums: Vec<&str> = args.iter().copied().filter(|a| *a != "pad").collect();
            let parse = |s: &str| {
                s.parse::<i64>()
                    .map_err(|_| malformed(format!("loop bound `{s}` of `{name}` must be an integer literal")))
            };
            let (lo, hi) = match nums.as_slice() {
                [n] => (1, parse(n)?),
                [a, b] => (parse(a)?, parse(b)?),
                _ => return Err(malformed(format!("bad loop declaration for `{name}`"))),
            };
            let width = hi.to_string().len();
            (lo..=hi).map(|v| if pad { format!("{v:0width$}") } else { v.to_string() }).collect()
        }
        "index" => w[3..].iter().map(|s| lexical::unquote(s).to_string()).collect(),
        _ => return Ok(None),
    };
    Ok(Some((name, LoopVar { values })))
}

fn unroll(
    lines: &[SourceLine],
    depth: usize,
    inherited: &BTreeMap<String, LoopVar>,
    budget: usize,
    produced: &mut usize,
) -> Result<Vec<SourceLine>, NormalizeError> {
    let looped = next_names(lines);
    let mut pending = inherited.clone();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        match line.command() {
            Some("variable") => {
                if let Some((name, var)) = loop_declaration(line)? {
                    if looped.contains(&name) {
                        pending.entry(name).or_insert(var);
                        i += 1;
                        continue;
                    }
                }
                push(&mut out, line.clone(), budget, produced)?;
                i += 1;
            }
            Some("label") => {
                let w = words(line);
                let label = w.get(1).copied().unwrap_or("");
                let jump = (i + 1..lines.len()).find(|&j| {
                    let jw = words(&lines[j]);
                    jw.first() == Some(&"jump") && jw.get(1) == Some(&"SELF") && jw.get(2) == Some(&label)
                });
                match jump {
                    None => i += 1,
                    Some(j) => {
                        if depth >= MAX_LOOP_DEPTH {
                            return Err(NormalizeError::new(
                                NormalizeErrorKind::LoopBudgetExceeded,
                                line.line(),
                                format!("loops nested deeper than {MAX_LOOP_DEPTH} levels"),
                            ));
                        }
                        let copies = unroll_one(&lines[i + 1..j], &lines[j], depth, &mut pending, budget, produced)?;
                        for l in copies {
                            push(&mut out, l, budget, produced)?;
                        }
                        i = j + 1;
                    }
                }
            }
            Some("jump") => {
                let w = words(line);
                match (w.get(1).copied(), w.get(2).copied()) {
                    (Some("SELF"), Some(label)) => {
                        let target = (i + 1..lines.len()).find(|&k| {
                            let kw = words(&lines[k]);
                            kw.first() == Some(&"label") && kw.get(1) == Some(&label)
                        });
                        match target {
                            Some(k) => i = k + 1,
                            None => {
                                return Err(NormalizeError::new(
                                    NormalizeErrorKind::UnterminatedLoop,
                                    line.line(),
                                    format!("jump target label `{label}` not found"),
                                ))
                            }
                        }
                    }
                    (Some("SELF"), None) => {
                        return Err(NormalizeError::new(
                            NormalizeErrorKind::LoopBudgetExceeded,
                            line.line(),
                            "`jump SELF` without a label restarts the script forever",
                        ))
                    }
                    (Some(file), _) => {
                        return Err(NormalizeError::new(
                            NormalizeErrorKind::MalformedExpression,
                            line.line(),
                            format!("jumps into other files (`{file}`) are not supported"),
                        ))
                    }
                    (None, _) => {
                        return Err(NormalizeError::new(
                            NormalizeErrorKind::MalformedExpression,
                            line.line(),
                            "`jump` needs a file argument",
                        ))
                    }
                }
            }
            // a stray `next` outside any loop body only advances a counter
            Some("next") => i += 1,
            _ => {
                push(&mut out, line.clone(), budget, produced)?;
                i += 1;
            }
        }
    }
    Ok(out)
}

fn unroll_one(
    body: &[SourceLine],
    jump: &SourceLine,
    depth: usize,
    pending: &mut BTreeMap<String, LoopVar>,
    budget: usize,
    produced: &mut usize,
) -> Result<Vec<SourceLine>, NormalizeError> {
    let mut tail = body.len();
    while tail > 0 && body[tail - 1].command() == Some("next") {
        tail -= 1;
    }
    let names: Vec<String> = body[tail..]
        .iter()
        .flat_map(|l| words(l).into_iter().skip(1).map(str::to_string).collect::<Vec<_>>())
        .collect();
    if names.is_empty() {
        return Err(NormalizeError::new(
            NormalizeErrorKind::LoopBudgetExceeded,
            jump.line(),
            "loop has no `next` before its `jump` and never terminates",
        ));
    }
    let own_nexts: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    let nested_next = body[..tail]
        .iter()
        .position(|l| l.command() == Some("next") && words(l).iter().skip(1).any(|n| own_nexts.contains(n)));
    if let Some(k) = nested_next {
        return Err(NormalizeError::new(
            NormalizeErrorKind::MalformedExpression,
            body[k].line(),
            "`next` for a loop variable must immediately precede its `jump`",
        ));
    }

    let mut inner: Vec<SourceLine> = Vec::with_capacity(tail);
    let mut vars: Vec<(String, LoopVar)> = Vec::new();
    for name in &names {
        if let Some(v) = pending.remove(name) {
            vars.push((name.clone(), v));
        }
    }
    for line in &body[..tail] {
        if let Some((name, var)) = loop_declaration(line)? {
            if own_nexts.contains(name.as_str()) {
                if !vars.iter().any(|(n, _)| *n == name) {
                    vars.push((name, var));
                }
                continue;
            }
        }
        inner.push(line.clone());
    }
    if let Some(missing) = names.iter().find(|n| !vars.iter().any(|(v, _)| v == *n)) {
        return Err(NormalizeError::new(
            NormalizeErrorKind::UnresolvableVariable,
            jump.line(),
            format!("`next {missing}` names no loop or index variable"),
        ));
    }

    let iterations = vars.iter().map(|(_, v)| v.values.len()).min().unwrap_or(0);
    let estimate = iterations.saturating_mul(inner.len());
    if produced.saturating_add(estimate) > budget {
        return Err(NormalizeError::new(
            NormalizeErrorKind::LoopBudgetExceeded,
            jump.line(),
            format!("unrolling would exceed the budget of {budget} lines"),
        ));
    }

    let mut out = Vec::new();
    for k in 0..iterations {
        let copy: Vec<SourceLine> = inner
            .iter()
            .map(|line| {
                let mut text = line.text.clone();
                for (name, var) in &vars {
                    text = substitute_loop_var(&text, name, &var.values[k]);
                }
                SourceLine::new(text, line.provenance.clone())
            })
            .collect();
        let mut unrolled = unroll(&copy, depth + 1, pending, budget, produced)?;
        out.append(&mut unrolled);
    }
    Ok(out)
}

fn push(
    out: &mut Vec<SourceLine>,
    line: SourceLine,
    budget: usize,
    produced: &mut usize,
) -> Result<(), NormalizeError> {
    *produced += 1;
    if *produced > budget {
        return Err(NormalizeError::new(
            NormalizeErrorKind::LoopBudgetExceeded,
            line.line(),
            format!("unrolling exceeded the budget of {budget} lines"),
        ));
    }
    out.push(line);
    Ok(())
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Replace `${name}`, `$name` (single-character names) and `v_name`
/// outside quotes.
pub(crate) fn substitute_loop_var(text: &str, name: &str, value: &str) -> String {
    let bytes = text.as_bytes();
    let braced = format!("${{{name}}}");
    let v_ref = format!("v_{name}");
    let mut out = String::with_capacity(text.len());
    let mut state = QuoteState::default();
    let mut i = 0;
    while i < bytes.len() {
        let outside = {
            let mut probe = state;
            probe.step(bytes[i])
        };
        if outside {
            let rest = &text[i..];
            if rest.starts_with(&braced) {
                out.push_str(value);
                i += braced.len();
                continue;
            }
            if name.len() == 1 && bytes[i] == b'$' && rest[1..].starts_with(name) {
                out.push_str(value);
                i += 2;
                continue;
            }
            let boundary_before = i == 0 || !is_ident_byte(bytes[i - 1]);
            if boundary_before && rest.starts_with(&v_ref) {
                let after = i + v_ref.len();
                if after == bytes.len() || !is_ident_byte(bytes[after]) {
                    out.push_str(value);
                    i = after;
                    continue;
                }
            }
        }
        state.step(bytes[i]);
        let ch = text[i..].chars().next().unwrap_or('\u{FFFD}');
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::RawScript;

    fn expand(src: &str) -> Result<Vec<String>, NormalizeError> {
        expand_loops(&RawScript::new(src, "t").lines(), 100_000).map(|v| v.into_iter().map(|l| l.text).collect())
    }

    #[test]
    fn unrolls_simple_loop() {
        let src = "variable i loop 2\nlabel top\nrun 100\nnext i\njump SELF top";
        assert_eq!(expand(src).unwrap(), ["run 100", "run 100"]);
    }

    #[test]
    fn substitutes_loop_variable_per_copy() {
        let src = "variable i loop 3\nlabel l\nfix 1 all nvt temp ${i}00 $i 0.1\nnext i\njump SELF l";
        assert_eq!(
            expand(src).unwrap(),
            ["fix 1 all nvt temp 100 1 0.1", "fix 1 all nvt temp 200 2 0.1", "fix 1 all nvt temp 300 3 0.1"]
        );
    }

    #[test]
    fn declaration_after_label_is_consumed() {
        let src = "label l\nvariable k loop 2\nrun ${k}\nnext k\njump SELF l\nrun 7";
        assert_eq!(expand(src).unwrap(), ["run 1", "run 2", "run 7"]);
    }

    #[test]
    fn index_loop_over_words() {
        let src = "variable s index fcc bcc\nlabel l\nlattice ${s} 4.0\nnext s\njump SELF l";
        assert_eq!(expand(src).unwrap(), ["lattice fcc 4.0", "lattice bcc 4.0"]);
    }

    #[test]
    fn nested_loops_to_depth_two() {
        let src = "variable a loop 2\nlabel outer\nvariable b loop 2\nlabel inner\nrun ${a}${b}\nnext b\njump SELF inner\nnext a\njump SELF outer";
        assert_eq!(expand(src).unwrap(), ["run 11", "run 12", "run 21", "run 22"]);
    }

    #[test]
    fn depth_three_is_rejected() {
        let src = "variable a loop 2\nlabel l1\nvariable b loop 2\nlabel l2\nvariable c loop 2\nlabel l3\nrun 1\nnext c\njump SELF l3\nnext b\njump SELF l2\nnext a\njump SELF l1";
        assert_eq!(expand(src).unwrap_err().kind, NormalizeErrorKind::LoopBudgetExceeded);
    }

    #[test]
    fn no_loops_is_identity() {
        let src = "units metal\nvariable T equal 300\nrun 10";
        assert_eq!(expand(src).unwrap(), ["units metal", "variable T equal 300", "run 10"]);
    }

    #[test]
    fn missing_label_is_unterminated() {
        let err = expand("run 1\njump SELF missing_label").unwrap_err();
        assert_eq!(err.kind, NormalizeErrorKind::UnterminatedLoop);
        assert_eq!(err.line, 2);
    }

    #[test]
    fn forward_jump_skips() {
        assert_eq!(expand("run 1\njump SELF end\nrun 2\nlabel end\nrun 3").unwrap(), ["run 1", "run 3"]);
    }

    #[test]
    fn other_file_jump_is_rejected() {
        assert_eq!(expand("jump in.other lbl").unwrap_err().kind, NormalizeErrorKind::MalformedExpression);
    }

    #[test]
    fn budget_is_enforced() {
        let src = "variable i loop 200000\nlabel l\nrun 1\nnext i\njump SELF l";
        assert_eq!(expand(src).unwrap_err().kind, NormalizeErrorKind::LoopBudgetExceeded);
    }

    #[test]
    fn loop_without_next_never_ends() {
        assert_eq!(expand("label l\nrun 1\njump SELF l").unwrap_err().kind, NormalizeErrorKind::LoopBudgetExceeded);
    }

    #[test]
    fn v_reference_substitution_respects_word_boundaries() {
        assert_eq!(substitute_loop_var("variable y equal v_i*2+v_ii", "i", "3"), "variable y equal 3*2+v_ii");
        assert_eq!(
            substitute_loop_var("fix 1 all print 1 \"${i}\" x ${i}", "i", "4"),
            "fix 1 all print 1 \"${i}\" x 4"
        );
    }
}
