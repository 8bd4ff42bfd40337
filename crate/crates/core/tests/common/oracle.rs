//! Straight-line interpreter over the raw script: a program counter, a
//! variable table, and `jump` that rescans from the top for its label.

use std::collections::HashMap;

enum Var {
    Seq { values: Vec<String>, at: usize },
    Expr(String),
    Text(String),
}

const NOISE: [&str; 4] = ["print", "log", "echo", "shell"];

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn logical_lines(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut acc = String::new();
    for raw in src.lines() {
        let line = strip_comment(raw).trim_end();
        if let Some(head) = line.strip_suffix('&') {
            acc.push_str(head);
            acc.push(' ');
            continue;
        }
        acc.push_str(line);
        let joined = std::mem::take(&mut acc);
        if !joined.trim().is_empty() {
            out.push(joined.split_whitespace().collect::<Vec<_>>().join(" "));
        }
    }
    out
}

struct Machine {
    vars: HashMap<String, Var>,
}

impl Machine {
    fn value(&self, name: &str) -> String {
        match &self.vars[name] {
            Var::Seq { values, at } => values[*at].clone(),
            Var::Text(t) => t.clone(),
            Var::Expr(e) => render(self.eval(e)),
        }
    }

    fn eval(&self, src: &str) -> f64 {
        let toks = tokens(src);
        let mut p = Parser { toks: &toks, i: 0, m: self };
        let v = p.sum();
        assert_eq!(p.i, toks.len(), "trailing input in `{src}`");
        v
    }

    fn substitute(&self, line: &str) -> String {
        let b = line.as_bytes();
        let mut out = String::new();
        let mut i = 0;
        while i < b.len() {
            if b[i] == b'$' {
                if b[i + 1] == b'{' {
                    let end = i + 2 + line[i + 2..].find('}').unwrap();
                    out.push_str(&self.value(&line[i + 2..end]));
                    i = end + 1;
                } else if b[i + 1] == b'(' {
                    let mut depth = 0;
                    let mut j = i + 1;
                    loop {
                        match b[j] {
                            b'(' => depth += 1,
                            b')' => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                        j += 1;
                    }
                    out.push_str(&render(self.eval(&line[i + 2..j])));
                    i = j + 1;
                } else {
                    out.push_str(&self.value(&line[i + 1..i + 2]));
                    i += 2;
                }
            } else {
                out.push(b[i] as char);
                i += 1;
            }
        }
        out
    }
}

fn render(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn tokens(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let c: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < c.len() {
        if c[i].is_whitespace() {
            i += 1;
        } else if c[i].is_ascii_digit() || c[i] == '.' {
            let s = i;
            while i < c.len() && (c[i].is_ascii_digit() || c[i] == '.') {
                i += 1;
            }
            out.push(c[s..i].iter().collect());
        } else if c[i].is_ascii_alphabetic() {
            let s = i;
            while i < c.len() && (c[i].is_ascii_alphanumeric() || c[i] == '_') {
                i += 1;
            }
            out.push(c[s..i].iter().collect());
        } else {
            out.push(c[i].to_string());
            i += 1;
        }
    }
    out
}

struct Parser<'a> {
    toks: &'a [String],
    i: usize,
    m: &'a Machine,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&str> {
        self.toks.get(self.i).map(String::as_str)
    }

    fn sum(&mut self) -> f64 {
        let mut v = self.product();
        while let Some(op @ ("+" | "-")) = self.peek() {
            let plus = op == "+";
            self.i += 1;
            let r = self.product();
            v = if plus { v + r } else { v - r };
        }
        v
    }

    fn product(&mut self) -> f64 {
        let mut v = self.unary();
        while let Some(op @ ("*" | "/")) = self.peek() {
            let times = op == "*";
            self.i += 1;
            let r = self.unary();
            v = if times { v * r } else { v / r };
        }
        v
    }

    fn unary(&mut self) -> f64 {
        if self.peek() == Some("-") {
            self.i += 1;
            return -self.unary();
        }
        let t = self.toks[self.i].clone();
        self.i += 1;
        if t == "(" {
            let v = self.sum();
            assert_eq!(self.peek(), Some(")"));
            self.i += 1;
            return v;
        }
        if let Some(name) = t.strip_prefix("v_") {
            return self.m.value(name).parse().unwrap();
        }
        t.parse().unwrap()
    }
}

/// Commands in execution order, variables substituted.
pub fn run(src: &str) -> Vec<String> {
    let lines: Vec<String> =
        logical_lines(src).into_iter().filter(|l| !NOISE.contains(&l.split(' ').next().unwrap())).collect();
    let mut m = Machine { vars: HashMap::new() };
    let mut out = Vec::new();
    let mut skip_jump = false;
    let mut pc = 0;
    let mut steps = 0;
    while pc < lines.len() {
        steps += 1;
        assert!(steps < 1_000_000);
        let line = m.substitute(&lines[pc]);
        let w: Vec<&str> = line.split(' ').collect();
        pc += 1;
        match w[0] {
            "label" => {}
            "jump" => {
                if std::mem::take(&mut skip_jump) {
                    continue;
                }
                let target = lines.iter().position(|l| l == &format!("label {}", w[2])).unwrap();
                pc = target + 1;
            }
            "next" => {
                let mut done = false;
                for name in &w[1..] {
                    if let Some(Var::Seq { values, at }) = m.vars.get_mut(*name) {
                        *at += 1;
                        done |= *at >= values.len();
                    }
                }
                if done {
                    for name in &w[1..] {
                        m.vars.remove(*name);
                    }
                    skip_jump = true;
                }
            }
            "variable" => {
                let name = w[1].to_string();
                let var = match w[2] {
                    "loop" => {
                        let pad = w.last() == Some(&"pad");
                        let nums: Vec<i64> =
                            w[3..].iter().filter(|a| **a != "pad").map(|a| a.parse().unwrap()).collect();
                        let (lo, hi) = if nums.len() == 1 { (1, nums[0]) } else { (nums[0], nums[1]) };
                        let width = hi.to_string().len();
                        let values =
                            (lo..=hi).map(|v| if pad { format!("{v:0width$}") } else { v.to_string() }).collect();
                        Var::Seq { values, at: 0 }
                    }
                    "index" => Var::Seq { values: w[3..].iter().map(|s| s.to_string()).collect(), at: 0 },
                    "equal" => Var::Expr(w[3..].join(" ")),
                    "string" => Var::Text(w[3..].join(" ")),
                    other => panic!("unsupported style {other}"),
                };
                // sequence variables that already exist keep their position
                let keep = matches!(m.vars.get(&name), Some(Var::Seq { .. })) && matches!(var, Var::Seq { .. });
                if !keep {
                    m.vars.insert(name, var);
                }
            }
            _ => out.push(line),
        }
    }
    out
}
