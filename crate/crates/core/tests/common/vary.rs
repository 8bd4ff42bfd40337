//! Registry scripts rewritten through variables and cosmetic noise.

use lammps_lint_core::normalizer::{normalize, NormalizeConfig, RawScript};

/// Random scripts with some numeric tokens routed through variables.
#[derive(Debug, Clone)]
pub struct Variant {
    pub lines: Vec<String>,
}

pub fn registry_script(seed: [u8; 32], n: usize) -> Vec<String> {
    super::gen::script(super::registry(), n, &mut super::gen::rng(seed))
}

fn is_number(t: &str) -> bool {
    t.parse::<f64>().is_ok() && t.bytes().all(|b| b.is_ascii_digit() || b == b'.' || b == b'-')
}

/// Replace every `stride`-th numeric token by `${prefix<k>}`, declared just before use.
pub fn with_variables(lines: &[String], prefix: &str, stride: usize) -> Variant {
    let mut out = Vec::new();
    let mut k = 0;
    for line in lines {
        let mut decls = Vec::new();
        let words: Vec<String> = line
            .split(' ')
            .enumerate()
            .map(|(i, w)| {
                if i > 0 && is_number(w) {
                    k += 1;
                    if k % stride == 0 {
                        decls.push(format!("variable {prefix}{k} equal {w}"));
                        return format!("${{{prefix}{k}}}");
                    }
                }
                w.to_string()
            })
            .collect();
        out.extend(decls);
        out.push(words.join(" "));
    }
    Variant { lines: out }
}

pub fn decorate(lines: &[String], noise: &[u8]) -> String {
    let mut out = String::from("# header comment\n\n");
    for (i, line) in lines.iter().enumerate() {
        let n = noise.get(i).copied().unwrap_or(0);
        let words: Vec<&str> = line.split(' ').collect();
        let gap = if n & 1 == 1 { "   " } else { "\t" };
        let body = if n & 2 == 2 && words.len() > 2 {
            format!("{} &\n    {}", words[..2].join(gap), words[2..].join(gap))
        } else {
            words.join(gap)
        };
        out.push_str(&"  ".repeat((n >> 2) as usize % 3));
        out.push_str(&body);
        if n & 32 == 32 {
            out.push_str("   # trailing note");
        }
        out.push('\n');
        if n & 64 == 64 {
            out.push_str("\n# between commands\n");
        }
    }
    out
}

pub fn canonical_text(src: &str) -> Option<String> {
    normalize(&RawScript::new(src, "p"), &NormalizeConfig::default()).ok().map(|c| c.text())
}
