//! Random commands drawn from the signature registry.

use std::collections::BTreeSet;

use lammps_lint_core::parser::{ArgKind, ArgSlot, CommandSignature, Grammar, SignatureRegistry};
use proptest::prelude::RngExt;
use proptest::test_runner::{RngAlgorithm, TestRng};

pub fn rng(seed: [u8; 32]) -> TestRng {
    TestRng::from_seed(RngAlgorithm::ChaCha, &seed)
}

fn value(slot: &ArgSlot, rng: &mut TestRng) -> String {
    if !slot.also.is_empty() && rng.random_bool(0.1) {
        return slot.also[rng.random_range(0..slot.also.len())].clone();
    }
    match &slot.kind {
        ArgKind::Int => rng.random_range(-20i64..5000).to_string(),
        ArgKind::Float => format!("{}", rng.random_range(-5000i64..50000) as f64 / 100.0),
        ArgKind::NumberEither => {
            if rng.random_bool(0.5) {
                rng.random_range(0i64..999).to_string()
            } else {
                format!("{}e-{}", rng.random_range(1..99), rng.random_range(1..4))
            }
        }
        ArgKind::Word => format!("w{}", rng.random_range(0..1000)),
        ArgKind::QuotedString => format!("\"s{}\"", rng.random_range(0..1000)),
        ArgKind::Identifier => format!("id{}", rng.random_range(0..50)),
        ArgKind::EnumOf { values } => values[rng.random_range(0..values.len())].clone(),
        ArgKind::Star => match rng.random_range(0..4) {
            0 => "*".to_string(),
            1 => format!("{}*", rng.random_range(1..4)),
            2 => format!("{}*{}", rng.random_range(1..3), rng.random_range(3..6)),
            _ => rng.random_range(1..5).to_string(),
        },
        ArgKind::FilePath => format!("data/file{}.txt", rng.random_range(0..100)),
    }
}

/// A value that is not one of `keywords`, so it cannot end a positional run.
fn free_value(slot: &ArgSlot, keywords: &BTreeSet<&str>, rng: &mut TestRng) -> String {
    let mut v = value(slot, rng);
    for _ in 0..20 {
        if !keywords.contains(v.as_str()) {
            break;
        }
        v = value(slot, rng);
    }
    v
}

fn emit(g: &Grammar, base: Option<&Grammar>, out: &mut Vec<String>, rng: &mut TestRng) {
    let mut keywords: BTreeSet<&str> = g.keywords.keys().map(String::as_str).collect();
    if let Some(b) = base {
        keywords.extend(b.keywords.keys().map(String::as_str));
    }
    let n_pos =
        if g.variadic.is_some() { g.positional.len() } else { rng.random_range(g.min_positional..=g.positional.len()) };
    for slot in &g.positional[..n_pos] {
        out.push(free_value(slot, &keywords, rng));
    }
    if let Some(slot) = &g.variadic {
        for _ in 0..g.min_variadic + rng.random_range(0..3) {
            out.push(free_value(slot, &keywords, rng));
        }
    }
    let mut chosen: Vec<&String> = g.required_keywords.iter().collect();
    let all = g.keywords.iter().chain(base.into_iter().flat_map(|b| b.keywords.iter()));
    for (name, _) in all {
        if !chosen.contains(&name) && rng.random_bool(0.3) {
            chosen.push(name);
        }
    }
    for i in (1..chosen.len()).rev() {
        chosen.swap(i, rng.random_range(0..=i));
    }
    for name in chosen {
        let group = g.keywords.get(name).or_else(|| base.and_then(|b| b.keywords.get(name))).unwrap();
        out.push(name.clone());
        for slot in &group.args {
            out.push(value(slot, rng));
        }
        if let Some(slot) = &group.variadic {
            for _ in 0..group.min_variadic + rng.random_range(0..3) {
                out.push(free_value(slot, &keywords, rng));
            }
        }
    }
}

/// One slot-conforming command line for `sig`.
pub fn command_line(sig: &CommandSignature, rng: &mut TestRng) -> String {
    let mut out = vec![sig.name.clone()];
    match sig.style_slot {
        None => emit(&sig.grammar, None, &mut out, rng),
        Some(slot) => {
            let styles: Vec<&String> = sig.styles.keys().collect();
            let style = styles[rng.random_range(0..styles.len())];
            for (k, s) in sig.grammar.positional[..=slot].iter().enumerate() {
                out.push(if k == slot { style.clone() } else { value(s, rng) });
            }
            emit(&sig.styles[style], Some(&sig.grammar), &mut out, rng);
        }
    }
    out.join(" ")
}

/// `n` random commands from the registry.
pub fn script(registry: &SignatureRegistry, n: usize, rng: &mut TestRng) -> Vec<String> {
    let names: Vec<&str> = registry.names().collect();
    (0..n)
        .map(|_| {
            let sig = registry.get(names[rng.random_range(0..names.len())]).unwrap();
            command_line(sig, rng)
        })
        .collect()
}
