//! Single-token mutations that break a slot's kind.

use lammps_lint_core::parser::{AstCommand, TypedArg};

/// A replacement token that no slot of this kind accepts.
pub fn violation(arg: &TypedArg) -> Option<&'static str> {
    match arg.kind.as_str() {
        "int" | "float" | "number" | "star" => Some("x9q"),
        "id" => Some("a.b-c"),
        "enum" => Some("zz_not_a_choice"),
        _ => None,
    }
}

pub fn typed_args(cmd: &AstCommand) -> Vec<&TypedArg> {
    cmd.args.iter().chain(cmd.keywords.iter().flat_map(|k| k.args.iter())).collect()
}

pub fn replace_at(line: &str, column: usize, len: usize, with: &str) -> String {
    let start = column - 1;
    format!("{}{}{}", &line[..start], with, &line[start + len..])
}

/// Exemplars followed by the loop/variable fixtures.
pub fn fixture_sources() -> Vec<String> {
    let mut out: Vec<String> = ["prompt1", "prompt2", "prompt3"].iter().map(|p| super::exemplar_source(p)).collect();
    let mut paths: Vec<_> =
        std::fs::read_dir(super::fixture_dir("normalizer")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    out.extend(paths.iter().map(|p| std::fs::read_to_string(p).unwrap()));
    out
}
