#![allow(dead_code)]

pub mod gen;
pub mod mutate;
pub mod oracle;
pub mod vary;

use std::path::PathBuf;
use std::sync::OnceLock;

use lammps_lint_core::normalizer::{normalize, CanonicalScript, NormalizeConfig, RawScript};
use lammps_lint_core::parser::{parse, AstScript, SignatureRegistry};

pub fn fixture_dir(sub: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(sub)
}

pub fn exemplar_source(prompt: &str) -> String {
    std::fs::read_to_string(fixture_dir("exemplars").join(format!("{prompt}.in"))).expect("exemplar")
}

pub fn canonical(source: &str) -> CanonicalScript {
    normalize(&RawScript::new(source, "test"), &NormalizeConfig::default()).expect("normalizes")
}

pub fn registry() -> &'static SignatureRegistry {
    static REGISTRY: OnceLock<SignatureRegistry> = OnceLock::new();
    REGISTRY.get_or_init(SignatureRegistry::lammps_core)
}

/// Normalize and parse, panicking on any error.
pub fn ast_of(source: &str) -> AstScript {
    let out = parse(&canonical(source), registry());
    assert!(!out.has_errors(), "{:#?}", out.diagnostics);
    out.ast
}
