//! Symbol tables and cross-reference checks over a parsed script.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Code, Diagnostic, Location};
use crate::parser::{AstCommand, AstScript, TypedArg};

/// Kinds of named entity a script can define.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Namespace {
    Region,
    Group,
    Fix,
    Compute,
    Dump,
}

impl Namespace {
    pub fn label(&self) -> &'static str {
        match self {
            Namespace::Region => "region",
            Namespace::Group => "group",
            Namespace::Fix => "fix",
            Namespace::Compute => "compute",
            Namespace::Dump => "dump",
        }
    }

    fn defined_by(command: &str) -> Option<Namespace> {
        match command {
            "region" => Some(Namespace::Region),
            "group" => Some(Namespace::Group),
            "fix" => Some(Namespace::Fix),
            "compute" => Some(Namespace::Compute),
            "dump" => Some(Namespace::Dump),
            _ => None,
        }
    }

    fn removed_by(command: &str) -> Option<Namespace> {
        match command {
            "unfix" => Some(Namespace::Fix),
            "uncompute" => Some(Namespace::Compute),
            "undump" => Some(Namespace::Dump),
            _ => None,
        }
    }

    /// Namespace referenced by an argument filling `slot`.
    fn referenced_by(slot: &str) -> Option<Namespace> {
        match slot {
            "group" | "group2" => Some(Namespace::Group),
            "region" => Some(Namespace::Region),
            "fix_id" => Some(Namespace::Fix),
            "compute_id" => Some(Namespace::Compute),
            "dump_id" => Some(Namespace::Dump),
            _ => None,
        }
    }
}

/// Built-in names that exist before the first command.
pub const BUILTIN_GROUPS: &[&str] = &["all"];
pub const BUILTIN_COMPUTES: &[&str] = &["thermo_temp", "thermo_press", "thermo_pe"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "index")]
pub enum Definition {
    Builtin,
    Command(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duplicate {
    pub namespace: Namespace,
    pub id: String,
    pub first: Definition,
    pub command: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolTable {
    pub regions: BTreeMap<String, Definition>,
    pub groups: BTreeMap<String, Definition>,
    pub fixes: BTreeMap<String, Definition>,
    pub computes: BTreeMap<String, Definition>,
    pub dumps: BTreeMap<String, Definition>,
    pub duplicates: Vec<Duplicate>,
}

impl SymbolTable {
    pub fn with_builtins() -> Self {
        let mut t = SymbolTable::default();
        for g in BUILTIN_GROUPS {
            t.groups.insert(g.to_string(), Definition::Builtin);
        }
        for c in BUILTIN_COMPUTES {
            t.computes.insert(c.to_string(), Definition::Builtin);
        }
        t
    }

    pub fn map(&self, ns: Namespace) -> &BTreeMap<String, Definition> {
        match ns {
            Namespace::Region => &self.regions,
            Namespace::Group => &self.groups,
            Namespace::Fix => &self.fixes,
            Namespace::Compute => &self.computes,
            Namespace::Dump => &self.dumps,
        }
    }

    fn map_mut(&mut self, ns: Namespace) -> &mut BTreeMap<String, Definition> {
        match ns {
            Namespace::Region => &mut self.regions,
            Namespace::Group => &mut self.groups,
            Namespace::Fix => &mut self.fixes,
            Namespace::Compute => &mut self.computes,
            Namespace::Dump => &mut self.dumps,
        }
    }

    pub fn lookup(&self, ns: Namespace, id: &str) -> Option<Definition> {
        self.map(ns).get(id).copied()
    }
}

/// A definition site in a command.
fn definitions(cmd: &AstCommand) -> Vec<(Namespace, String)> {
    let mut out = Vec::new();
    if let Some(ns) = Namespace::defined_by(&cmd.name) {
        if let Some(id) = cmd.arg("id") {
            out.push((ns, id.word().to_string()));
        }
    }
    for arg in all_args(cmd) {
        if arg.slot == "new_group" {
            out.push((Namespace::Group, arg.word().to_string()));
        }
    }
    out
}

fn all_args(cmd: &AstCommand) -> impl Iterator<Item = &TypedArg> {
    cmd.args.iter().chain(cmd.keywords.iter().flat_map(|k| k.args.iter()))
}

/// `c_ID`, `c_ID[2]`, `f_ID` inside free-form word arguments.
fn inline_reference(word: &str) -> Option<(Namespace, &str)> {
    let (ns, rest) = match word.strip_prefix("c_") {
        Some(r) => (Namespace::Compute, r),
        None => (Namespace::Fix, word.strip_prefix("f_")?),
    };
    let id = rest.split('[').next().unwrap_or("");
    let ok = !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
    ok.then_some((ns, id))
}

/// A reference site: namespace, ID and the argument it came from.
fn references(cmd: &AstCommand) -> Vec<(Namespace, String, &TypedArg)> {
    let mut out = Vec::new();
    for arg in all_args(cmd) {
        let word = arg.word();
        if word == "NULL" {
            continue;
        }
        if let Some(ns) = Namespace::referenced_by(&arg.slot) {
            out.push((ns, word.to_string(), arg));
        } else if arg.kind == "word" {
            if let Some((ns, id)) = inline_reference(word) {
                out.push((ns, id.to_string(), arg));
            }
        }
    }
    out
}

/// Every definition in the script, first definition wins; later ones are
/// recorded as duplicates.
pub fn build_symbol_table(ast: &AstScript) -> SymbolTable {
    let mut table = SymbolTable::with_builtins();
    for (index, cmd) in ast.commands.iter().enumerate() {
        for (ns, id) in definitions(cmd) {
            match table.lookup(ns, &id) {
                Some(first) => table.duplicates.push(Duplicate { namespace: ns, id, first, command: index }),
                None => {
                    table.map_mut(ns).insert(id, Definition::Command(index));
                }
            }
        }
    }
    table
}

fn location(cmd: &AstCommand, arg: Option<&TypedArg>) -> Location {
    let column = arg.map(|a| a.column).filter(|&c| c > 0).unwrap_or(1);
    let end_column = arg.map(|a| column + a.text.len()).unwrap_or(column + cmd.name.len());
    Location { line_index: cmd.span.line_index, raw_line: cmd.span.raw_line(), column, end_column }
}

/// Reference checks in command order against the full table.
///
/// Removal commands (`unfix`, `uncompute`, `undump`) end an entity's
/// lifetime: a later reference is undefined, and a later definition with
/// the same ID is not a duplicate.
pub fn check_references(ast: &AstScript, table: &SymbolTable) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut live = SymbolTable::with_builtins();
    let mut removed: BTreeMap<(Namespace, String), usize> = BTreeMap::new();

    for (index, cmd) in ast.commands.iter().enumerate() {
        if let Some(ns) = Namespace::removed_by(&cmd.name) {
            let Some(arg) = cmd.args.first() else { continue };
            let id = arg.word().to_string();
            if live.map_mut(ns).remove(&id).is_some() {
                removed.insert((ns, id), index);
            } else if table.lookup(ns, &id).is_some() || removed.contains_key(&(ns, id.clone())) {
                let later = matches!(table.lookup(ns, &id), Some(Definition::Command(d)) if d > index);
                let (code, what) = if later {
                    (Code::S004, "before it is defined")
                } else {
                    (Code::S003, "after it was already removed")
                };
                diags.push(Diagnostic::new(
                    code,
                    location(cmd, Some(arg)),
                    format!("`{}` removes {} `{id}` {what}", cmd.name, ns.label()),
                ));
            } else {
                diags.push(Diagnostic::new(
                    Code::S003,
                    location(cmd, Some(arg)),
                    format!("`{}` names {} `{id}`, which is never defined", cmd.name, ns.label()),
                ));
            }
            continue;
        }

        let defs = definitions(cmd);
        for (ns, id, arg) in references(cmd) {
            if live.lookup(ns, &id).is_some() {
                continue;
            }
            let defined_later = ast.commands[index + 1..]
                .iter()
                .any(|later| definitions(later).iter().any(|(n, d)| *n == ns && *d == id));
            let (code, message) = if let Some(&at) = removed.get(&(ns, id.clone())) {
                (
                    Code::S001,
                    format!("{} `{id}` was removed by command {} and is no longer defined", ns.label(), at + 1),
                )
            } else if defined_later {
                (Code::S004, format!("{} `{id}` is used before it is defined", ns.label()))
            } else {
                (Code::S001, format!("{} `{id}` is not defined", ns.label()))
            };
            diags.push(Diagnostic::new(code, location(cmd, Some(arg)), message));
        }

        for (ns, id) in defs {
            if let Some(first) = live.lookup(ns, &id) {
                let first_text = match first {
                    Definition::Builtin => "a built-in".to_string(),
                    Definition::Command(i) => format!("command {}", i + 1),
                };
                let arg = cmd.arg("id");
                diags.push(Diagnostic::new(
                    Code::S002,
                    location(cmd, arg),
                    format!("{} `{id}` is already defined by {first_text}", ns.label()),
                ));
            } else {
                live.map_mut(ns).insert(id.clone(), Definition::Command(index));
                removed.remove(&(ns, id));
            }
        }
    }
    diags.sort_by_key(|d| (d.location.raw_line, d.location.line_index, d.code, d.location.column));
    diags
}

/// Build the table and check references in one step.
pub fn analyze(ast: &AstScript) -> (SymbolTable, Vec<Diagnostic>) {
    let table = build_symbol_table(ast);
    let diags = check_references(ast, &table);
    (table, diags)
}

/// Whether a script passes the parser stage: no parser errors and no
/// undefined references or dangling removals. Ordering warnings do not count.
pub fn passes_parser(parse_diags: &[Diagnostic], semantic: &[Diagnostic]) -> bool {
    !parse_diags.iter().any(Diagnostic::is_error) && !semantic.iter().any(|d| matches!(d.code, Code::S001 | Code::S003))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::{CanonicalScript, SourceLine};
    use crate::parser::{parse, SignatureRegistry};

    fn ast(lines: &[&str]) -> AstScript {
        let script = CanonicalScript::new(
            "t",
            lines.iter().enumerate().map(|(i, l)| SourceLine::new(*l, vec![i + 1])).collect(),
        );
        let out = parse(&script, &SignatureRegistry::lammps_core());
        assert!(!out.has_errors(), "{:?}", out.diagnostics);
        out.ast
    }

    fn codes(lines: &[&str]) -> Vec<Code> {
        analyze(&ast(lines)).1.iter().map(|d| d.code).collect()
    }

    #[test]
    fn table_contents() {
        let t = build_symbol_table(&ast(&["region box block 0 5 0 5 0 5"]));
        assert_eq!(t.regions.keys().collect::<Vec<_>>(), vec!["box"]);
        let t = build_symbol_table(&ast(&[]));
        assert_eq!(t.groups.len(), 1);
        assert_eq!(t.groups["all"], Definition::Builtin);
        let t = build_symbol_table(&ast(&["group projectile type 1", "group projectile type 2"]));
        assert_eq!(t.groups["projectile"], Definition::Command(0));
        assert_eq!(t.duplicates.len(), 1);
    }

    #[test]
    fn reference_codes() {
        assert_eq!(codes(&["create_box 1 simbox"]), vec![Code::S001]);
        assert!(codes(&["fix 1 all nvt temp 300 300 0.1"]).is_empty());
        assert_eq!(codes(&["velocity proj set 0 0 -20 sum yes", "group proj type 1"]), vec![Code::S004]);
        assert_eq!(codes(&["unfix 9"]), vec![Code::S003]);
        assert_eq!(codes(&["group g type 1", "group g type 2"]), vec![Code::S002]);
        assert_eq!(codes(&["fix 1 all nve", "unfix 1", "fix_modify 1 energy yes"]), vec![Code::S001]);
        assert!(codes(&["fix 1 all nve", "unfix 1", "fix 1 all nve"]).is_empty());
        assert_eq!(codes(&["thermo_style custom step c_missing"]), vec![Code::S001]);
        assert!(codes(&["thermo_style custom step c_thermo_temp temp"]).is_empty());
    }

    #[test]
    fn parser_pass_excludes_ordering_warnings() {
        let a = ast(&["velocity proj set 0 0 -20", "group proj type 1"]);
        let (_, d) = analyze(&a);
        assert!(passes_parser(&[], &d));
        let a = ast(&["create_box 1 simbox"]);
        let (_, d) = analyze(&a);
        assert!(!passes_parser(&[], &d));
    }
}
