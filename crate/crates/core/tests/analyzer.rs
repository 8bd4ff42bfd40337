mod common;

use std::collections::BTreeSet;

use lammps_lint_core::analyzer::analyze;
use lammps_lint_core::diagnostics::Code;
use proptest::prelude::RngExt;
use proptest::prelude::*;
use proptest::test_runner::TestRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ns {
    Region,
    Group,
    Fix,
    Compute,
    Dump,
}

#[derive(Debug, Clone)]
struct Line {
    text: String,
    defs: Vec<(Ns, String)>,
    refs: Vec<(Ns, String)>,
}

struct Namer<'a> {
    rng: &'a mut TestRng,
    /// When set, references only name IDs that are already defined.
    defined: Option<&'a BTreeSet<(Ns, String)>>,
}

impl Namer<'_> {
    fn fresh(&mut self, prefix: &str) -> String {
        format!("{prefix}{}", self.rng.random_range(1..4))
    }

    fn existing(&mut self, ns: Ns, prefix: &str) -> Option<String> {
        match self.defined {
            None => Some(self.fresh(prefix)),
            Some(set) => {
                let ids: Vec<&String> = set.iter().filter(|(n, _)| *n == ns).map(|(_, id)| id).collect();
                (!ids.is_empty()).then(|| ids[self.rng.random_range(0..ids.len())].clone())
            }
        }
    }

    fn group(&mut self) -> Option<String> {
        if self.rng.random_bool(0.2) {
            Some("all".to_string())
        } else {
            self.existing(Ns::Group, "g").or_else(|| Some("all".to_string()))
        }
    }
}

fn random_line(namer: &mut Namer) -> Option<Line> {
    let l = |text: String, defs: Vec<(Ns, String)>, refs: Vec<(Ns, String)>| Some(Line { text, defs, refs });
    match namer.rng.random_range(0..11) {
        0 => {
            let r = namer.fresh("r");
            l(format!("region {r} block 0 1 0 1 0 1"), vec![(Ns::Region, r)], vec![])
        }
        1 => {
            let (g, r) = (namer.fresh("g"), namer.existing(Ns::Region, "r")?);
            l(format!("group {g} region {r}"), vec![(Ns::Group, g)], vec![(Ns::Region, r)])
        }
        2 => {
            let g = namer.fresh("g");
            l(format!("group {g} type 1"), vec![(Ns::Group, g)], vec![])
        }
        3 => {
            let (f, g) = (namer.fresh("f"), namer.group()?);
            l(format!("fix {f} {g} nve"), vec![(Ns::Fix, f)], vec![(Ns::Group, g)])
        }
        4 => {
            let (c, g) = (namer.fresh("c"), namer.group()?);
            l(format!("compute {c} {g} temp"), vec![(Ns::Compute, c)], vec![(Ns::Group, g)])
        }
        5 => {
            let (d, g) = (namer.fresh("d"), namer.group()?);
            l(format!("dump {d} {g} atom 100 out.dump"), vec![(Ns::Dump, d)], vec![(Ns::Group, g)])
        }
        6 => {
            let g = namer.group()?;
            l(format!("velocity {g} create 300 4928"), vec![], vec![(Ns::Group, g)])
        }
        7 => {
            let (c, f) = (namer.existing(Ns::Compute, "c")?, namer.existing(Ns::Fix, "f")?);
            l(format!("thermo_style custom step temp c_{c} f_{f}[1]"), vec![], vec![(Ns::Compute, c), (Ns::Fix, f)])
        }
        8 => {
            let f = namer.existing(Ns::Fix, "f")?;
            l(format!("fix_modify {f} energy yes"), vec![], vec![(Ns::Fix, f)])
        }
        9 => {
            let d = namer.existing(Ns::Dump, "d")?;
            l(format!("dump_modify {d} sort id"), vec![], vec![(Ns::Dump, d)])
        }
        _ => {
            let r = namer.existing(Ns::Region, "r")?;
            l(format!("create_atoms 1 region {r}"), vec![], vec![(Ns::Region, r)])
        }
    }
}

/// Random script without duplicate definitions. `ordered` scripts only
/// reference IDs defined earlier.
fn random_script(seed: [u8; 32], n: usize, ordered: bool) -> Vec<Line> {
    let mut rng = common::gen::rng(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let snapshot = seen.clone();
        let mut namer = Namer { rng: &mut rng, defined: ordered.then_some(&snapshot) };
        let Some(line) = random_line(&mut namer) else { continue };
        if line.defs.iter().any(|d| seen.contains(d)) {
            continue;
        }
        seen.extend(line.defs.iter().cloned());
        out.push(line);
    }
    out
}

/// Brute-force verdicts: for each reference, scan the whole script for
/// its definition.
fn oracle(lines: &[Line]) -> BTreeSet<(usize, Code)> {
    let mut out = BTreeSet::new();
    for (i, line) in lines.iter().enumerate() {
        for (ns, id) in &line.refs {
            if *ns == Ns::Group && id == "all" {
                continue;
            }
            let defined_at = lines.iter().position(|l| l.defs.iter().any(|(n, d)| n == ns && d == id));
            match defined_at {
                Some(j) if j < i => {}
                Some(_) => {
                    out.insert((i, Code::S004));
                }
                None => {
                    out.insert((i, Code::S001));
                }
            }
        }
    }
    out
}

fn analyzer_codes(lines: &[Line]) -> BTreeSet<(usize, Code)> {
    let src: Vec<&str> = lines.iter().map(|l| l.text.as_str()).collect();
    let ast = common::ast_of(&src.join("\n"));
    let (_, diags) = analyze(&ast);
    diags.iter().map(|d| (d.location.line_index, d.code)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_brute_force_scan(seed in any::<[u8; 32]>(), n in 1usize..25) {
        let lines = random_script(seed, n, seed[0] % 2 == 0);
        prop_assert_eq!(analyzer_codes(&lines), oracle(&lines));
    }

    #[test]
    fn deleting_a_used_definition_is_detected(seed in any::<[u8; 32]>(), n in 2usize..25) {
        let lines = random_script(seed, n, true);
        prop_assert!(oracle(&lines).is_empty());
        for (k, line) in lines.iter().enumerate() {
            let used = line.defs.iter().any(|d| lines.iter().enumerate().any(|(i, l)| i != k && l.refs.contains(d)));
            if !used {
                continue;
            }
            let mut cut = lines.clone();
            cut.remove(k);
            let codes = analyzer_codes(&cut);
            prop_assert!(codes.iter().any(|(_, c)| matches!(c, Code::S001 | Code::S004)), "removed `{}`", line.text);
        }
    }
}

#[test]
fn exemplars_are_clean() {
    for p in ["prompt1", "prompt2", "prompt3"] {
        let (_, diags) = analyze(&common::ast_of(&common::exemplar_source(p)));
        assert!(diags.is_empty(), "{p}: {diags:?}");
    }
}

#[test]
fn exemplar_definitions_are_load_bearing() {
    let src = common::exemplar_source("prompt3");
    let ast = common::ast_of(&src);
    let canon = common::canonical(&src);
    for (k, cmd) in ast.commands.iter().enumerate() {
        if !matches!(cmd.name.as_str(), "region" | "group" | "fix" | "compute" | "dump") {
            continue;
        }
        let id = cmd.arg("id").unwrap().word().to_string();
        let used = canon.lines.iter().enumerate().any(|(i, l)| i != k && l.text.split(' ').skip(1).any(|w| w == id));
        if !used {
            continue;
        }
        let rest: Vec<&str> =
            canon.lines.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, l)| l.text.as_str()).collect();
        let (_, diags) = analyze(&common::ast_of(&rest.join("\n")));
        // an orphaned `unfix` reports the dangling-removal code
        let hit = diags.iter().any(|d| matches!(d.code, Code::S001 | Code::S003 | Code::S004));
        assert!(hit, "removing `{}`", canon.lines[k].text);
    }
}

#[test]
fn late_group_is_an_ordering_warning() {
    let src = "region p block 0 1 0 1 0 1\nvelocity proj set 0 0 -20 sum yes\ngroup proj region p\n";
    let (_, diags) = analyze(&common::ast_of(src));
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].code, Code::S004);
    assert!(!diags[0].is_error());
}

#[test]
fn diagnostics_are_sorted() {
    for seed in 0..50u8 {
        let lines = random_script([seed; 32], 20, false);
        let src: Vec<&str> = lines.iter().map(|l| l.text.as_str()).collect();
        let (_, diags) = analyze(&common::ast_of(&src.join("\n")));
        let keys: Vec<_> = diags.iter().map(|d| (d.location.raw_line, d.code)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let (_, again) = analyze(&common::ast_of(&src.join("\n")));
        assert_eq!(diags, again);
    }
}
