mod common;

use lammps_lint_core::normalizer::{normalize, NormalizeConfig, RawScript};
use proptest::prelude::*;

fn normalized(src: &str) -> Vec<String> {
    normalize(&RawScript::new(src, "fixture"), &NormalizeConfig::default())
        .unwrap_or_else(|e| panic!("{e}"))
        .lines
        .into_iter()
        .map(|l| l.text)
        .collect()
}

#[test]
fn loop_fixtures_match_interpreter() {
    let mut paths: Vec<_> =
        std::fs::read_dir(common::fixture_dir("normalizer")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    assert!(paths.len() >= 50);
    for path in paths {
        let src = std::fs::read_to_string(&path).unwrap();
        assert_eq!(normalized(&src), common::oracle::run(&src), "{}", path.display());
    }
}

#[test]
fn exemplars_match_interpreter() {
    for p in ["prompt1", "prompt2", "prompt3"] {
        let src = common::exemplar_source(p);
        assert_eq!(normalized(&src), common::oracle::run(&src), "{p}");
    }
}

#[test]
fn provenance_is_total() {
    let mut paths: Vec<_> =
        std::fs::read_dir(common::fixture_dir("normalizer")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in paths {
        let src = std::fs::read_to_string(&path).unwrap();
        let raw = RawScript::new(src, "f");
        let canon = normalize(&raw, &NormalizeConfig::default()).unwrap();
        assert!(canon.invariant_violations(Some(raw.line_count())).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalization_is_a_fixpoint(seed in any::<[u8; 32]>(), n in 1usize..20, stride in 1usize..4) {
        let v = common::vary::with_variables(&common::vary::registry_script(seed, n), "v", stride);
        let src = v.lines.join("\n");
        let once = common::vary::canonical_text(&src).expect("generated script normalizes");
        let twice = common::vary::canonical_text(&once).expect("canonical text normalizes");
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(common::vary::canonical_text(&src), Some(once));
    }

    #[test]
    fn layout_and_names_do_not_matter(
        seed in any::<[u8; 32]>(),
        n in 1usize..20,
        stride in 1usize..4,
        noise in proptest::collection::vec(any::<u8>(), 20),
    ) {
        let base = common::vary::registry_script(seed, n);
        let plain = common::vary::with_variables(&base, "v", stride).lines.join("\n");
        let renamed = common::vary::decorate(&common::vary::with_variables(&base, "other_name_", stride).lines, &noise);
        prop_assert_eq!(common::vary::canonical_text(&plain), common::vary::canonical_text(&renamed));
        let literal = base.join("\n");
        prop_assert_eq!(common::vary::canonical_text(&plain), common::vary::canonical_text(&literal));
    }
}
