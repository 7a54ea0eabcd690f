mod common;

use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;

use common::*;
use pure_dialog::schema::{build_domain_pack, load_domain_pack, resolve_user_term, PackError, PackSources, BUILTIN_CLASSES};

fn sources(name: &str) -> PackSources {
    PackSources::read_dir(&packs_dir().join(name)).unwrap()
}

#[test]
fn flights_pack_counts() {
    let p = pack("flights");
    assert_eq!(p.schema.fields.len(), 6);
    assert_eq!(p.schema.query_types.len(), 4);
    assert_eq!(p.schema.mandatory_sets.len(), 3);
}

#[test]
fn dangling_consistency_field() {
    let mut src = sources("flights");
    src.consistency = "[rule r]\nrelation = not_equal\nleft = departure_city\nright = dest\nmessage = no\n".into();
    match build_domain_pack(&src) {
        Err(PackError::DanglingReference { file, symbol }) => {
            assert_eq!(file, "consistency.conf");
            assert_eq!(symbol, "dest");
        }
        other => panic!("expected DanglingReference, got {other:?}"),
    }
}

#[test]
fn empty_directory_is_missing_schema() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(load_domain_pack(dir.path()), Err(PackError::MissingFile("schema".into())));
}

#[test]
fn parse_errors_carry_file_and_line() {
    let mut src = sources("flights");
    src.lexicon = "big apple | city | New York\nthis line has no separators\n".into();
    match build_domain_pack(&src) {
        Err(PackError::ParseError { file, line, .. }) => {
            assert_eq!(file, "lexicon.conf");
            assert_eq!(line, 2);
        }
        other => panic!("expected ParseError, got {other:?}"),
    }
}

#[test]
fn loading_is_deterministic() {
    assert_eq!(pack("flights"), pack("flights"));
    assert_eq!(pack("library"), pack("library"));
}

#[test]
fn every_class_has_a_producer() {
    for name in ["flights", "library"] {
        let p = pack(name);
        let classes: BTreeSet<&str> = p.schema.fields.iter().map(|f| f.semantic_class.as_str()).collect();
        for c in classes {
            let produced = BUILTIN_CLASSES.contains(&c)
                || p.lexicon.has_class(c)
                || p.schema.numeric_classes.iter().any(|n| n.name == c);
            assert!(produced, "{name}: class {c} has no producer");
        }
    }
}

#[test]
fn big_apple_is_new_york() {
    let p = pack("flights");
    let want = vec![("New York".to_string(), "city".to_string())];
    assert_eq!(resolve_user_term("Big Apple", Some("city"), &p.lexicon), want);
    assert_eq!(resolve_user_term("big apple", None, &p.lexicon), want);
}

#[test]
fn dickens_has_three_readings() {
    let p = pack("library");
    let got = resolve_user_term("Dickens", None, &p.lexicon);
    assert_eq!(got.len(), 3, "{got:?}");
    let authors = got.iter().filter(|(_, c)| c == "author").count();
    assert_eq!(authors, 2);
    assert_eq!(resolve_user_term("Dickens", Some("title"), &p.lexicon).len(), 1);
}

#[test]
fn widen_steps_must_increase() {
    let mut src = sources("flights");
    src.schema = src.schema.replace("240, 480", "480, 240");
    assert!(src.schema.contains("480, 240"), "fixture changed");
    assert!(matches!(build_domain_pack(&src), Err(PackError::ParseError { .. })));
}

fn surfaces(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("lexicon.conf"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#') && !l.starts_with('['))
        .filter_map(|l| l.split('|').next().map(|s| s.trim().to_string()))
        .filter(|s| !s.is_empty())
        .collect()
}

proptest! {
    #[test]
    fn resolution_ignores_case(idx in 0usize..200, flips in proptest::collection::vec(any::<bool>(), 0..40)) {
        let p = pack("flights");
        let all = surfaces(&packs_dir().join("flights"));
        let surface = &all[idx % all.len()];
        let mixed: String = surface
            .chars()
            .enumerate()
            .map(|(i, c)| if flips.get(i).copied().unwrap_or(false) { c.to_ascii_uppercase() } else { c })
            .collect();
        prop_assert_eq!(
            resolve_user_term(&mixed, None, &p.lexicon),
            resolve_user_term(&mixed.to_lowercase(), None, &p.lexicon)
        );
        prop_assert!(!resolve_user_term(&mixed, None, &p.lexicon).is_empty());
    }
}
