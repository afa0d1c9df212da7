use std::path::PathBuf;

use homerule::detect::{detect_all, kind_counts, ConflictKind};
use homerule::fixtures::{self, FixtureText};
use homerule::maude::{check_declarations, lower_system_to_maude, maude_binary, render_maude, run_searches, SearchResult};

fn emit(f: &FixtureText) -> String {
    render_maude(&lower_system_to_maude(&f.system().unwrap()))
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.maude"))
}

#[test]
fn emission_matches_goldens() {
    for f in [fixtures::HEATER_AC, fixtures::LIGHT, fixtures::CASE_STUDY] {
        let text = emit(&f);
        let path = golden_path(f.name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(golden == text, "{} differs from its golden file", f.name);
    }
}

#[test]
fn emitted_sources_declare_before_use() {
    for f in fixtures::ALL {
        let text = emit(&f);
        assert_eq!(check_declarations(&text), vec![], "{}", f.name);
        assert_eq!(text.lines().filter(|l| l.starts_with("search ")).count(), 4, "{}", f.name);
    }
}

#[test]
fn emission_is_byte_stable() {
    for f in fixtures::ALL {
        assert_eq!(emit(&f), emit(&f));
    }
}

#[test]
fn case_study_declares_every_device() {
    let text = emit(&fixtures::CASE_STUDY);
    let init = text.lines().find(|l| l.trim_start().starts_with("eq initSoup")).unwrap();
    assert_eq!(init.matches("device(").count(), 10);
}

#[test]
fn interpreter_agrees_when_installed() {
    let Some(bin) = maude_binary() else {
        eprintln!("maude not installed; skipping interpreter cross-check");
        return;
    };
    for f in fixtures::ALL {
        let sys = f.system().unwrap();
        let found = kind_counts(&detect_all(&sys));
        let expected: Vec<SearchResult> = ConflictKind::ALL
            .iter()
            .map(|k| if found.contains_key(k) { SearchResult::Solution } else { SearchResult::NoSolution })
            .collect();
        assert_eq!(run_searches(&bin, &emit(&f), 4).unwrap(), expected, "{}", f.name);
    }
}
