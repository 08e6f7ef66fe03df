use coarse_cli::{run, Overrides, BUNDLED};
use std::path::PathBuf;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"))
}

/// Set `UPDATE_GOLDEN=1` to rewrite the stored reports.
#[test]
fn bundled_reports_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (name, _) in BUNDLED {
        let json = run(name, &Overrides::default()).unwrap().to_json();
        let path = golden_path(name);
        if update {
            std::fs::write(&path, &json).unwrap();
            continue;
        }
        let want =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            json,
            want,
            "report for {name} drifted from {}",
            path.display()
        );
    }
}

#[test]
fn bundled_scenarios_match_every_assertion() {
    for (name, _) in BUNDLED {
        let r = run(name, &Overrides::default()).unwrap();
        assert!(r.all_matched(), "{name}:\n{}", r.to_text());
        assert!(r.summary.outcomes > 0, "{name} has no assertions");
    }
}

#[test]
fn reports_are_reproducible() {
    for (name, _) in BUNDLED {
        let a = run(name, &Overrides::default()).unwrap().to_json();
        let b = run(name, &Overrides::default()).unwrap().to_json();
        assert_eq!(a, b, "{name}");
    }
}
