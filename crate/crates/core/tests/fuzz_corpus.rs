//! The checked-in fuzz seeds double as parser regression cases: every seed
//! must be handled without panicking, and the well-formed ones must parse.

use std::path::{Path, PathBuf};

use tweezer_sim::coherence::{FringeRecord, PulseSequence};
use tweezer_sim::config::parse_config;
use tweezer_sim::thermometry::RecaptureCurve;

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds for {target}");
    files
}

fn check(target: &str, valid: &[&str], parses: impl Fn(&[u8]) -> bool) {
    for path in seeds(target) {
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        let ok = parses(&std::fs::read(&path).unwrap());
        assert_eq!(ok, valid.contains(&name.as_str()), "{target}/{name}");
    }
}

#[test]
fn config_seeds() {
    check("parse_config", &["empty.json", "overrides.json"], |b| {
        std::str::from_utf8(b).is_ok_and(|s| parse_config(s).is_ok())
    });
}

#[test]
fn sequence_seeds() {
    check(
        "parse_sequence",
        &["echo_round_trip.json", "ramsey_transfer.json"],
        |b| std::str::from_utf8(b).is_ok_and(|s| PulseSequence::from_json(s).is_ok()),
    );
}

#[test]
fn recapture_seeds() {
    check("read_recapture_csv", &["curve.csv"], |b| {
        RecaptureCurve::read_csv(b).is_ok()
    });
}

#[test]
fn fringe_seeds() {
    check("read_fringe_csv", &["fringe.csv"], |b| {
        FringeRecord::read_csv(b).is_ok()
    });
}
