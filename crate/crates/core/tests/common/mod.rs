#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aisgraph::ingest::AisRecord;
use aisgraph::sample::{generate_sample, SampleSpec};

pub fn sample_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_ais.csv")
}

pub fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/scenarios")
}

pub fn small_records() -> Vec<AisRecord> {
    generate_sample(&SampleSpec {
        convoys: 4,
        loners: 6,
        ..Default::default()
    })
}

/// Relative path -> bytes for every file under `dir`.
pub fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        let p = e.path();
        if p.is_file() {
            out.insert(e.file_name().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}
