//! Static check of the service's dependency rule: the core names ports and
//! domain types only; adapters never reach into the core's service.

use std::fs;
use std::path::{Path, PathBuf};

const CORE_FORBIDDEN: &[&str] = &[
    "adapters",
    "crate::store",
    "crate::pipelines",
    "crate::ingestion",
    "crate::cli",
    "axum",
    "tokio",
    "std::fs",
    "std::net",
    "std::env",
    "super::super",
];

const ADAPTER_FORBIDDEN: &[&str] = &["core::service", "InvestigatorService", "PortSet"];

fn sources(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(sources(&path));
        } else if path.extension().is_some_and(|e| e == "rs") {
            out.push(path);
        }
    }
    out.sort();
    out
}

/// `(file, line, token)` for each code line naming a forbidden token.
/// Comments are ignored.
fn offending(files: &[PathBuf], forbidden: &[&str]) -> Vec<(String, usize, String)> {
    let mut out = Vec::new();
    for file in files {
        let text = fs::read_to_string(file).unwrap();
        for (i, line) in text.lines().enumerate() {
            let code = line.split("//").next().unwrap_or("");
            for token in forbidden {
                if code.contains(token) {
                    out.push((file.display().to_string(), i + 1, token.to_string()));
                }
            }
        }
    }
    out
}

fn api_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("src/api")
}

#[test]
fn core_references_no_adapter_or_technology() {
    let files = sources(&api_dir().join("core"));
    assert!(files.len() >= 2);
    let found = offending(&files, CORE_FORBIDDEN);
    assert!(found.is_empty(), "core -> outside references: {found:?}");
}

#[test]
fn adapters_reference_ports_not_the_service() {
    let files = sources(&api_dir().join("adapters"));
    let found = offending(&files, ADAPTER_FORBIDDEN);
    assert!(found.is_empty(), "adapter -> core service references: {found:?}");
}

#[test]
fn scanner_catches_a_planted_reference() {
    let tmp = tempfile::tempdir().unwrap();
    let planted = tmp.path().join("bad.rs");
    fs::write(&planted, "// adapters are fine in comments\nuse crate::api::adapters::cache::TtlCache;\n").unwrap();
    let found = offending(&[planted], CORE_FORBIDDEN);
    assert_eq!(found.len(), 1);
    assert_eq!((found[0].1, found[0].2.as_str()), (2, "adapters"));
}
