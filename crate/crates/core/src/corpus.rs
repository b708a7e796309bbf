//! Built-in protocol descriptions.

use std::path::PathBuf;

use thiserror::Error;

use crate::dsl::{parse, ParseError, ProtocolSpec};

pub const NAMES: [&str; 7] = ["p1", "p2", "p3", "p4", "wmf-broken", "yahalom", "unlimited"];

const SOURCES: [(&str, &str); 7] = [
    ("p1", include_str!("../corpus/p1.cp")),
    ("p2", include_str!("../corpus/p2.cp")),
    ("p3", include_str!("../corpus/p3.cp")),
    ("p4", include_str!("../corpus/p4.cp")),
    ("wmf-broken", include_str!("../corpus/wmf-broken.cp")),
    ("yahalom", include_str!("../corpus/yahalom.cp")),
    ("unlimited", include_str!("../corpus/unlimited.cp")),
];

/// Environment variable naming a directory searched before the built-ins.
pub const DIR_VAR: &str = "CPVERIF_CORPUS_DIR";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus entry `{0}`")]
    UnknownCorpus(String),
    #[error("{0}: {1}")]
    Parse(String, ParseError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
}

/// Built-in source text.
pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Source text, from `$CPVERIF_CORPUS_DIR/<name>.cp` when present.
pub fn source_text(name: &str) -> Result<String, CorpusError> {
    if let Some(dir) = std::env::var_os(DIR_VAR) {
        let path = PathBuf::from(dir).join(format!("{name}.cp"));
        if path.exists() {
            return std::fs::read_to_string(&path).map_err(|e| CorpusError::Io(path.display().to_string(), e));
        }
    }
    source(name)
        .map(str::to_string)
        .ok_or_else(|| CorpusError::UnknownCorpus(name.to_string()))
}

pub fn load(name: &str) -> Result<ProtocolSpec, CorpusError> {
    let text = source_text(name)?;
    parse(&text).map_err(|e| CorpusError::Parse(name.to_string(), e))
}

/// Names available, external directory entries included.
pub fn list() -> Vec<String> {
    let mut names: Vec<String> = NAMES.iter().map(|s| s.to_string()).collect();
    if let Some(dir) = std::env::var_os(DIR_VAR) {
        if let Ok(rd) = std::fs::read_dir(dir) {
            for e in rd.flatten() {
                let p = e.path();
                if p.extension().is_some_and(|x| x == "cp") {
                    if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                        if !names.iter().any(|n| n == stem) {
                            names.push(stem.to_string());
                        }
                    }
                }
            }
        }
    }
    names
}
