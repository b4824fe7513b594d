//! Run manifest written next to the CSV tables.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::table::Table;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

/// The resolved config as JSON, without the output directory, which does not
/// affect any result. Object keys come out sorted.
pub fn resolved_config(config: &ExperimentConfig) -> Value {
    let mut c = config.clone();
    c.out = None;
    serde_json::to_value(&c).expect("configs serialize")
}

/// SHA-256 over the canonical JSON of everything that affects the output.
pub fn input_hash(config: &ExperimentConfig) -> String {
    let inputs = json!({
        "config": resolved_config(config),
        "seed": config.seed,
        "version": VERSION,
    });
    hex::encode(Sha256::digest(inputs.to_string().as_bytes()))
}

pub fn output_file(table: &Table, body: &[u8]) -> OutputFile {
    OutputFile {
        file: table.file_name(),
        rows: table.rows.len(),
        sha256: hex::encode(Sha256::digest(body)),
    }
}

pub fn manifest(config: &ExperimentConfig, outputs: &[OutputFile], failed_checks: Option<usize>) -> Value {
    let mut m = json!({
        "tool": "lyapdim",
        "version": VERSION,
        "command": config.command.as_str(),
        "seed": config.seed,
        "config": resolved_config(config),
        "input_sha256": input_hash(config),
        "outputs": outputs,
    });
    if let Some(f) = failed_checks {
        m["failed_checks"] = f.into();
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;

    const TEXT: &str = r#"
        command = "dimension"
        seed = 3
        out = "somewhere"
        [system]
        kind = "cantor-repeller"
        slopes = [3.0, 3.0]
        [measure]
        kind = "bernoulli"
        p = [0.5, 0.5]
    "#;

    #[test]
    fn hash_ignores_the_output_directory_and_tracks_the_seed() {
        let a = config::parse(TEXT).unwrap().resolve(None, false).unwrap();
        let b = config::parse(&TEXT.replace("somewhere", "elsewhere")).unwrap().resolve(None, false).unwrap();
        assert_eq!(input_hash(&a), input_hash(&b));
        let c = config::parse(TEXT).unwrap().resolve(Some(4), false).unwrap();
        assert_ne!(input_hash(&a), input_hash(&c));
    }

    #[test]
    fn keys_are_sorted() {
        let a = config::parse(TEXT).unwrap().resolve(None, false).unwrap();
        let m = manifest(&a, &[], None);
        let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{keys:?}");
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.find("\"command\"").unwrap() < text.find("\"config\"").unwrap());
        assert_eq!(text, serde_json::to_string(&manifest(&a, &[], None)).unwrap());
    }
}
