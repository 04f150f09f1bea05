//! Run manifest written next to every result set.

use serde::Serialize;
use sha2::{Digest, Sha256};

use afflab_core::pressure::CertificateMode;

use crate::config::LoadedConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Budgets {
    pub words: u64,
    pub words_source: &'static str,
    pub depth: usize,
    pub max_gamma_len: usize,
    pub check_depth: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run; the thread count is left out
/// because results do not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub budgets: Budgets,
    pub certificate_mode: String,
    pub outputs: Vec<OutputFile>,
    /// `ok`, or the error that set a non-zero exit code.
    pub status: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(command: &str, loaded: &LoadedConfig, seed: u64, certificate_mode: String) -> Self {
        let b = &loaded.config.budget;
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(&loaded.raw),
            seed,
            budgets: Budgets {
                words: b.words,
                words_source: loaded.budget_source.label(),
                depth: b.depth,
                max_gamma_len: b.max_gamma_len,
                check_depth: b.check_depth,
                tolerance: b.tolerance,
            },
            certificate_mode,
            outputs: Vec::new(),
            status: "ok".into(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn mode_label(mode: &CertificateMode) -> String {
    match mode {
        CertificateMode::Exact => "exact".into(),
        CertificateMode::Enumerated(depth) => format!("enumerated(depth={depth})"),
    }
}

/// One label for a run that used several certificates.
pub fn combine_modes<I: IntoIterator<Item = String>>(labels: I) -> String {
    let mut all: Vec<String> = labels.into_iter().collect();
    all.sort();
    all.dedup();
    match all.len() {
        0 => "none".into(),
        1 => all.pop().unwrap(),
        _ => format!("mixed[{}]", all.join(",")),
    }
}
