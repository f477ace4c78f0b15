//! `manifest.json`: what was run and a content hash of every output.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Check, Experiment, ExperimentConfig, Outcome};

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    /// SHA-256 of `"blob <len>\0" + contents`, as git hashes blobs.
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: Experiment,
    pub seed: u64,
    pub runs: u64,
    pub config: &'a ExperimentConfig,
    pub outputs: Vec<OutputEntry>,
    pub checks: &'a [Check],
    pub passed: bool,
}

pub fn blob_hash(contents: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", contents.len()).as_bytes());
    h.update(contents);
    hex::encode(h.finalize())
}

impl<'a> Manifest<'a> {
    pub fn new(experiment: Experiment, config: &'a ExperimentConfig, runs: u64, seed: u64, outcome: &'a Outcome) -> Self {
        let outputs = outcome
            .files
            .iter()
            .map(|f| OutputEntry { file: f.name.clone(), bytes: f.contents.len(), sha256: blob_hash(f.contents.as_bytes()) })
            .collect();
        Self { experiment, seed, runs, config, outputs, checks: &outcome.checks, passed: outcome.passed() }
    }
}
