//! Output files and their provenance stamp.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "dtapprox";

/// Identifies the tool version, effective configuration and seed behind an
/// output. The config hash covers the resolved settings and the bytes of
/// every input file, not the output location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: String,
    pub seed: u64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl Provenance {
    pub fn new(command: &str, cfg: &RunConfig, inputs: &[(&str, &[u8])]) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(serde_json::to_vec(cfg).expect("config serializes"));
        for (name, bytes) in inputs {
            h.update(b"\n");
            h.update(name.as_bytes());
            h.update(b"=");
            h.update(Sha256::digest(bytes));
        }
        Provenance {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: hex(&h.finalize()[..8]),
            seed: cfg.seed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} config={} seed={}",
            self.tool, self.version, self.config, self.seed
        )
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// CSV with a `#` provenance line in front.
pub fn write_csv(path: &Path, prov: &Provenance, csv: &str) -> Result<()> {
    write_text(path, &format!("# {}\n{csv}", prov.line()))
}

pub fn write_verilog(path: &Path, prov: &Provenance, verilog: &str) -> Result<()> {
    write_text(path, &format!("// {}\n{verilog}", prov.line()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {}", path.display()))
}
