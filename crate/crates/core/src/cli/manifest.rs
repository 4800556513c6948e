use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.tsv";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the canonical form of the command's inputs.
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: String, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config_digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command\t{}", self.command);
        let _ = writeln!(out, "config_digest\t{}", self.config_digest);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed\t{seed}");
        }
        let _ = writeln!(out, "tool_version\t{}", self.tool_version);
        for o in &self.outputs {
            let _ = writeln!(out, "output\t{o}");
        }
        out
    }
}

pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Writes every file, then the manifest. Each file goes to a temporary name
/// first and is renamed into place, so a failed run leaves no partial files.
pub fn write_outputs(dir: &Path, files: &[(&str, String)], mut manifest: RunManifest) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    manifest.outputs = files.iter().map(|(name, _)| name.to_string()).collect();
    let manifest_text = manifest.render();
    let all = files
        .iter()
        .map(|(n, c)| (*n, c.as_str()))
        .chain(std::iter::once((MANIFEST_FILE, manifest_text.as_str())));

    let mut staged = Vec::new();
    for (name, content) in all {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, content) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in staged {
        fs::rename(tmp, target)?;
    }
    Ok(())
}
