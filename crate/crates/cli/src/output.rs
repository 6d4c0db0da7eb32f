//! Artifact writing: metadata, content hash and atomic file replacement.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "pdpp";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 over the git blob encoding `blob <len>\0<bytes>`.
pub fn git_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
}

impl Meta {
    pub fn new(command: &str, config: &RunConfig) -> Meta {
        let echo = serde_json::to_vec(config).expect("config echo serialises");
        Meta {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            seed: config.seed,
            config_hash: git_hash(&echo),
            config: config.clone(),
        }
    }

    /// `# key=value` header lines for tabular files.
    pub fn comment_header(&self) -> String {
        let echo = serde_json::to_string(&self.config).expect("config echo serialises");
        format!(
            "# tool={} version={} command={} seed={} config_hash={}\n# config={echo}\n",
            self.tool, self.version, self.command, self.seed, self.config_hash
        )
    }
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> std::io::Result<OutputDir> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(OutputDir { dir })
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place, so readers never see a partial file.
    pub fn write_atomic(&self, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.{}.tmp", std::process::id()));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(bytes)?;
            file.sync_all()?;
        }
        if let Err(e) = fs::rename(&tmp, &target) {
            let _ = fs::remove_file(&tmp);
            return Err(e);
        }
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, meta: &Meta, body: &T) -> Result<PathBuf, crate::error::CliError> {
        let mut text = serde_json::to_string_pretty(&WithMeta { meta, body })?;
        text.push('\n');
        Ok(self.write_atomic(name, text.as_bytes())?)
    }

    /// Comment header, column line, then rows.
    pub fn write_table(&self, name: &str, meta: &Meta, columns: &str, rows: &str) -> Result<PathBuf, crate::error::CliError> {
        let text = format!("{}{columns}\n{rows}", meta.comment_header());
        Ok(self.write_atomic(name, text.as_bytes())?)
    }
}
