//! Report directories: files are written into a sibling temp directory and
//! moved into place with a manifest once everything succeeded.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use trainspace::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Serialize)]
struct FileEntry {
    path: String,
    command: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a C,
    config_hash: String,
    files: Vec<FileEntry>,
}

pub struct Report {
    tmp: PathBuf,
    dest: PathBuf,
    command: String,
    files: Vec<FileEntry>,
}

/// SHA-256 of the canonical JSON of `config`.
pub fn config_hash<C: Serialize>(command: &str, config: &C) -> String {
    let json = serde_json::to_string(&(command, config)).expect("settings serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl Report {
    pub fn create(dest: &Path, command: &str) -> Result<Self> {
        if dest.exists() {
            let non_empty = fs::read_dir(dest)?.next().is_some();
            if non_empty && !dest.join(MANIFEST).exists() {
                return Err(Error::InvalidInput(format!(
                    "refusing to replace non-empty directory {} that holds no report",
                    dest.display()
                )));
            }
        }
        let parent = dest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let name = dest
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "report".into());
        let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        Ok(Report {
            tmp,
            dest: dest.to_path_buf(),
            command: command.to_owned(),
            files: Vec::new(),
        })
    }

    /// Writes one file through `body` and records it in the manifest.
    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.tmp.join(name);
        {
            let mut w = BufWriter::new(File::create(&path)?);
            body(&mut w)?;
            w.flush()?;
        }
        let digest = Sha256::digest(fs::read(&path)?);
        self.files.push(FileEntry {
            path: name.to_owned(),
            command: self.command.clone(),
            sha256: hex::encode(digest),
        });
        Ok(())
    }

    pub fn finish<C: Serialize>(mut self, seed: u64, config: &C) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: "trainspace",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            seed,
            config,
            config_hash: config_hash(&self.command, config),
            files: std::mem::take(&mut self.files),
        };
        let mut w = BufWriter::new(File::create(self.tmp.join(MANIFEST))?);
        serde_json::to_writer_pretty(&mut w, &manifest)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        drop(w);
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest)?;
        }
        fs::rename(&self.tmp, &self.dest)?;
        Ok(self.dest.clone())
    }
}

impl Drop for Report {
    fn drop(&mut self) {
        if self.tmp.exists() {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}
