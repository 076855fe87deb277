//! Output directory with a hashed manifest of everything written to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub files: Vec<Entry>,
}

#[derive(Debug)]
pub struct Bundle {
    dir: PathBuf,
    command: String,
    files: Vec<Entry>,
}

impl Bundle {
    /// Prepares `dir`. An existing manifest means a previous run; without
    /// `force` that is an error, with it the files that run listed are removed.
    pub fn open(dir: &Path, command: &str, force: bool) -> Result<Self, CliError> {
        let manifest = dir.join(MANIFEST);
        if manifest.exists() {
            if !force {
                return Err(CliError::Output(format!(
                    "{} already holds a run (pass --force to overwrite)",
                    dir.display()
                )));
            }
            if let Ok(old) = fs::read_to_string(&manifest)
                .map_err(|_| ())
                .and_then(|t| serde_json::from_str::<Manifest>(&t).map_err(|_| ()))
            {
                for e in old.files {
                    let _ = fs::remove_file(dir.join(&e.path));
                }
            }
            fs::remove_file(&manifest)?;
        }
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("creating {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes).map_err(|e| CliError::Output(format!("writing {name}: {e}")))?;
        self.files.retain(|e| e.path != name);
        self.files.push(Entry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes the manifest and returns the number of files it lists.
    pub fn finish(mut self) -> Result<usize, CliError> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let n = self.files.len();
        let manifest = Manifest {
            tool: format!("nlstokes {}", env!("CARGO_PKG_VERSION")),
            command: self.command,
            files: self.files,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        text.push(b'\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(n)
    }
}
