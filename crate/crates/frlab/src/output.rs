//! CSV artifacts and their digests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A CSV table whose rows all carry the run seed.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: String,
    seed_column: bool,
    rows: Vec<String>,
    seed: u64,
}

impl Table {
    /// Appends a `seed` column unless `header` already has one.
    pub fn new(name: &str, header: &str, seed: u64) -> Self {
        let seed_column = !header.split(',').any(|h| h == "seed");
        Table {
            name: name.to_string(),
            header: header.to_string(),
            seed_column,
            rows: Vec::new(),
            seed,
        }
    }

    pub fn push(&mut self, row: impl Into<String>) {
        let mut row = row.into();
        if self.seed_column {
            row.push_str(&format!(",{}", self.seed));
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut s = self.header.clone();
        if self.seed_column {
            s.push_str(",seed");
        }
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// A file written by a run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

/// Collects the files written into one output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.artifacts.push(Artifact {
            path: PathBuf::from(name),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_table(&mut self, table: &Table) -> Result<PathBuf> {
        let name = format!("{}.csv", table.name);
        self.write_bytes(&name, table.render().as_bytes())
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_column_added_once() {
        let mut t = Table::new("a", "x,y", 7);
        t.push("1,2");
        assert_eq!(t.render(), "x,y,seed\n1,2,7\n");
        let mut t = Table::new("b", "x,seed", 7);
        t.push("1,7");
        assert_eq!(t.render(), "x,seed\n1,7\n");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
