//! On-disk cache of kernel columns keyed by graph fingerprint, base vertex
//! and laziness.
//!
//! File layout: one ASCII header line
//! `KCOL v1 <fingerprint> <y> <alpha> <k_max> <V>` followed by `k_max + 1`
//! blocks of `V` little-endian `f64`, block `k` holding `p_k(., y)`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::Result;
use crate::markov::KernelColumn;

const MAGIC: &str = "KCOL";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq)]
struct Header {
    fingerprint: String,
    base: usize,
    alpha: f64,
    k_max: usize,
    vertices: usize,
}

impl Header {
    fn line(&self) -> String {
        format!(
            "{MAGIC} {VERSION} {} {} {:?} {} {}\n",
            self.fingerprint, self.base, self.alpha, self.k_max, self.vertices
        )
    }

    fn parse(line: &str) -> Option<Header> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 7 || parts[0] != MAGIC || parts[1] != VERSION {
            return None;
        }
        Some(Header {
            fingerprint: parts[2].to_string(),
            base: parts[3].parse().ok()?,
            alpha: parts[4].parse().ok()?,
            k_max: parts[5].parse().ok()?,
            vertices: parts[6].parse().ok()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct KernelCache {
    dir: PathBuf,
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KernelCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, fingerprint: &str, base: usize, alpha: f64) -> PathBuf {
        self.dir
            .join(format!("{fingerprint}_{base}_{:016x}.kcol", alpha.to_bits()))
    }

    /// Stores columns `0..=k_max`; `columns[k]` must be `p_k(., y)`.
    pub fn store(&self, fingerprint: &str, alpha: f64, columns: &[KernelColumn]) -> Result<PathBuf> {
        let first = columns.first().expect("at least one column to store");
        let header = Header {
            fingerprint: fingerprint.to_string(),
            base: first.base,
            alpha,
            k_max: columns.len() - 1,
            vertices: first.values.len(),
        };
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(fingerprint, first.base, alpha);
        let tmp = path.with_extension("kcol.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            out.write_all(header.line().as_bytes())?;
            for (k, col) in columns.iter().enumerate() {
                assert_eq!(col.step, k, "columns must be consecutive from step 0");
                for v in &col.values {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            out.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Column `p_k(., y)` if a file with exactly matching key fields holds it.
    /// Unreadable or truncated files are misses and log a warning.
    pub fn lookup(&self, fingerprint: &str, base: usize, alpha: f64, k: usize) -> Option<KernelColumn> {
        let path = self.path_for(fingerprint, base, alpha);
        let file = File::open(&path).ok()?;
        let mut reader = BufReader::new(file);
        let mut line = String::new();
        if reader.read_line(&mut line).is_err() {
            warn!("kernel cache file {} has an unreadable header", path.display());
            return None;
        }
        let Some(header) = Header::parse(&line) else {
            warn!("kernel cache file {} has a malformed header", path.display());
            return None;
        };
        if header.fingerprint != fingerprint || header.base != base || header.alpha.to_bits() != alpha.to_bits() {
            return None;
        }
        if k > header.k_max {
            return None;
        }
        let block = header.vertices * 8;
        let expected = line.len() as u64 + (header.k_max as u64 + 1) * block as u64;
        let actual = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        if actual != expected {
            warn!(
                "kernel cache file {} is truncated or corrupt ({actual} bytes, expected {expected})",
                path.display()
            );
            return None;
        }
        let mut skip = vec![0u8; block];
        for _ in 0..k {
            reader.read_exact(&mut skip).ok()?;
        }
        let mut buf = vec![0u8; block];
        if reader.read_exact(&mut buf).is_err() {
            warn!("kernel cache file {} could not be read", path.display());
            return None;
        }
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Some(KernelColumn { base, step: k, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{kernel_column, make_walk};
    use crate::vicsek::build_vicsek;

    #[test]
    fn store_then_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path());
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let cols = kernel_column(&op, v.center, 12).unwrap();
        let fp = v.graph.fingerprint();
        cache.store(&fp, 0.5, &cols).unwrap();
        for k in [0, 5, 12] {
            let hit = cache.lookup(&fp, v.center, 0.5, k).unwrap();
            assert_eq!(hit, cols[k]);
        }
        assert!(cache.lookup(&fp, v.center, 0.5, 13).is_none());
        assert!(cache.lookup(&fp, v.center, 0.25, 3).is_none());
        assert!(cache.lookup(&fp, v.center + 1, 0.5, 3).is_none());
        assert!(cache.lookup("other", v.center, 0.5, 3).is_none());
    }

    #[test]
    fn truncated_file_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path());
        let v = build_vicsek(2, 1).unwrap();
        let op = make_walk(&v.graph, 0.5).unwrap();
        let cols = kernel_column(&op, 0, 4).unwrap();
        let fp = v.graph.fingerprint();
        let path = cache.store(&fp, 0.5, &cols).unwrap();
        let len = fs::metadata(&path).unwrap().len();
        let f = fs::OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 3).unwrap();
        assert!(cache.lookup(&fp, 0, 0.5, 0).is_none());
    }
}
