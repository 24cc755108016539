use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::hashing::sha256_hex;

/// On-disk filing cache: one file per accession under `<dir>/<cik>/` plus a
/// `.sha256` sidecar so corruption is detected rather than propagated.
pub struct FilingCache {
    dir: PathBuf,
    // Serializes writes; readers only touch fully written pairs.
    write_lock: Mutex<()>,
}

impl FilingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn raw_path(&self, cik: &str, accession: &str) -> PathBuf {
        self.dir.join(cik).join(format!("{accession}.raw"))
    }

    fn sum_path(&self, cik: &str, accession: &str) -> PathBuf {
        self.dir.join(cik).join(format!("{accession}.sha256"))
    }

    /// Returns cached bytes, `Ok(None)` when absent, or `CacheCorrupt` when
    /// the sidecar checksum does not match the stored bytes.
    pub fn get(&self, cik: &str, accession: &str) -> Result<Option<Vec<u8>>> {
        let raw = self.raw_path(cik, accession);
        if !raw.exists() {
            return Ok(None);
        }
        let bytes = std::fs::read(&raw)?;
        let sum = std::fs::read_to_string(self.sum_path(cik, accession)).unwrap_or_default();
        if sum.trim() != sha256_hex(&bytes) {
            return Err(Error::CacheCorrupt(raw.display().to_string()));
        }
        Ok(Some(bytes))
    }

    pub fn put(&self, cik: &str, accession: &str, bytes: &[u8]) -> Result<()> {
        let _guard = self.write_lock.lock().unwrap();
        let raw = self.raw_path(cik, accession);
        std::fs::create_dir_all(raw.parent().unwrap())?;
        std::fs::write(&raw, bytes)?;
        std::fs::write(self.sum_path(cik, accession), sha256_hex(bytes))?;
        Ok(())
    }

    /// Drops a corrupt entry so the caller can refetch.
    pub fn evict(&self, cik: &str, accession: &str) -> Result<()> {
        let _guard = self.write_lock.lock().unwrap();
        for p in [
            self.raw_path(cik, accession),
            self.sum_path(cik, accession),
        ] {
            if p.exists() {
                std::fs::remove_file(p)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = FilingCache::new(tmp.path());
        let body = b"raw filing \xf0\x9f\x93\x84 bytes".to_vec();
        cache.put("0000000001", "0000000001-20-000001", &body).unwrap();
        let back = cache.get("0000000001", "0000000001-20-000001").unwrap();
        assert_eq!(back.as_deref(), Some(body.as_slice()));
    }

    #[test]
    fn miss_is_none_and_corruption_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let cache = FilingCache::new(tmp.path());
        assert!(cache.get("0000000001", "0000000001-20-000001").unwrap().is_none());

        cache.put("0000000001", "0000000001-20-000001", b"original").unwrap();
        std::fs::write(
            tmp.path().join("0000000001/0000000001-20-000001.raw"),
            b"tampered",
        )
        .unwrap();
        match cache.get("0000000001", "0000000001-20-000001") {
            Err(Error::CacheCorrupt(_)) => {}
            other => panic!("expected CacheCorrupt, got {other:?}"),
        }
    }
}
