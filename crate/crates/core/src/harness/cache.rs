//! On-disk result cache keyed by a content hash of the parameter record and
//! the library version.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

use super::CODE_VERSION;

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<K: Serialize>(namespace: &str, record: &K) -> Result<String> {
        let mut h = Sha256::new();
        h.update(namespace.as_bytes());
        h.update(b"\n");
        h.update(CODE_VERSION.as_bytes());
        h.update(b"\n");
        h.update(serde_json::to_vec(record)?);
        Ok(hex::encode(h.finalize()))
    }

    fn path(&self, namespace: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{namespace}-{}.json", &key[..24]))
    }

    pub fn get<K: Serialize, T: DeserializeOwned>(&self, namespace: &str, record: &K) -> Result<Option<T>> {
        let path = self.path(namespace, &Self::key(namespace, record)?);
        match fs::read(&path) {
            Ok(bytes) => match serde_json::from_slice(&bytes) {
                Ok(v) => Ok(Some(v)),
                Err(e) => {
                    log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                    Ok(None)
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put<K: Serialize, T: Serialize>(&self, namespace: &str, record: &K, value: &T) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path(namespace, &Self::key(namespace, record)?);
        // Write then rename so a crash never leaves a truncated entry.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    /// Returns the cached value for `record`, computing and storing it on a
    /// miss. The flag is true on a hit.
    pub fn get_or_compute<K, T, F>(&self, namespace: &str, record: &K, f: F) -> Result<(T, bool)>
    where
        K: Serialize,
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.get(namespace, record)? {
            return Ok((v, true));
        }
        let v = f()?;
        self.put(namespace, record, &v)?;
        Ok((v, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_after_miss_and_key_sensitivity() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        let mut calls = 0;
        let (v, hit) = c
            .get_or_compute("t", &(1, "a"), || {
                calls += 1;
                Ok(vec![1.5, 2.5])
            })
            .unwrap();
        assert!(!hit);
        let (w, hit): (Vec<f64>, bool) = c.get_or_compute("t", &(1, "a"), || unreachable!()).unwrap();
        assert!(hit);
        assert_eq!(v, w);
        assert_eq!(calls, 1);
        assert_ne!(Cache::key("t", &(1, "a")).unwrap(), Cache::key("t", &(2, "a")).unwrap());
        assert_ne!(Cache::key("t", &(1, "a")).unwrap(), Cache::key("u", &(1, "a")).unwrap());
    }
}
