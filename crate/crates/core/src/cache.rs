//! Append-only JSON-lines cache of critical exponents.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exponents::{critical_exponents_with, CriticalExponents, ProfileResolution, ScanPlan};
use crate::model::{ConeSpec, OperatorSpec, QuadratureConfig};

/// Environment variable overriding the configured cache path.
pub const CACHE_ENV: &str = "CONE_EXP_CACHE";

/// Everything a cached result depends on; records match only on equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub operator: OperatorSpec,
    pub cone: ConeSpec,
    pub scan: ScanPlan,
    pub quadrature: QuadratureConfig,
    pub resolution: ProfileResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub exponents: CriticalExponents,
}

#[derive(Debug, Clone, Default)]
pub struct ExponentCache {
    path: Option<PathBuf>,
    records: Vec<CacheRecord>,
}

impl ExponentCache {
    /// In-memory cache that never touches disk.
    pub fn memory() -> Self {
        Self::default()
    }

    /// Load `path`; a missing file is an empty cache. Unparsable lines are
    /// skipped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let records = match fs::read_to_string(&path) {
            Ok(text) => text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => vec![],
            Err(e) => return Err(e.into()),
        };
        Ok(Self { path: Some(path), records })
    }

    /// Path from [`CACHE_ENV`] if set, else `fallback`.
    pub fn resolve_path(fallback: Option<&Path>) -> Option<PathBuf> {
        std::env::var_os(CACHE_ENV).map(PathBuf::from).or_else(|| fallback.map(Path::to_path_buf))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn records(&self) -> &[CacheRecord] {
        &self.records
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<&CriticalExponents> {
        self.records.iter().rev().find(|r| &r.key == key).map(|r| &r.exponents)
    }

    pub fn insert(&mut self, record: CacheRecord) -> Result<()> {
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&record)?)?;
        }
        self.records.push(record);
        Ok(())
    }

    /// Cached exponents for `key`, computing and storing them on a miss.
    /// The flag is true on a hit.
    pub fn get_or_compute(&mut self, key: &CacheKey) -> Result<(CriticalExponents, bool)> {
        if let Some(hit) = self.lookup(key) {
            return Ok((hit.clone(), true));
        }
        let ex = critical_exponents_with(&key.cone, &key.operator, &key.quadrature, &key.resolution, &key.scan)?;
        self.insert(CacheRecord { key: key.clone(), exponents: ex.clone() })?;
        Ok((ex, false))
    }
}
