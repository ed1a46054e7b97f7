//! On-disk cache of null tables keyed by fingerprint.

use std::env;
use std::path::{Path, PathBuf};

use plumetrace::limits::{NullTable, StatKind};

use crate::error::{CliError, Result};
use crate::io::{ensure_dir, read_json, write_json};

pub const CACHE_ENV: &str = "PLUMETRACE_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".plumetrace-cache";

pub fn cache_dir() -> PathBuf {
    env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

pub fn cache_path(dir: &Path, kind: StatKind, fingerprint: &str) -> PathBuf {
    dir.join(format!("{}-{fingerprint}.json", kind.as_str()))
}

/// What a run expects of a cached table.
#[derive(Debug, Clone)]
pub struct TableKey<'a> {
    pub kind: StatKind,
    pub fingerprint: &'a str,
    pub seed: u64,
    pub reps: usize,
}

fn mismatch(key: &TableKey, table: &NullTable) -> Option<String> {
    if table.stat_kind != key.kind {
        return Some(format!("stat kind {}", table.stat_kind.as_str()));
    }
    if table.fingerprint != key.fingerprint {
        return Some(format!("fingerprint {}", table.fingerprint));
    }
    if table.seed != key.seed {
        return Some(format!("seed {} (requested {})", table.seed, key.seed));
    }
    if table.reps != key.reps {
        return Some(format!("reps {} (requested {})", table.reps, key.reps));
    }
    if table.values.len() != table.reps {
        return Some(format!(
            "{} values for {} reps",
            table.values.len(),
            table.reps
        ));
    }
    None
}

/// Outcome of a cache lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Created,
    Replaced,
}

/// Returns the cached table when it matches `key`. A missing table is
/// generated and written. A table that disagrees with `key` is an error
/// unless `regen` is set, in which case it is regenerated and replaced.
pub fn load_or_generate(
    dir: &Path,
    key: &TableKey,
    regen: bool,
    generate: impl FnOnce() -> plumetrace::Result<NullTable>,
) -> Result<(NullTable, CacheStatus)> {
    let path = cache_path(dir, key.kind, key.fingerprint);
    let status = if path.exists() {
        let cached: Result<NullTable> = read_json(&path);
        match cached {
            Ok(table) => match mismatch(key, &table) {
                None => return Ok((table, CacheStatus::Hit)),
                Some(reason) if !regen => {
                    return Err(CliError::CacheMismatch { path, reason });
                }
                Some(_) => CacheStatus::Replaced,
            },
            Err(e) if !regen => return Err(e),
            Err(_) => CacheStatus::Replaced,
        }
    } else {
        CacheStatus::Created
    };
    let table = store(dir, key, generate)?;
    Ok((table, status))
}

/// Generates a table and writes it unconditionally.
pub fn store(
    dir: &Path,
    key: &TableKey,
    generate: impl FnOnce() -> plumetrace::Result<NullTable>,
) -> Result<NullTable> {
    let table = generate()?;
    if table.fingerprint != key.fingerprint {
        return Err(CliError::CacheMismatch {
            path: cache_path(dir, key.kind, key.fingerprint),
            reason: format!("generated table has fingerprint {}", table.fingerprint),
        });
    }
    ensure_dir(dir)?;
    write_json(&cache_path(dir, key.kind, key.fingerprint), &table)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(seed: u64, reps: usize) -> NullTable {
        NullTable {
            stat_kind: StatKind::Multivariate,
            seed,
            reps,
            bridge_grid: 10,
            fingerprint: "abc".into(),
            values: (0..reps).map(|k| k as f64).collect(),
            caveat: false,
        }
    }

    fn key(seed: u64, reps: usize) -> TableKey<'static> {
        TableKey {
            kind: StatKind::Multivariate,
            fingerprint: "abc",
            seed,
            reps,
        }
    }

    #[test]
    fn miss_hit_mismatch_regen() {
        let dir = tempfile::tempdir().unwrap();
        let (_, s) =
            load_or_generate(dir.path(), &key(1, 100), false, || Ok(table(1, 100))).unwrap();
        assert_eq!(s, CacheStatus::Created);
        assert!(dir.path().join("multivariate-abc.json").exists());

        let (t, s) = load_or_generate(dir.path(), &key(1, 100), false, || unreachable!()).unwrap();
        assert_eq!((s, t), (CacheStatus::Hit, table(1, 100)));

        let err = load_or_generate(dir.path(), &key(2, 100), false, || unreachable!()).unwrap_err();
        assert!(matches!(err, CliError::CacheMismatch { .. }));
        assert_eq!(err.exit_code(), 3);

        let (t, s) =
            load_or_generate(dir.path(), &key(2, 200), true, || Ok(table(2, 200))).unwrap();
        assert_eq!((s, t.reps), (CacheStatus::Replaced, 200));
    }

    #[test]
    fn corrupt_file_needs_regen() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(cache_path(dir.path(), StatKind::Multivariate, "abc"), "{").unwrap();
        let err = load_or_generate(dir.path(), &key(1, 100), false, || unreachable!()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let (_, s) =
            load_or_generate(dir.path(), &key(1, 100), true, || Ok(table(1, 100))).unwrap();
        assert_eq!(s, CacheStatus::Replaced);
    }
}
