//! Content-addressed download cache for benchmark files.
//!
//! Layout under the cache directory:
//!
//! ```text
//! blobs/<sha256>      file contents, named by their SHA-256
//! urls/<sha256(url)>  one line: the content hash last fetched for that URL
//! ```
//!
//! Writes go to a temporary file that is renamed into place, so readers never
//! observe a partial blob.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::DatasetFormat;

pub const CACHE_DIR_ENV: &str = "KGQA_CACHE_DIR";

const BUILTIN_CATALOG: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network error fetching {url}: {message}")]
    Network { url: String, message: String },
    #[error("checksum mismatch for {url}: expected {expected}, got {actual}")]
    ChecksumMismatch {
        url: String,
        expected: String,
        actual: String,
    },
    #[error("catalog error: {0}")]
    Catalog(String),
    #[error("cache I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadSource {
    pub split: String,
    pub url: String,
    /// Expected SHA-256 of the content, lowercase hex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub format: DatasetFormat,
    pub download_urls: Vec<DownloadSource>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedFile {
    pub split: String,
    pub url: String,
    pub path: PathBuf,
}

/// Something that can retrieve the bytes behind a URL.
pub trait Transport {
    fn get(&self, url: &str) -> Result<Vec<u8>, FetchError>;
}

/// `http(s)://` via a blocking HTTP client; `file://` and bare paths from disk.
#[derive(Debug, Default)]
pub struct FileOrHttp;

impl Transport for FileOrHttp {
    fn get(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        let network = |message: String| FetchError::Network {
            url: url.to_string(),
            message,
        };
        if url.starts_with("http://") || url.starts_with("https://") {
            let resp = reqwest::blocking::get(url).map_err(|e| network(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(network(format!("HTTP status {}", resp.status())));
            }
            let body = resp.bytes().map_err(|e| network(e.to_string()))?;
            Ok(body.to_vec())
        } else {
            let path = url.strip_prefix("file://").unwrap_or(url);
            fs::read(path).map_err(|e| network(e.to_string()))
        }
    }
}

pub fn builtin_catalog() -> Vec<CatalogEntry> {
    load_catalog(BUILTIN_CATALOG.as_bytes()).expect("embedded catalog is valid")
}

/// Parse a catalog: a JSON array of entries, or `{"datasets": [...]}`.
pub fn load_catalog(bytes: &[u8]) -> Result<Vec<CatalogEntry>, FetchError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        List(Vec<CatalogEntry>),
        Wrapped { datasets: Vec<CatalogEntry> },
    }
    let entries = match serde_json::from_slice(bytes).map_err(|e| FetchError::Catalog(e.to_string()))? {
        Doc::List(v) => v,
        Doc::Wrapped { datasets } => datasets,
    };
    for e in &entries {
        if e.download_urls.is_empty() {
            return Err(FetchError::Catalog(format!("entry '{}' has no URLs", e.name)));
        }
    }
    Ok(entries)
}

/// `$KGQA_CACHE_DIR`, else `$XDG_CACHE_HOME/kgqa`, else `~/.cache/kgqa`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("kgqa");
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".cache").join("kgqa"),
        None => PathBuf::from(".kgqa-cache"),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FetchError + '_ {
    move |source| FetchError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FetchError> {
    let dir = path.parent().expect("cache paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("blob"),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Download (or reuse) every file of `entry`.
pub fn fetch(
    entry: &CatalogEntry,
    cache_dir: &Path,
    transport: &dyn Transport,
) -> Result<Vec<FetchedFile>, FetchError> {
    entry
        .download_urls
        .iter()
        .map(|src| {
            Ok(FetchedFile {
                split: src.split.clone(),
                url: src.url.clone(),
                path: fetch_one(src, cache_dir, transport)?,
            })
        })
        .collect()
}

fn fetch_one(src: &DownloadSource, cache_dir: &Path, transport: &dyn Transport) -> Result<PathBuf, FetchError> {
    let pointer = cache_dir.join("urls").join(sha256_hex(src.url.as_bytes()));
    let expected = src.sha256.as_ref().map(|s| s.to_ascii_lowercase());

    if let Ok(hash) = fs::read_to_string(&pointer) {
        let blob = cache_dir.join("blobs").join(hash.trim());
        if let Ok(bytes) = fs::read(&blob) {
            let actual = sha256_hex(&bytes);
            if let Some(exp) = &expected {
                if *exp != actual {
                    return Err(FetchError::ChecksumMismatch {
                        url: src.url.clone(),
                        expected: exp.clone(),
                        actual,
                    });
                }
            }
            if actual == hash.trim() {
                tracing::debug!(url = %src.url, "cache hit");
                return Ok(blob);
            }
            tracing::warn!(url = %src.url, "cached blob is corrupt; downloading again");
        }
    }

    tracing::info!(url = %src.url, "downloading");
    let bytes = transport.get(&src.url)?;
    let actual = sha256_hex(&bytes);
    if let Some(exp) = expected {
        if exp != actual {
            return Err(FetchError::ChecksumMismatch {
                url: src.url.clone(),
                expected: exp,
                actual,
            });
        }
    }
    let blob = cache_dir.join("blobs").join(&actual);
    write_atomic(&blob, &bytes)?;
    write_atomic(&pointer, actual.as_bytes())?;
    Ok(blob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    struct Counting {
        calls: Cell<usize>,
    }

    impl Transport for Counting {
        fn get(&self, url: &str) -> Result<Vec<u8>, FetchError> {
            self.calls.set(self.calls.get() + 1);
            Ok(format!("content of {url}").into_bytes())
        }
    }

    fn entry(urls: &[&str], sha: Option<String>) -> CatalogEntry {
        CatalogEntry {
            name: "demo".into(),
            format: DatasetFormat::Generic,
            download_urls: urls
                .iter()
                .enumerate()
                .map(|(i, u)| DownloadSource {
                    split: format!("s{i}"),
                    url: u.to_string(),
                    sha256: sha.clone(),
                })
                .collect(),
        }
    }

    #[test]
    fn second_fetch_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let t = Counting { calls: Cell::new(0) };
        let e = entry(&["https://example.org/a.json", "https://example.org/b.json"], None);
        let first = fetch(&e, dir.path(), &t).unwrap();
        assert_eq!(first.len(), 2);
        assert_eq!(t.calls.get(), 2);
        let second = fetch(&e, dir.path(), &t).unwrap();
        assert_eq!(t.calls.get(), 2);
        assert_eq!(first, second);
        assert_eq!(fs::read(&second[0].path).unwrap(), b"content of https://example.org/a.json");
    }

    #[test]
    fn tampered_blob_with_checksum_fails() {
        let dir = tempfile::tempdir().unwrap();
        let t = Counting { calls: Cell::new(0) };
        let url = "https://example.org/a.json";
        let sha = sha256_hex(format!("content of {url}").as_bytes());
        let e = entry(&[url], Some(sha));
        let files = fetch(&e, dir.path(), &t).unwrap();
        fs::write(&files[0].path, b"tampered").unwrap();
        assert!(matches!(
            fetch(&e, dir.path(), &t),
            Err(FetchError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn wrong_checksum_on_download() {
        let dir = tempfile::tempdir().unwrap();
        let t = Counting { calls: Cell::new(0) };
        let e = entry(&["https://example.org/a.json"], Some("00".repeat(32)));
        assert!(matches!(
            fetch(&e, dir.path(), &t),
            Err(FetchError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn tampered_blob_without_checksum_is_refetched() {
        let dir = tempfile::tempdir().unwrap();
        let t = Counting { calls: Cell::new(0) };
        let e = entry(&["https://example.org/a.json"], None);
        let files = fetch(&e, dir.path(), &t).unwrap();
        fs::write(&files[0].path, b"tampered").unwrap();
        fetch(&e, dir.path(), &t).unwrap();
        assert_eq!(t.calls.get(), 2);
    }

    #[test]
    fn local_files_are_fetchable() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.json");
        fs::write(&src, b"[]").unwrap();
        let url = format!("file://{}", src.display());
        let e = entry(&[&url], None);
        let files = fetch(&e, &dir.path().join("cache"), &FileOrHttp).unwrap();
        assert_eq!(fs::read(&files[0].path).unwrap(), b"[]");
    }

    #[test]
    fn builtin_catalog_parses() {
        let cat = builtin_catalog();
        let names: Vec<_> = cat.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["qald-9", "lc-quad", "lc-quad-2.0"]);
        assert!(cat.iter().all(|e| e.download_urls.len() == 2));
        assert!(load_catalog(br#"[{"name":"x","format":"generic","download_urls":[]}]"#).is_err());
    }
}
