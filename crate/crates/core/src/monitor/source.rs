//! Where manifests and statement files are fetched from.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::authority::manifest_file_name;
use crate::hashmerkle::Digest32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unreachable: {0}")]
    Unreachable(String),
}

/// A publisher of batch data. Objects are addressed by digest, with the
/// manifest filename as a hint for layouts that store by name.
pub trait DataSource: Sync {
    fn fetch_manifest(&self, root: &Digest32) -> Result<String, FetchError>;
    fn fetch_object(&self, digest: &Digest32, filename: &str) -> Result<Vec<u8>, FetchError>;
}

impl<T: DataSource + ?Sized> DataSource for &T {
    fn fetch_manifest(&self, root: &Digest32) -> Result<String, FetchError> {
        (**self).fetch_manifest(root)
    }

    fn fetch_object(&self, digest: &Digest32, filename: &str) -> Result<Vec<u8>, FetchError> {
        (**self).fetch_object(digest, filename)
    }
}

/// How published data is laid out under a base path or URL.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Layout {
    /// `<root>.manifest` next to the files at their own relative names.
    #[default]
    Authority,
    /// `manifest/<root>` and `object/<digest>`, as an archivist serves them.
    Archivist,
}

/// Reject names that would escape the base directory.
pub(crate) fn safe_relative(filename: &str) -> Option<PathBuf> {
    let p = Path::new(filename);
    let ok = !filename.is_empty()
        && p.components().all(|c| matches!(c, std::path::Component::Normal(_)));
    ok.then(|| p.to_path_buf())
}

#[derive(Clone, Debug)]
pub struct DirSource {
    pub root: PathBuf,
    pub layout: Layout,
}

impl DirSource {
    pub fn new(root: impl Into<PathBuf>, layout: Layout) -> Self {
        DirSource { root: root.into(), layout }
    }

    fn read(path: &Path) -> Result<Vec<u8>, FetchError> {
        fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => FetchError::NotFound(path.display().to_string()),
            _ => FetchError::Unreachable(format!("{}: {e}", path.display())),
        })
    }
}

impl DataSource for DirSource {
    fn fetch_manifest(&self, root: &Digest32) -> Result<String, FetchError> {
        let path = match self.layout {
            Layout::Authority => self.root.join(manifest_file_name(root)),
            Layout::Archivist => self.root.join("manifests").join(manifest_file_name(root)),
        };
        String::from_utf8(Self::read(&path)?).map_err(|e| FetchError::Unreachable(e.to_string()))
    }

    fn fetch_object(&self, digest: &Digest32, filename: &str) -> Result<Vec<u8>, FetchError> {
        let path = match self.layout {
            Layout::Authority => {
                let rel = safe_relative(filename).ok_or_else(|| FetchError::NotFound(filename.to_string()))?;
                self.root.join(rel)
            }
            Layout::Archivist => {
                let hex = digest.to_hex();
                self.root.join("objects").join(&hex[..2]).join(hex)
            }
        };
        Self::read(&path)
    }
}

#[derive(Clone, Debug)]
pub struct HttpSource {
    pub base: String,
    pub layout: Layout,
}

impl HttpSource {
    pub fn new(base: impl Into<String>, layout: Layout) -> Self {
        HttpSource { base: base.into().trim_end_matches('/').to_string(), layout }
    }

    fn get(&self, path: &str) -> Result<Vec<u8>, FetchError> {
        let url = format!("{}/{}", self.base, path);
        match ureq::get(&url).call() {
            Ok(resp) => {
                let mut body = Vec::new();
                resp.into_reader()
                    .read_to_end(&mut body)
                    .map_err(|e| FetchError::Unreachable(format!("{url}: {e}")))?;
                Ok(body)
            }
            Err(ureq::Error::Status(404, _)) => Err(FetchError::NotFound(url)),
            Err(e) => Err(FetchError::Unreachable(format!("{url}: {e}"))),
        }
    }
}

impl DataSource for HttpSource {
    fn fetch_manifest(&self, root: &Digest32) -> Result<String, FetchError> {
        let path = match self.layout {
            Layout::Authority => manifest_file_name(root),
            Layout::Archivist => format!("manifest/{}", root.to_hex()),
        };
        String::from_utf8(self.get(&path)?).map_err(|e| FetchError::Unreachable(e.to_string()))
    }

    fn fetch_object(&self, digest: &Digest32, filename: &str) -> Result<Vec<u8>, FetchError> {
        match self.layout {
            Layout::Authority => {
                safe_relative(filename).ok_or_else(|| FetchError::NotFound(filename.to_string()))?;
                self.get(filename)
            }
            Layout::Archivist => self.get(&format!("object/{}", digest.to_hex())),
        }
    }
}

/// `file://`-less paths and `http(s)://` URLs both name a data source.
pub fn open_source(location: &str, layout: Layout) -> Box<dyn DataSource> {
    if location.starts_with("http://") || location.starts_with("https://") {
        Box::new(HttpSource::new(location, layout))
    } else {
        Box::new(DirSource::new(location.trim_start_matches("file://"), layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_escape_rejected() {
        assert!(safe_relative("pool/a.deb").is_some());
        assert!(safe_relative("../etc/passwd").is_none());
        assert!(safe_relative("/etc/passwd").is_none());
        assert!(safe_relative("").is_none());
    }

    #[test]
    fn dir_source_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let root = Digest32([1; 32]);
        let digest = Digest32([0xcd; 32]);
        fs::write(dir.path().join(manifest_file_name(&root)), "m").unwrap();
        fs::create_dir_all(dir.path().join("pool")).unwrap();
        fs::write(dir.path().join("pool/x"), b"bytes").unwrap();
        let a = DirSource::new(dir.path(), Layout::Authority);
        assert_eq!(a.fetch_manifest(&root).unwrap(), "m");
        assert_eq!(a.fetch_object(&digest, "pool/x").unwrap(), b"bytes");
        assert!(matches!(a.fetch_manifest(&digest), Err(FetchError::NotFound(_))));

        let objects = dir.path().join("objects/cd");
        fs::create_dir_all(&objects).unwrap();
        fs::write(objects.join(digest.to_hex()), b"obj").unwrap();
        let b = DirSource::new(dir.path(), Layout::Archivist);
        assert_eq!(b.fetch_object(&digest, "ignored").unwrap(), b"obj");
    }
}
