use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::{ProviderError, ProviderKind, TranslationProvider, TranslationRequest};

/// Hex SHA-256 over (provider kind, label, text), NUL-separated.
pub fn cache_key(kind: ProviderKind, request: &TranslationRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(kind.to_string().as_bytes());
    hasher.update([0]);
    hasher.update(request.target.name.as_bytes());
    hasher.update([0]);
    hasher.update(request.text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Disk cache in front of another provider: one file per key, written via a
/// temporary file and an atomic rename so concurrent writers never expose a
/// partial entry.
#[derive(Debug)]
pub struct CachedProvider<P> {
    inner: P,
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl<P: TranslationProvider> CachedProvider<P> {
    pub fn new(inner: P, dir: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| ProviderError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(CachedProvider {
            inner,
            dir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn entry_path(&self, request: &TranslationRequest) -> PathBuf {
        self.dir.join(cache_key(self.inner.kind(), request))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ProviderError + '_ {
        move |source| ProviderError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl<P: TranslationProvider> TranslationProvider for CachedProvider<P> {
    fn kind(&self) -> ProviderKind {
        self.inner.kind()
    }

    fn translate(&self, request: &TranslationRequest) -> Result<String, ProviderError> {
        let path = self.entry_path(request);
        match fs::read(&path) {
            Ok(bytes) => {
                return String::from_utf8(bytes).map_err(|_| ProviderError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::new(ErrorKind::InvalidData, "cache entry is not UTF-8"),
                })
            }
            Err(e) if e.kind() == ErrorKind::NotFound => {}
            Err(e) => return Err(Self::io(&path)(e)),
        }
        let value = self.inner.translate(request)?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
        fs::write(&tmp, value.as_bytes()).map_err(Self::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(Self::io(&path))?;
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSet;
    use crate::provider::FixtureProvider;

    #[test]
    fn second_request_is_served_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let labels = LabelSet::default();
        let fixture = FixtureProvider::from_entries([("how are you", "hindi", "आप कैसे हो")]).unwrap();
        let cached = CachedProvider::new(fixture, dir.path()).unwrap();
        let req = TranslationRequest::new("how are you", labels.by_name("hindi").unwrap().clone());
        let first = cached.translate(&req).unwrap();
        assert_eq!(cached.inner().lookups(), 1);
        let second = cached.translate(&req).unwrap();
        assert_eq!(cached.inner().lookups(), 1);
        assert_eq!(first.as_bytes(), second.as_bytes());
        assert_eq!(fs::read(cached.entry_path(&req)).unwrap(), first.as_bytes());

        // survives a restart
        let fresh = CachedProvider::new(FixtureProvider::default(), dir.path()).unwrap();
        assert_eq!(fresh.translate(&req).unwrap(), first);
        assert_eq!(fresh.inner().lookups(), 0);
    }

    #[test]
    fn keys_separate_labels_and_kinds() {
        let labels = LabelSet::default();
        let hi = TranslationRequest::new("hello", labels.by_name("hindi").unwrap().clone());
        let ru = TranslationRequest::new("hello", labels.by_name("russian").unwrap().clone());
        assert_ne!(
            cache_key(ProviderKind::Fixture, &hi),
            cache_key(ProviderKind::Fixture, &ru)
        );
        assert_ne!(
            cache_key(ProviderKind::Fixture, &hi),
            cache_key(ProviderKind::Http, &hi)
        );
        assert_eq!(cache_key(ProviderKind::Fixture, &hi).len(), 64);
    }

    #[test]
    fn misses_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let labels = LabelSet::default();
        let cached = CachedProvider::new(FixtureProvider::default(), dir.path()).unwrap();
        let req = TranslationRequest::new("xyz", labels.by_name("russian").unwrap().clone());
        assert!(cached.translate(&req).is_err());
        assert!(!cached.entry_path(&req).exists());
    }
}
