use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ProviderError, ProviderKind, TranslationProvider, TranslationRequest};

/// Translations keyed by (source text, target label name).
pub type FixtureMap = HashMap<(String, String), String>;

/// Parse `source<TAB>target-label<TAB>translation` lines. Blank lines and
/// `#` comments are skipped; duplicate keys are rejected.
pub fn load_fixtures(path: impl AsRef<Path>) -> Result<FixtureMap, ProviderError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ProviderError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_fixtures(&text, &path.display().to_string())
}

pub(crate) fn parse_fixtures(text: &str, origin: &str) -> Result<FixtureMap, ProviderError> {
    let mut map = FixtureMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(ProviderError::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let key = (cols[0].to_string(), cols[1].to_string());
        if map.contains_key(&key) {
            return Err(ProviderError::DuplicateKey {
                text: key.0,
                label: key.1,
                line: i + 1,
            });
        }
        map.insert(key, cols[2].to_string());
    }
    Ok(map)
}

/// Offline provider backed by a [`FixtureMap`].
#[derive(Debug, Default)]
pub struct FixtureProvider {
    map: FixtureMap,
    lookups: AtomicUsize,
}

impl FixtureProvider {
    pub fn new(map: FixtureMap) -> Self {
        FixtureProvider {
            map,
            lookups: AtomicUsize::new(0),
        }
    }

    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    ) -> Result<Self, ProviderError> {
        let mut map = FixtureMap::new();
        for (i, (text, label, translation)) in entries.into_iter().enumerate() {
            if map
                .insert((text.to_string(), label.to_string()), translation.to_string())
                .is_some()
            {
                return Err(ProviderError::DuplicateKey {
                    text: text.to_string(),
                    label: label.to_string(),
                    line: i + 1,
                });
            }
        }
        Ok(Self::new(map))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Number of translate calls served so far, hits and misses alike.
    pub fn lookups(&self) -> usize {
        self.lookups.load(Ordering::Relaxed)
    }
}

impl TranslationProvider for FixtureProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Fixture
    }

    fn translate(&self, request: &TranslationRequest) -> Result<String, ProviderError> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        self.map
            .get(&(request.text.clone(), request.target.name.clone()))
            .cloned()
            .ok_or_else(|| ProviderError::FixtureMiss {
                text: request.text.clone(),
                label: request.target.name.clone(),
            })
    }
}
