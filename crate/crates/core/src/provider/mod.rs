//! Translation providers for dataset generation.
//!
//! [`FixtureProvider`] serves translations from a TSV file and fails loudly
//! on any key it does not know. [`HttpProvider`] (feature `http`) calls a
//! Google-Translate-v2-shaped endpoint. Either can be wrapped in a
//! [`CachedProvider`], which stores one file per request under a cache
//! directory, keyed by a SHA-256 of (provider kind, label, source text).

mod cache;
mod fixture;
#[cfg(feature = "http")]
mod http;

use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub use cache::{cache_key, CachedProvider};
pub use fixture::{load_fixtures, FixtureMap, FixtureProvider};
#[cfg(feature = "http")]
pub use http::{language_code, HttpProvider};

use crate::corpus::LanguageLabel;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no fixture translation for ({text:?}, {label})")]
    FixtureMiss { text: String, label: String },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("duplicate fixture key ({text:?}, {label}) at line {line}")]
    DuplicateKey { text: String, label: String, line: usize },
    #[error("http request failed after {attempts} attempt(s): {message}")]
    Http { attempts: u32, message: String },
    #[error("provider config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub text: String,
    pub target: LanguageLabel,
}

impl TranslationRequest {
    pub fn new(text: impl Into<String>, target: LanguageLabel) -> Self {
        TranslationRequest {
            text: text.into(),
            target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Fixture,
    Http,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Fixture => "fixture",
            ProviderKind::Http => "http",
        })
    }
}

/// Something that turns English text into native-script text for a label.
/// Implementations must tolerate concurrent calls.
pub trait TranslationProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn translate(&self, request: &TranslationRequest) -> Result<String, ProviderError>;
}

impl<P: TranslationProvider + ?Sized> TranslationProvider for Box<P> {
    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn translate(&self, request: &TranslationRequest) -> Result<String, ProviderError> {
        (**self).translate(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub fixture_path: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl ProviderConfig {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Fixture,
            fixture_path: Some(path.into()),
            endpoint: None,
            api_key_env: None,
            cache_dir: None,
            timeout: Duration::from_secs(30),
            max_retries: 3,
        }
    }

    pub fn http(endpoint: impl Into<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Http,
            endpoint: Some(endpoint.into()),
            fixture_path: None,
            ..Self::fixture("")
        }
    }

    pub fn with_cache_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache_dir = Some(dir.into());
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        match self.kind {
            ProviderKind::Fixture if self.fixture_path.as_ref().is_none_or(|p| p.as_os_str().is_empty()) => {
                Err(ProviderError::Config("fixture provider requires a fixture path".into()))
            }
            ProviderKind::Http if self.endpoint.is_none() => {
                Err(ProviderError::Config("http provider requires an endpoint".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiate the configured provider, wrapped in a cache when
    /// `cache_dir` is set.
    pub fn build(&self) -> Result<Box<dyn TranslationProvider>, ProviderError> {
        self.validate()?;
        let inner: Box<dyn TranslationProvider> = match self.kind {
            ProviderKind::Fixture => {
                let path = self.fixture_path.as_ref().expect("validated");
                Box::new(FixtureProvider::new(load_fixtures(path)?))
            }
            ProviderKind::Http => self.build_http()?,
        };
        Ok(match &self.cache_dir {
            Some(dir) => Box::new(CachedProvider::new(inner, dir)?),
            None => inner,
        })
    }

    #[cfg(feature = "http")]
    fn build_http(&self) -> Result<Box<dyn TranslationProvider>, ProviderError> {
        let api_key = match &self.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| ProviderError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        Ok(Box::new(HttpProvider::new(
            self.endpoint.clone().expect("validated"),
            api_key,
            self.timeout,
            self.max_retries,
        )))
    }

    #[cfg(not(feature = "http"))]
    fn build_http(&self) -> Result<Box<dyn TranslationProvider>, ProviderError> {
        Err(ProviderError::Config("built without the `http` feature".into()))
    }
}

/// One-shot translation through a freshly built provider. Callers
/// translating many sentences should [`ProviderConfig::build`] once instead.
pub fn translate(request: &TranslationRequest, config: &ProviderConfig) -> Result<String, ProviderError> {
    if request.text.is_empty() {
        return Err(ProviderError::Config("empty translation request".into()));
    }
    config.build()?.translate(request)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabelSet;

    #[test]
    fn config_validation() {
        assert!(ProviderConfig::fixture("").validate().is_err());
        assert!(ProviderConfig::fixture("f.tsv").validate().is_ok());
        let mut http = ProviderConfig::http("http://localhost:1");
        assert!(http.validate().is_ok());
        http.endpoint = None;
        assert!(http.validate().is_err());
    }

    #[test]
    fn one_shot_translate_through_fixture_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.tsv");
        std::fs::write(&path, "how are you\thindi\tआप कैसे हो\n").unwrap();
        let labels = LabelSet::default();
        let hindi = labels.by_name("hindi").unwrap().clone();
        let config = ProviderConfig::fixture(&path);
        let req = TranslationRequest::new("how are you", hindi.clone());
        assert_eq!(translate(&req, &config).unwrap(), "आप कैसे हो");
        let miss = TranslationRequest::new("xyz", labels.by_name("russian").unwrap().clone());
        let err = translate(&miss, &config).unwrap_err();
        assert!(err.to_string().contains("xyz") && err.to_string().contains("russian"));
    }
}
