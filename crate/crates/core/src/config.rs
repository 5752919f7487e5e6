//! `key=value` config files with one `[section]` per module.
//!
//! Grammar: blank lines and `#` comments are ignored, `[name]` opens a
//! section, and `key = value` assigns within the current section. Values
//! are bare tokens (no quoting); typed accessors parse on demand and report
//! the defining line on failure.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: key {section}.{key}: {message}")]
    BadValue {
        line: usize,
        section: String,
        key: String,
        message: String,
    },
    #[error("line {line}: unknown key {section}.{key}")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// A parsed config file. Keys outside any section live in the "" section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current = String::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }

            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Parse {
                        line,
                        message: "unterminated section header".to_string(),
                    });
                };
                let name = name.trim();
                if name.is_empty() {
                    return Err(ConfigError::Parse {
                        line,
                        message: "empty section name".to_string(),
                    });
                }
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }

            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    message: "empty key".to_string(),
                });
            }
            let previous = sections.entry(current.clone()).or_default().insert(
                key.to_string(),
                Entry {
                    value: value.trim().to_string(),
                    line,
                },
            );
            if let Some(prev) = previous {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "duplicate key `{key}` (first defined on line {})",
                        prev.line
                    ),
                });
            }
        }

        Ok(ConfigFile { sections })
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn get_parsed<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: std::str::FromStr,
        T::Err: fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                ConfigError::BadValue {
                    line: e.line,
                    section: section.to_string(),
                    key: key.to_string(),
                    message: err.to_string(),
                }
            }),
        }
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get_parsed(section, key)
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        self.get_parsed(section, key)
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get_parsed(section, key)
    }

    pub fn get_bool(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(ConfigError::BadValue {
                    line: e.line,
                    section: section.to_string(),
                    key: key.to_string(),
                    message: format!("expected a boolean, got `{other}`"),
                }),
            },
        }
    }

    /// Comma-separated list of unsigned integers, e.g. `levels = 0,25,100`.
    pub fn get_usize_list(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<Vec<usize>>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|tok| tok.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|err| ConfigError::BadValue {
                    line: e.line,
                    section: section.to_string(),
                    key: key.to_string(),
                    message: err.to_string(),
                }),
        }
    }

    /// Fails fast on any key not in the allow-list, naming its line.
    pub fn check_known_keys(&self, known: &[(&str, &str)]) -> Result<(), ConfigError> {
        for (section, entries) in &self.sections {
            for (key, entry) in entries {
                let ok = known
                    .iter()
                    .any(|(s, k)| s == section && k == key);
                if !ok {
                    return Err(ConfigError::UnknownKey {
                        line: entry.line,
                        section: section.clone(),
                        key: key.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}
