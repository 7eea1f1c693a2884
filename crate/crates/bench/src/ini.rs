//! Minimal INI reader: `[section]` headers, `key = value` lines and
//! full-line `#` or `;` comments. Every key remembers its line so that
//! later validation errors can point at it.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ini {
    file: String,
    sections: Vec<Section>,
}

impl Ini {
    /// `file` labels error messages only.
    pub fn parse(file: &str, text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| BenchError::at(file, line, "section header is missing ']'"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(BenchError::at(
                        file,
                        line,
                        format!("invalid section name {name:?}"),
                    ));
                }
                if let Some(prev) = sections.iter().find(|x| x.name == name) {
                    return Err(BenchError::at(
                        file,
                        line,
                        format!("section [{name}] already opened on line {}", prev.line),
                    ));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = s.split_once('=').ok_or_else(|| {
                BenchError::at(file, line, format!("expected 'key = value', found {s:?}"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(BenchError::at(file, line, "empty key"));
            }
            if value.is_empty() {
                return Err(BenchError::at(
                    file,
                    line,
                    format!("key {key:?} has no value"),
                ));
            }
            let section = sections.last_mut().ok_or_else(|| {
                BenchError::at(
                    file,
                    line,
                    format!("key {key:?} appears before any [section]"),
                )
            })?;
            if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
                return Err(BenchError::at(
                    file,
                    line,
                    format!(
                        "duplicate key {key:?} in [{}] (first set on line {})",
                        section.name, prev.line
                    ),
                ));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Self {
            file: file.to_string(),
            sections,
        })
    }

    pub fn file(&self) -> &str {
        &self.file
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Errors on the first section whose name is not in `known`.
    pub fn check_sections(&self, known: &[&str]) -> Result<()> {
        match self
            .sections
            .iter()
            .find(|s| !known.contains(&s.name.as_str()))
        {
            Some(s) => Err(BenchError::at(
                &self.file,
                s.line,
                format!(
                    "unknown section [{}]; expected one of {}",
                    s.name,
                    known.join(", ")
                ),
            )),
            None => Ok(()),
        }
    }

    /// Consumable view of one section; an absent section reads as empty.
    pub fn fields(&self, section: &str) -> Fields<'_> {
        Fields {
            file: &self.file,
            section: section.to_string(),
            left: self
                .section(section)
                .map(|s| s.entries.iter().collect())
                .unwrap_or_default(),
        }
    }
}

/// Keys of one section that have not been read yet.
pub struct Fields<'a> {
    file: &'a str,
    section: String,
    left: Vec<&'a Entry>,
}

impl<'a> Fields<'a> {
    pub fn take(&mut self, key: &str) -> Option<&'a Entry> {
        let i = self.left.iter().position(|e| e.key == key)?;
        Some(self.left.remove(i))
    }

    pub fn error(&self, entry: &Entry, msg: impl Into<String>) -> BenchError {
        BenchError::at(
            self.file,
            entry.line,
            format!("[{}] {}: {}", self.section, entry.key, msg.into()),
        )
    }

    pub fn get<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err: T::Err| self.error(e, err.to_string())),
        }
    }

    /// Comma-separated list; empty items are rejected.
    pub fn list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(e) = self.take(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|item| {
                let item = item.trim();
                if item.is_empty() {
                    return Err(self.error(e, "empty list item"));
                }
                item.parse()
                    .map_err(|err: T::Err| self.error(e, format!("{item:?}: {err}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Errors on the first key nobody read.
    pub fn finish(self) -> Result<()> {
        match self.left.first() {
            Some(e) => Err(BenchError::at(
                self.file,
                e.line,
                format!("unknown key {:?} in [{}]", e.key, self.section),
            )),
            None => Ok(()),
        }
    }
}
