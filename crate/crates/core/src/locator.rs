//! Identifier Locator: Content Identifier to every stored version.
//!
//! Persisted as an append-only log, one entry per line:
//! `content_id \t package_id \t tape_id \t created \n`. A trailing line
//! without its newline (an interrupted append) is ignored on load and cut
//! off before the next append.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::ids::{ContentId, NamespaceClass, RepoUri};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionEntry {
    pub content_id: ContentId,
    pub package_id: RepoUri,
    pub tape_id: RepoUri,
    pub created: Datestamp,
}

impl VersionEntry {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}\n", self.content_id, self.package_id, self.tape_id, self.created)
    }

    pub fn parse_line(line: &str) -> Result<VersionEntry> {
        let f: Vec<&str> = line.split('\t').collect();
        let [c, p, t, d] = f.as_slice() else {
            return Err(Error::payload(format!("locator line needs 4 fields: {line:?}")));
        };
        Ok(VersionEntry {
            content_id: ContentId::new(*c)?,
            package_id: RepoUri::parse_class(p, NamespaceClass::Package)?,
            tape_id: RepoUri::parse_class(t, NamespaceClass::Tape)?,
            created: Datestamp::parse_iso(d)?,
        })
    }
}

/// One version as reported to agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Version {
    pub package_id: String,
    pub oai_base_url: String,
    pub created: String,
}

/// In-memory view of the log.
#[derive(Debug, Clone, Default)]
pub struct Locator {
    path: PathBuf,
    /// Bytes of the log consumed so far (complete lines only).
    consumed: u64,
    versions: BTreeMap<String, Vec<VersionEntry>>,
    by_package: HashMap<RepoUri, VersionEntry>,
}

impl Locator {
    /// Replay the log at `path`; a missing log is an empty locator.
    pub fn open(path: impl Into<PathBuf>) -> Result<Locator> {
        let mut loc = Locator { path: path.into(), ..Locator::default() };
        loc.refresh()?;
        Ok(loc)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Size of the log prefix this view reflects.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn len(&self) -> usize {
        self.by_package.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_package.is_empty()
    }

    /// Read any complete lines appended since the last load.
    pub fn refresh(&mut self) -> Result<bool> {
        let mut file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
            Err(e) => return Err(e.into()),
        };
        self.absorb(&mut file)
    }

    fn absorb(&mut self, file: &mut File) -> Result<bool> {
        let len = file.metadata()?.len();
        if len < self.consumed {
            return Err(Error::Conflict(format!("{} shrank", self.path.display())));
        }
        if len == self.consumed {
            return Ok(false);
        }
        file.seek(SeekFrom::Start(self.consumed))?;
        let mut tail = Vec::new();
        file.take(len - self.consumed).read_to_end(&mut tail)?;
        let complete = match tail.iter().rposition(|b| *b == b'\n') {
            Some(i) => i + 1,
            None => return Ok(false),
        };
        let text = std::str::from_utf8(&tail[..complete]).map_err(|_| Error::payload("locator log is not UTF-8"))?;
        for line in text.lines() {
            let entry = VersionEntry::parse_line(line)?;
            self.insert(entry)?;
        }
        self.consumed += complete as u64;
        Ok(true)
    }

    fn check(&self, entry: &VersionEntry) -> Result<bool> {
        match self.by_package.get(&entry.package_id) {
            None => Ok(true),
            Some(old) if old == entry => Ok(false),
            Some(old) => Err(Error::Conflict(format!("{} already registered for {} in {}", entry.package_id, old.content_id, old.tape_id))),
        }
    }

    fn insert(&mut self, entry: VersionEntry) -> Result<()> {
        if !self.check(&entry)? {
            return Ok(());
        }
        let list = self.versions.entry(entry.content_id.as_str().to_owned()).or_default();
        let key = |e: &VersionEntry| (e.created, e.package_id.to_string());
        let pos = list.partition_point(|e| key(e) <= key(&entry));
        list.insert(pos, entry.clone());
        self.by_package.insert(entry.package_id, entry);
        Ok(())
    }

    /// Durably append `entries` under an exclusive file lock. Exact
    /// duplicates are skipped; a package registered with different details
    /// is a conflict and nothing is written. Returns how many were new.
    pub fn register(&mut self, entries: &[VersionEntry]) -> Result<usize> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&self.path)?;
        file.lock()?;
        let result = self.register_locked(&mut file, entries);
        let _ = file.unlock();
        result
    }

    fn register_locked(&mut self, file: &mut File, entries: &[VersionEntry]) -> Result<usize> {
        self.absorb(file)?;
        let len = file.metadata()?.len();
        if len > self.consumed {
            // Torn line from an interrupted append.
            file.set_len(self.consumed)?;
        }
        let mut fresh: Vec<&VersionEntry> = Vec::new();
        for e in entries {
            if self.check(e)? && !fresh.iter().any(|f| f.package_id == e.package_id) {
                fresh.push(e);
            } else if let Some(f) = fresh.iter().find(|f| f.package_id == e.package_id) {
                if *f != e {
                    return Err(Error::Conflict(format!("{} given twice with different details", e.package_id)));
                }
            }
        }
        if fresh.is_empty() {
            return Ok(0);
        }
        let text: String = fresh.iter().map(|e| e.to_line()).collect();
        file.write_all(text.as_bytes())?;
        file.sync_data()?;
        let n = fresh.len();
        for e in fresh.into_iter().cloned().collect::<Vec<_>>() {
            self.insert(e)?;
        }
        self.consumed += text.len() as u64;
        Ok(n)
    }

    /// Every version of `content_id`, oldest first.
    pub fn entries(&self, content_id: &str) -> &[VersionEntry] {
        self.versions.get(content_id).map_or(&[], Vec::as_slice)
    }

    pub fn package(&self, package_id: &RepoUri) -> Option<&VersionEntry> {
        self.by_package.get(package_id)
    }

    pub fn all(&self) -> impl Iterator<Item = &VersionEntry> {
        self.versions.values().flatten()
    }

    /// Versions with their OAI-PMH base URLs built from `oai_template`
    /// (`{tape}` is replaced by the tape UUID).
    pub fn resolve_versions(&self, content_id: &str, oai_template: &str) -> Vec<Version> {
        self.entries(content_id)
            .iter()
            .map(|e| Version {
                package_id: e.package_id.to_string(),
                oai_base_url: oai_template.replace("{tape}", &e.tape_id.uuid_str()),
                created: e.created.to_string(),
            })
            .collect()
    }
}
