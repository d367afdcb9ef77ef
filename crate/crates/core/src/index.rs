//! Portable byte-offset indexes.
//!
//! Index files are UTF-8 text. The first line records the indexed file's
//! size and SHA-256 so stale indexes can be detected; every following line
//! is one entry:
//!
//! ```text
//! #xmltape-index v1 kind=<id|dt> size=<bytes> sha256=<hex>
//! <key> TAB <offset> TAB <length> TAB <datestamp> TAB <ordinal> LF
//! ```
//!
//! Identifier indexes are sorted by key bytes, datetime indexes by
//! (datestamp, ordinal).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::extent::ByteExtent;
use crate::io::file_digest;

const MAGIC: &str = "#xmltape-index v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub key: String,
    pub extent: ByteExtent,
    pub datestamp: Datestamp,
    /// Position of the record in file order.
    pub ordinal: u64,
}

/// Size and SHA-256 of the file an index points into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetInfo {
    pub size: u64,
    pub sha256: String,
}

impl TargetInfo {
    pub fn of_file(path: &Path) -> Result<TargetInfo> {
        let (size, sha256) = file_digest(path)?;
        Ok(TargetInfo { size, sha256 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Id,
    Datetime,
}

impl Kind {
    fn token(self) -> &'static str {
        match self {
            Kind::Id => "id",
            Kind::Datetime => "dt",
        }
    }
}

/// Index keys end up in tab-separated lines.
pub fn valid_key(key: &str) -> bool {
    !key.is_empty() && !key.chars().any(|c| c.is_control())
}

fn render(kind: Kind, target: &TargetInfo, entries: &[IndexEntry]) -> Vec<u8> {
    let mut out = String::with_capacity(64 + entries.len() * 96);
    writeln!(out, "{MAGIC} kind={} size={} sha256={}", kind.token(), target.size, target.sha256).unwrap();
    for e in entries {
        writeln!(out, "{}\t{}\t{}\t{}\t{}", e.key, e.extent.offset, e.extent.length, e.datestamp, e.ordinal).unwrap();
    }
    out.into_bytes()
}

fn parse(kind: Kind, path: &str, bytes: &[u8]) -> Result<(TargetInfo, Vec<IndexEntry>)> {
    let bad = |line: usize, message: &str| Error::MalformedIndex { path: path.to_owned(), line, message: message.to_owned() };
    let text = std::str::from_utf8(bytes).map_err(|_| bad(0, "not UTF-8"))?;
    if !text.ends_with('\n') {
        return Err(bad(0, "missing final newline"));
    }
    let mut lines = text[..text.len() - 1].split('\n');
    let header = lines.next().unwrap_or_default();
    let rest = header.strip_prefix(MAGIC).ok_or_else(|| bad(1, "missing index header"))?;
    let fields: Vec<&str> = rest.split(' ').collect();
    let target = match fields.as_slice() {
        ["", k, size, sha] => {
            if k.strip_prefix("kind=") != Some(kind.token()) {
                return Err(bad(1, "wrong index kind"));
            }
            let size = size.strip_prefix("size=").and_then(|s| s.parse().ok()).ok_or_else(|| bad(1, "bad size"))?;
            let sha = sha.strip_prefix("sha256=").filter(|s| s.len() == 64).ok_or_else(|| bad(1, "bad sha256"))?;
            TargetInfo { size, sha256: sha.to_owned() }
        }
        _ => return Err(bad(1, "malformed index header")),
    };
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(n, "expected 5 tab-separated fields"));
        }
        let num = |s: &str| -> Result<u64> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad(n, "malformed number"));
            }
            s.parse().map_err(|_| bad(n, "malformed number"))
        };
        if !valid_key(f[0]) {
            return Err(bad(n, "malformed key"));
        }
        entries.push(IndexEntry {
            key: f[0].to_owned(),
            extent: ByteExtent::new(num(f[1])?, num(f[2])?),
            datestamp: Datestamp::parse_iso(f[3]).map_err(|_| bad(n, "malformed datestamp"))?,
            ordinal: num(f[4])?,
        });
    }
    Ok((target, entries))
}

/// Identifier-keyed index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdIndex {
    target: TargetInfo,
    entries: Vec<IndexEntry>,
}

impl IdIndex {
    /// Sorts by key; duplicate keys are an error.
    pub fn new(mut entries: Vec<IndexEntry>, target: TargetInfo) -> Result<IdIndex> {
        if let Some(e) = entries.iter().find(|e| !valid_key(&e.key)) {
            return Err(Error::Payload(format!("key {:?} cannot be indexed", e.key)));
        }
        entries.sort_by(|a, b| a.key.as_bytes().cmp(b.key.as_bytes()));
        if let Some(w) = entries.windows(2).find(|w| w[0].key == w[1].key) {
            return Err(Error::DuplicateKey(w[0].key.clone()));
        }
        Ok(IdIndex { target, entries })
    }

    pub fn lookup(&self, key: &str) -> Option<&IndexEntry> {
        self.entries.binary_search_by(|e| e.key.as_bytes().cmp(key.as_bytes())).ok().map(|i| &self.entries[i])
    }

    /// Like [`IdIndex::lookup`] but with a not-found error.
    pub fn lookup_id(&self, key: &str) -> Result<&IndexEntry> {
        self.lookup(key).ok_or_else(|| Error::NotFound(key.to_owned()))
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn target(&self) -> &TargetInfo {
        &self.target
    }

    pub fn render(&self) -> Vec<u8> {
        render(Kind::Id, &self.target, &self.entries)
    }

    pub fn parse(path: &str, bytes: &[u8]) -> Result<IdIndex> {
        let (target, entries) = parse(Kind::Id, path, bytes)?;
        let bad = |m: &str| Error::MalformedIndex { path: path.to_owned(), line: 0, message: m.to_owned() };
        if entries.windows(2).any(|w| w[0].key.as_bytes() >= w[1].key.as_bytes()) {
            return Err(bad("entries not strictly sorted by key"));
        }
        check_fits(&entries, &target).map_err(|m| bad(&m))?;
        Ok(IdIndex { target, entries })
    }

    pub fn load(path: &Path) -> Result<IdIndex> {
        IdIndex::parse(&path.display().to_string(), &fs::read(path)?)
    }
}

/// Creation-datetime-keyed index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatetimeIndex {
    target: TargetInfo,
    entries: Vec<IndexEntry>,
}

impl DatetimeIndex {
    pub fn new(mut entries: Vec<IndexEntry>, target: TargetInfo) -> DatetimeIndex {
        entries.sort_by_key(|e| (e.datestamp, e.ordinal));
        DatetimeIndex { target, entries }
    }

    /// Entries with `from <= datestamp <= until` in (datestamp, ordinal)
    /// order; absent bounds are open.
    pub fn range(&self, from: Option<Datestamp>, until: Option<Datestamp>) -> Result<&[IndexEntry]> {
        if let (Some(f), Some(u)) = (from, until) {
            if f > u {
                return Err(Error::InvalidRange { from: f.to_string(), until: u.to_string() });
            }
        }
        let lo = from.map_or(0, |f| self.entries.partition_point(|e| e.datestamp < f));
        let hi = until.map_or(self.entries.len(), |u| self.entries.partition_point(|e| e.datestamp <= u));
        Ok(&self.entries[lo..hi.max(lo)])
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn target(&self) -> &TargetInfo {
        &self.target
    }

    pub fn render(&self) -> Vec<u8> {
        render(Kind::Datetime, &self.target, &self.entries)
    }

    pub fn parse(path: &str, bytes: &[u8]) -> Result<DatetimeIndex> {
        let (target, entries) = parse(Kind::Datetime, path, bytes)?;
        let bad = |m: &str| Error::MalformedIndex { path: path.to_owned(), line: 0, message: m.to_owned() };
        if entries.windows(2).any(|w| (w[0].datestamp, w[0].ordinal) >= (w[1].datestamp, w[1].ordinal)) {
            return Err(bad("entries not strictly sorted by (datestamp, ordinal)"));
        }
        check_fits(&entries, &target).map_err(|m| bad(&m))?;
        Ok(DatetimeIndex { target, entries })
    }

    pub fn load(path: &Path) -> Result<DatetimeIndex> {
        DatetimeIndex::parse(&path.display().to_string(), &fs::read(path)?)
    }
}

fn check_fits(entries: &[IndexEntry], target: &TargetInfo) -> std::result::Result<(), String> {
    match entries.iter().find(|e| !e.extent.fits(target.size)) {
        Some(e) => Err(format!("extent {} of {:?} exceeds target size {}", e.extent, e.key, target.size)),
        None => Ok(()),
    }
}

/// Both tape indexes from one list of entries, e.g. a write-time log or a scan.
pub fn build_tape_indexes(entries: Vec<IndexEntry>, target: TargetInfo) -> Result<(IdIndex, DatetimeIndex)> {
    let by_id = IdIndex::new(entries.clone(), target.clone())?;
    Ok((by_id, DatetimeIndex::new(entries, target)))
}

/// Compare an index header against the file it claims to describe.
pub fn verify_target(index_path: &Path, expected: &TargetInfo, actual: &TargetInfo) -> Result<()> {
    if expected != actual {
        return Err(Error::StaleIndex {
            path: index_path.display().to_string(),
            message: format!(
                "index describes {} bytes sha256={}, file has {} bytes sha256={}",
                expected.size, expected.sha256, actual.size, actual.sha256
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn target() -> TargetInfo {
        TargetInfo { size: 1 << 40, sha256: "0".repeat(64) }
    }

    fn entry(key: &str, t: i64, ordinal: u64) -> IndexEntry {
        IndexEntry { key: key.into(), extent: ByteExtent::new(ordinal * 10, 9), datestamp: Datestamp::from_unix(t), ordinal }
    }

    #[test]
    fn datetime_ties_keep_file_order() {
        let (_, dt) = build_tape_indexes(vec![entry("c", 5, 0), entry("a", 9, 1), entry("b", 9, 2)], target()).unwrap();
        let keys: Vec<_> = dt.entries().iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["c", "a", "b"]);
        let (_, dt) = build_tape_indexes(vec![entry("x", 9, 0), entry("y", 5, 1), entry("z", 9, 2)], target()).unwrap();
        let keys: Vec<_> = dt.entries().iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["y", "x", "z"]);
    }

    #[test]
    fn empty_indexes() {
        let (id, dt) = build_tape_indexes(Vec::new(), target()).unwrap();
        assert!(id.is_empty() && dt.is_empty());
        assert_eq!(IdIndex::parse("x", &id.render()).unwrap(), id);
        assert_eq!(DatetimeIndex::parse("x", &dt.render()).unwrap(), dt);
    }

    #[test]
    fn duplicates_rejected() {
        let err = build_tape_indexes(vec![entry("a", 1, 0), entry("a", 2, 1)], target()).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey(k) if k == "a"));
    }

    #[test]
    fn lookup_and_inclusive_range() {
        let (id, dt) = build_tape_indexes((0..10).map(|i| entry(&format!("k{i}"), i as i64, i)).collect(), target()).unwrap();
        assert_eq!(id.lookup("k3").unwrap().ordinal, 3);
        assert!(id.lookup("nope").is_none());
        assert!(matches!(id.lookup_id("nope"), Err(Error::NotFound(_))));
        let t = Datestamp::from_unix(4);
        assert_eq!(dt.range(Some(t), Some(t)).unwrap().len(), 1);
        assert_eq!(dt.range(None, None).unwrap().len(), 10);
        assert_eq!(dt.range(Some(Datestamp::from_unix(8)), None).unwrap().len(), 2);
        assert!(matches!(dt.range(Some(Datestamp::from_unix(5)), Some(t)), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn render_format() {
        let idx = IdIndex::new(vec![entry("info:x/b", 0, 1), entry("info:x/a", 86400, 0)], TargetInfo { size: 100, sha256: "a".repeat(64) }).unwrap();
        let text = String::from_utf8(idx.render()).unwrap();
        let expected = format!(
            "#xmltape-index v1 kind=id size=100 sha256={}\ninfo:x/a\t0\t9\t1970-01-02T00:00:00Z\t0\ninfo:x/b\t10\t9\t1970-01-01T00:00:00Z\t1\n",
            "a".repeat(64)
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn parse_rejects_damage() {
        let idx = IdIndex::new(vec![entry("a", 0, 0), entry("b", 0, 1)], TargetInfo { size: 100, sha256: "a".repeat(64) }).unwrap();
        let text = String::from_utf8(idx.render()).unwrap();
        assert!(IdIndex::parse("x", text.replace("kind=id", "kind=dt").as_bytes()).is_err());
        assert!(IdIndex::parse("x", text.trim_end().as_bytes()).is_err());
        assert!(IdIndex::parse("x", text.replace("\t10\t", "\t95\t").as_bytes()).is_err());
        assert!(DatetimeIndex::parse("x", text.as_bytes()).is_err());
        let swapped = text.replace("a\t0\t9", "c\t0\t9");
        assert!(IdIndex::parse("x", swapped.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn range_matches_brute_force(
            stamps in proptest::collection::vec(0i64..50, 0..60),
            from in proptest::option::of(0i64..55),
            until in proptest::option::of(0i64..55),
        ) {
            let entries: Vec<_> = stamps.iter().enumerate().map(|(i, t)| entry(&format!("k{i}"), *t, i as u64)).collect();
            let (_, dt) = build_tape_indexes(entries.clone(), target()).unwrap();
            let (from, until) = (from.map(Datestamp::from_unix), until.map(Datestamp::from_unix));
            match dt.range(from, until) {
                Err(_) => prop_assert!(from > until),
                Ok(got) => {
                    let mut want: Vec<_> = entries
                        .into_iter()
                        .filter(|e| from.is_none_or(|f| e.datestamp >= f) && until.is_none_or(|u| e.datestamp <= u))
                        .collect();
                    want.sort_by_key(|e| (e.datestamp, e.ordinal));
                    prop_assert_eq!(got, &want[..]);
                }
            }
        }

        #[test]
        fn render_parse_identity(stamps in proptest::collection::vec(0i64..1_000_000_000, 0..30)) {
            let entries: Vec<_> = stamps.iter().enumerate().map(|(i, t)| entry(&format!("info:k/{t}-{i}"), *t, i as u64)).collect();
            let (id, dt) = build_tape_indexes(entries, target()).unwrap();
            prop_assert_eq!(IdIndex::parse("p", &id.render()).unwrap(), id);
            prop_assert_eq!(DatetimeIndex::parse("p", &dt.render()).unwrap(), dt);
        }
    }
}
