//! On-disk layout of a store root and the read side of it: discovery,
//! mounting of sealed files with verified indexes, index rebuilding and
//! file validation.
//!
//! ```text
//! <root>/tapes/<uuid>.xml        sealed XMLtape
//! <root>/tapes/<uuid>.xml.idx.id identifier index
//! <root>/tapes/<uuid>.xml.idx.dt datetime index
//! <root>/arcs/<uuid>.arc         sealed ARC file
//! <root>/arcs/<uuid>.arc.idx.id  datastream index
//! <root>/locator.log             identifier locator log
//! ```
//!
//! Files whose names start with `.tmp-` are in-flight temporaries and are
//! never mounted.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use uuid::Uuid;

use crate::arc::{self, build_arc_index, scan_arc, ArcRecordHeader};
use crate::error::{Error, Result};
use crate::ids::{NamespaceClass, RepoUri};
use crate::index::{build_tape_indexes, verify_target, DatetimeIndex, IdIndex, IndexEntry, TargetInfo};
use crate::io::{is_temp_name, write_atomic};
use crate::tape::{self, read_tape_admin, scan_tape, Finding, TapeAdmin, TapeRecord, ValidationReport};

pub const TAPE_EXT: &str = "xml";
pub const ARC_EXT: &str = "arc";
pub const ID_INDEX_SUFFIX: &str = ".idx.id";
pub const DT_INDEX_SUFFIX: &str = ".idx.dt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tapes_dir(&self) -> PathBuf {
        self.root.join("tapes")
    }

    pub fn arcs_dir(&self) -> PathBuf {
        self.root.join("arcs")
    }

    pub fn locator_path(&self) -> PathBuf {
        self.root.join("locator.log")
    }

    pub fn tape_path(&self, tape: Uuid) -> PathBuf {
        self.tapes_dir().join(format!("{}.{TAPE_EXT}", tape.hyphenated()))
    }

    pub fn arc_path(&self, arc: Uuid) -> PathBuf {
        self.arcs_dir().join(format!("{}.{ARC_EXT}", arc.hyphenated()))
    }

    /// Sealed tapes present under the root, sorted.
    pub fn tape_ids(&self) -> Result<Vec<Uuid>> {
        list_sealed(&self.tapes_dir(), TAPE_EXT)
    }

    /// Sealed ARC files present under the root, sorted.
    pub fn arc_ids(&self) -> Result<Vec<Uuid>> {
        list_sealed(&self.arcs_dir(), ARC_EXT)
    }

    /// Leftover temporaries from interrupted ingests.
    pub fn temporaries(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for dir in [self.tapes_dir(), self.arcs_dir()] {
            let Ok(entries) = fs::read_dir(&dir) else { continue };
            for entry in entries {
                let entry = entry?;
                if entry.file_name().to_str().is_some_and(is_temp_name) {
                    out.push(entry.path());
                }
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn mount_tape(&self, tape: Uuid) -> Result<MountedTape> {
        MountedTape::open(RepoUri::from_parts(NamespaceClass::Tape, tape)?, &self.tape_path(tape))
    }

    pub fn mount_arc(&self, arc: Uuid) -> Result<MountedArc> {
        MountedArc::open(RepoUri::from_parts(NamespaceClass::Arc, arc)?, &self.arc_path(arc))
    }
}

fn list_sealed(dir: &Path, ext: &str) -> Result<Vec<Uuid>> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for entry in entries {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(ext).and_then(|s| s.strip_suffix('.')) {
            if let Ok(ok) = RepoUri::parse_lenient(stem, NamespaceClass::Tape) {
                out.push(ok.uuid());
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn index_path(file: &Path, suffix: &str) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    file.with_file_name(name)
}

/// A sealed tape with both indexes loaded and checked against the file.
#[derive(Debug)]
pub struct MountedTape {
    pub id: RepoUri,
    pub path: PathBuf,
    pub admin: TapeAdmin,
    pub by_id: IdIndex,
    pub by_datetime: DatetimeIndex,
}

impl MountedTape {
    pub fn open(id: RepoUri, path: &Path) -> Result<MountedTape> {
        let id_path = index_path(path, ID_INDEX_SUFFIX);
        let dt_path = index_path(path, DT_INDEX_SUFFIX);
        let by_id = IdIndex::load(&id_path)?;
        let by_datetime = DatetimeIndex::load(&dt_path)?;
        let actual = TargetInfo::of_file(path)?;
        verify_target(&id_path, by_id.target(), &actual)?;
        verify_target(&dt_path, by_datetime.target(), &actual)?;
        if by_id.len() != by_datetime.len() {
            return Err(Error::StaleIndex { path: dt_path.display().to_string(), message: "index cardinalities differ".into() });
        }
        let admin = read_tape_admin(BufReader::new(File::open(path)?))?;
        if admin.tape_id != id {
            return Err(Error::Conflict(format!("{} declares tape id {}", path.display(), admin.tape_id)));
        }
        Ok(MountedTape { id, path: path.to_owned(), admin, by_id, by_datetime })
    }

    pub fn hash_prefix(&self) -> &str {
        &self.by_id.target().sha256[..16]
    }

    pub fn read(&self, entry: &IndexEntry) -> Result<TapeRecord> {
        tape::read_record_at(&mut File::open(&self.path)?, entry.extent)
    }

    pub fn get_record(&self, package_id: &str) -> Result<TapeRecord> {
        self.read(self.by_id.lookup_id(package_id)?)
    }
}

/// A sealed ARC file with its index loaded and checked against the file.
#[derive(Debug)]
pub struct MountedArc {
    pub id: RepoUri,
    pub path: PathBuf,
    pub index: IdIndex,
}

impl MountedArc {
    pub fn open(id: RepoUri, path: &Path) -> Result<MountedArc> {
        let id_path = index_path(path, ID_INDEX_SUFFIX);
        let index = IdIndex::load(&id_path)?;
        verify_target(&id_path, index.target(), &TargetInfo::of_file(path)?)?;
        Ok(MountedArc { id, path: path.to_owned(), index })
    }

    pub fn get_datastream(&self, ds_id: &str) -> Result<(ArcRecordHeader, Vec<u8>)> {
        let entry = self.index.lookup_id(ds_id)?;
        let (header, data) = arc::read_record(&mut File::open(&self.path)?, entry.extent)?;
        if header.url != ds_id {
            return Err(Error::CorruptRecord { offset: entry.extent.offset, message: format!("record holds {}", header.url) });
        }
        Ok((header, data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Tape,
    Arc,
}

impl FileKind {
    pub fn of_path(path: &Path) -> Option<FileKind> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(TAPE_EXT) => Some(FileKind::Tape),
            Some(ARC_EXT) => Some(FileKind::Arc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexWrite {
    Written,
    Unchanged,
}

fn put_index(path: &Path, bytes: &[u8]) -> Result<IndexWrite> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(IndexWrite::Unchanged);
    }
    write_atomic(path, bytes)?;
    Ok(IndexWrite::Written)
}

/// Rebuild the index files of one sealed tape or ARC file from a fresh
/// scan. Returns the index paths with what happened to each.
pub fn reindex(path: &Path) -> Result<Vec<(PathBuf, IndexWrite)>> {
    match FileKind::of_path(path) {
        Some(FileKind::Tape) => {
            let scan = scan_tape(BufReader::with_capacity(1 << 20, File::open(path)?))?;
            let (by_id, by_dt) = build_tape_indexes(scan.index_entries(), scan.target)?;
            let id_path = index_path(path, ID_INDEX_SUFFIX);
            let dt_path = index_path(path, DT_INDEX_SUFFIX);
            let a = put_index(&id_path, &by_id.render())?;
            let b = put_index(&dt_path, &by_dt.render())?;
            Ok(vec![(id_path, a), (dt_path, b)])
        }
        Some(FileKind::Arc) => {
            let scan = scan_arc(File::open(path)?)?;
            let index = build_arc_index(&scan)?;
            let id_path = index_path(path, ID_INDEX_SUFFIX);
            let a = put_index(&id_path, &index.render())?;
            Ok(vec![(id_path, a)])
        }
        None => Err(Error::payload(format!("{} is neither a .{TAPE_EXT} tape nor a .{ARC_EXT} file", path.display()))),
    }
}

/// Validate a tape or ARC file, including agreement with its index files
/// when they exist.
pub fn validate_file(path: &Path) -> Result<ValidationReport> {
    match FileKind::of_path(path) {
        Some(FileKind::Tape) => {
            let bytes = fs::read(path)?;
            let mut report = tape::validate_tape(&bytes);
            if report.is_valid() {
                let scan = scan_tape(&bytes[..])?;
                let (by_id, by_dt) = build_tape_indexes(scan.index_entries(), scan.target)?;
                check_index_file(&mut report, &index_path(path, ID_INDEX_SUFFIX), &by_id.render());
                check_index_file(&mut report, &index_path(path, DT_INDEX_SUFFIX), &by_dt.render());
            }
            Ok(report)
        }
        Some(FileKind::Arc) => Ok(validate_arc(path)),
        None => Err(Error::payload(format!("{} is neither a .{TAPE_EXT} tape nor a .{ARC_EXT} file", path.display()))),
    }
}

fn check_index_file(report: &mut ValidationReport, path: &Path, expected: &[u8]) {
    match fs::read(path) {
        Ok(actual) if actual == expected => {}
        Ok(_) => report.findings.push(Finding { ordinal: None, message: format!("index {} disagrees with a fresh scan", path.display()) }),
        Err(_) => {}
    }
}

fn validate_arc(path: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let scan = match File::open(path).map_err(Error::from).and_then(scan_arc) {
        Ok(scan) => scan,
        Err(Error::Scan { offset, ordinal, message }) => {
            report.findings.push(Finding { ordinal, message: format!("scan failed at byte {offset}: {message}") });
            return report;
        }
        Err(e) => {
            report.findings.push(Finding { ordinal: None, message: e.to_string() });
            return report;
        }
    };
    report.scanned = Some(scan.records.len() as u64 - 1);
    let mut seen = HashSet::new();
    for (i, (h, _)) in scan.records.iter().enumerate().skip(1) {
        if !seen.insert(h.url.as_str()) {
            report.findings.push(Finding { ordinal: Some(i as u64 - 1), message: format!("duplicate datastream id {}", h.url) });
        }
    }
    if report.is_valid() {
        match build_arc_index(&scan) {
            Ok(index) => check_index_file(&mut report, &index_path(path, ID_INDEX_SUFFIX), &index.render()),
            Err(e) => report.findings.push(Finding { ordinal: None, message: e.to_string() }),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_paths() {
        let s = Store::new("/r");
        let u = Uuid::from_u128(7);
        assert_eq!(s.tape_path(u), Path::new("/r/tapes/00000000-0000-0000-0000-000000000007.xml"));
        assert_eq!(s.arc_path(u), Path::new("/r/arcs/00000000-0000-0000-0000-000000000007.arc"));
        assert_eq!(index_path(&s.tape_path(u), DT_INDEX_SUFFIX), Path::new("/r/tapes/00000000-0000-0000-0000-000000000007.xml.idx.dt"));
    }

    #[test]
    fn discovery_skips_temporaries_and_indexes() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::new(dir.path());
        fs::create_dir_all(s.tapes_dir()).unwrap();
        let u = Uuid::new_v4();
        let p = s.tape_path(u);
        fs::write(&p, b"x").unwrap();
        fs::write(index_path(&p, ID_INDEX_SUFFIX), b"x").unwrap();
        fs::write(s.tapes_dir().join(format!(".tmp-abc-{}.xml", Uuid::new_v4())), b"x").unwrap();
        fs::write(s.tapes_dir().join("notes.xml"), b"x").unwrap();
        assert_eq!(s.tape_ids().unwrap(), vec![u]);
        assert_eq!(s.temporaries().unwrap().len(), 1);
        assert!(s.arc_ids().unwrap().is_empty());
    }
}
