//! Batch ingestion: one batch of Digital Objects becomes one sealed tape,
//! zero or more sealed ARC files, their indexes and locator registrations.
//!
//! Everything is written under temporary names first. On success the files
//! are renamed into place in dependency order (ARC indexes, ARC files, tape
//! indexes, tape) and only then registered with the locator, so a tape is
//! never visible before the ARC records it references.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use crate::arc::{record_footprint, valid_media_type, version_block_footprint, ArcWriter};
use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::ids::{ContentId, NamespaceClass, RepoUri};
use crate::index::build_tape_indexes;
use crate::io::{create_new, sync_dir, temp_path};
use crate::locator::{Locator, VersionEntry};
use crate::store::{index_path, Store, DT_INDEX_SUFFIX, ID_INDEX_SUFFIX};
use crate::tape::{TapeAdmin, TapeRecord, TapeRecordAdmin, TapeWriter};
use crate::wrapper::{check_base_url, make_openurl, make_wrapper, DatastreamRef};
use crate::xml;

pub const TAPE_PLACEHOLDER: &str = "{tape}";
pub const ARC_PLACEHOLDER: &str = "{arc}";
pub const DEFAULT_MAX_ARC_BYTES: u64 = 500 << 20;

pub trait Clock: Send + Sync {
    fn now(&self) -> Datestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Datestamp {
        Datestamp::now()
    }
}

/// Starts at `start` and advances `step` seconds per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
    step: i64,
}

impl SteppingClock {
    pub fn new(start: Datestamp, step: i64) -> SteppingClock {
        SteppingClock { next: AtomicI64::new(start.unix()), step }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Datestamp {
        Datestamp::from_unix(self.next.fetch_add(self.step, Ordering::SeqCst))
    }
}

type Opener = dyn Fn() -> io::Result<Box<dyn Read + Send>> + Send + Sync;

#[derive(Clone)]
pub enum DatastreamData {
    Bytes(Vec<u8>),
    File(PathBuf),
    /// `len` bytes produced by a fresh reader from `open`.
    Stream {
        len: u64,
        open: Arc<Opener>,
    },
}

impl fmt::Debug for DatastreamData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatastreamData::Bytes(b) => write!(f, "Bytes({} bytes)", b.len()),
            DatastreamData::File(p) => write!(f, "File({})", p.display()),
            DatastreamData::Stream { len, .. } => write!(f, "Stream({len} bytes)"),
        }
    }
}

impl DatastreamData {
    fn len(&self) -> Result<u64> {
        match self {
            DatastreamData::Bytes(b) => Ok(b.len() as u64),
            DatastreamData::File(p) => {
                let meta = fs::metadata(p).map_err(|e| Error::InvalidBatch(format!("{}: {e}", p.display())))?;
                if !meta.is_file() {
                    return Err(Error::InvalidBatch(format!("{} is not a regular file", p.display())));
                }
                Ok(meta.len())
            }
            DatastreamData::Stream { len, .. } => Ok(*len),
        }
    }

    fn open(&self) -> io::Result<Box<dyn Read + Send + '_>> {
        match self {
            DatastreamData::Bytes(b) => Ok(Box::new(&b[..])),
            DatastreamData::File(p) => Ok(Box::new(io::BufReader::with_capacity(1 << 20, File::open(p)?))),
            DatastreamData::Stream { open, .. } => open(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Datastream {
    pub data: DatastreamData,
    pub media_type: String,
}

#[derive(Debug, Clone)]
pub struct SubmissionObject {
    pub content_id: ContentId,
    /// One self-contained XML element.
    pub metadata: Vec<u8>,
    pub datastreams: Vec<Datastream>,
}

#[derive(Clone)]
pub struct IngestConfig {
    pub max_arc_bytes: u64,
    /// Base URL of an ARC file's resolver, with `{arc}` for its UUID.
    pub openurl_base_template: String,
    /// Base URL of a tape's OAI-PMH repository, with `{tape}` for its UUID.
    pub oai_base_template: String,
    pub clock: Arc<dyn Clock>,
    /// Extra tape-level provenance properties.
    pub provenance: Vec<(String, String)>,
}

impl fmt::Debug for IngestConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IngestConfig")
            .field("max_arc_bytes", &self.max_arc_bytes)
            .field("openurl_base_template", &self.openurl_base_template)
            .field("oai_base_template", &self.oai_base_template)
            .finish_non_exhaustive()
    }
}

impl IngestConfig {
    pub fn new(openurl_base_template: impl Into<String>, oai_base_template: impl Into<String>) -> IngestConfig {
        IngestConfig {
            max_arc_bytes: DEFAULT_MAX_ARC_BYTES,
            openurl_base_template: openurl_base_template.into(),
            oai_base_template: oai_base_template.into(),
            clock: Arc::new(SystemClock),
            provenance: vec![("software".into(), format!("xmltape {}", env!("CARGO_PKG_VERSION")))],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_arc_bytes == 0 {
            return Err(Error::Config("max_arc_bytes must be positive".into()));
        }
        check_template(&self.openurl_base_template, ARC_PLACEHOLDER)?;
        check_template(&self.oai_base_template, TAPE_PLACEHOLDER)
    }

    pub fn openurl_base(&self, arc: &RepoUri) -> String {
        self.openurl_base_template.replace(ARC_PLACEHOLDER, &arc.uuid_str())
    }
}

/// A template must hold `placeholder` exactly once and expand to an
/// absolute HTTP URL.
pub fn check_template(template: &str, placeholder: &str) -> Result<()> {
    if template.matches(placeholder).count() != 1 {
        return Err(Error::Config(format!("template {template:?} must contain {placeholder} exactly once")));
    }
    check_base_url(&template.replace(placeholder, "00000000-0000-4000-8000-000000000000"))
        .map_err(|_| Error::Config(format!("template {template:?} does not expand to an absolute HTTP URL")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectReport {
    pub content_id: ContentId,
    pub package_id: RepoUri,
    pub created: Datestamp,
    pub ds_ids: Vec<RepoUri>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub tape_id: RepoUri,
    pub arc_ids: Vec<RepoUri>,
    pub objects: Vec<ObjectReport>,
    pub tape_path: PathBuf,
    pub arc_paths: Vec<PathBuf>,
    pub index_paths: Vec<PathBuf>,
}

impl IngestReport {
    /// `# tape <id>`, one `# arc <id>` per ARC file, then per object
    /// `content_id \t package_id \t ds_id,ds_id…`.
    pub fn manifest(&self) -> String {
        let mut out = format!("# tape {}\n", self.tape_id);
        for a in &self.arc_ids {
            out.push_str(&format!("# arc {a}\n"));
        }
        for o in &self.objects {
            let ds: Vec<String> = o.ds_ids.iter().map(|d| d.to_string()).collect();
            out.push_str(&format!("{}\t{}\t{}\n", o.content_id, o.package_id, ds.join(",")));
        }
        out
    }
}

/// One planned ARC file: its id and (object, datastream) positions.
struct ArcPlan {
    id: RepoUri,
    members: Vec<(usize, usize)>,
}

fn plan_arcs(objects: &[SubmissionObject], lens: &[Vec<u64>], max_arc_bytes: u64) -> Result<Vec<ArcPlan>> {
    // Header widths do not depend on the particular id or date.
    let probe_ds = RepoUri::mint(NamespaceClass::Datastream)?;
    let probe_date = Datestamp::from_unix(0);
    let mut plans: Vec<ArcPlan> = Vec::new();
    let mut size = 0;
    for (o, obj) in objects.iter().enumerate() {
        for (d, ds) in obj.datastreams.iter().enumerate() {
            let footprint = record_footprint(&probe_ds, &ds.media_type, lens[o][d], probe_date);
            let fits = plans.last().is_some_and(|p| p.members.is_empty() || size + footprint <= max_arc_bytes);
            if !fits {
                let id = RepoUri::mint(NamespaceClass::Arc)?;
                size = version_block_footprint(&format!("{}.arc", id.uuid_str()), probe_date);
                plans.push(ArcPlan { id, members: Vec::new() });
            }
            size += footprint;
            plans.last_mut().expect("pushed above").members.push((o, d));
        }
    }
    Ok(plans)
}

fn validate_batch(objects: &[SubmissionObject]) -> Result<Vec<Vec<u64>>> {
    if objects.is_empty() {
        return Err(Error::InvalidBatch("batch is empty".into()));
    }
    let mut lens = Vec::with_capacity(objects.len());
    for (i, obj) in objects.iter().enumerate() {
        let ctx = |m: String| Error::InvalidBatch(format!("object {i} ({}): {m}", obj.content_id));
        xml::check_self_contained_element(&obj.metadata).map_err(|e| ctx(format!("metadata {e}")))?;
        let mut ds_lens = Vec::with_capacity(obj.datastreams.len());
        for (d, ds) in obj.datastreams.iter().enumerate() {
            if !valid_media_type(&ds.media_type) {
                return Err(ctx(format!("datastream {d} has invalid media type {:?}", ds.media_type)));
            }
            ds_lens.push(ds.data.len().map_err(|e| ctx(e.to_string()))?);
        }
        lens.push(ds_lens);
    }
    Ok(lens)
}

/// Files written under temporary names, with their final names.
#[derive(Default)]
struct Pending {
    files: Vec<(PathBuf, PathBuf)>,
    published: Vec<PathBuf>,
}

impl Pending {
    fn temp(&mut self, final_path: &Path, tag: &str) -> PathBuf {
        let tmp = temp_path(final_path, tag);
        self.files.push((tmp.clone(), final_path.to_owned()));
        tmp
    }

    fn publish(&mut self) -> io::Result<()> {
        for (tmp, fin) in std::mem::take(&mut self.files) {
            if fin.exists() {
                self.files.push((tmp, fin.clone()));
                return Err(io::Error::new(io::ErrorKind::AlreadyExists, format!("{} already exists", fin.display())));
            }
            if let Err(e) = fs::rename(&tmp, &fin) {
                self.files.push((tmp, fin));
                return Err(e);
            }
            self.published.push(fin);
        }
        Ok(())
    }

    fn discard(&mut self) {
        for (tmp, _) in self.files.drain(..) {
            let _ = fs::remove_file(tmp);
        }
        for p in self.published.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

/// Ingest `objects` into `store` as one batch. All-or-nothing: on any
/// error no tape becomes visible and the temporaries are removed.
pub fn ingest_batch(store: &Store, objects: &[SubmissionObject], config: &IngestConfig) -> Result<IngestReport> {
    config.validate()?;
    let lens = validate_batch(objects)?;
    let plans = plan_arcs(objects, &lens, config.max_arc_bytes)?;
    let tape_id = RepoUri::mint(NamespaceClass::Tape)?;

    fs::create_dir_all(store.tapes_dir())?;
    if !plans.is_empty() {
        fs::create_dir_all(store.arcs_dir())?;
    }
    let tag = tape_id.uuid_str()[..8].to_owned();
    let mut arc_pending = Pending::default();
    let mut tape_pending = Pending::default();
    let result = write_batch(store, objects, &lens, &plans, tape_id, config, &tag, &mut arc_pending, &mut tape_pending);
    let report = match result {
        Ok(report) => report,
        Err(e) => {
            arc_pending.discard();
            tape_pending.discard();
            return Err(e);
        }
    };

    let published = arc_pending
        .publish()
        .and_then(|_| sync_dir(&store.arcs_dir().join("x")))
        .and_then(|_| tape_pending.publish())
        .and_then(|_| sync_dir(&report.tape_path));
    if let Err(e) = published {
        if tape_pending.published.last() != Some(&report.tape_path) {
            tape_pending.discard();
            arc_pending.discard();
        }
        return Err(e.into());
    }

    let entries: Vec<VersionEntry> = report
        .objects
        .iter()
        .map(|o| VersionEntry { content_id: o.content_id.clone(), package_id: o.package_id, tape_id, created: o.created })
        .collect();
    Locator::open(store.locator_path())?.register(&entries)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn write_batch(
    store: &Store,
    objects: &[SubmissionObject],
    lens: &[Vec<u64>],
    plans: &[ArcPlan],
    tape_id: RepoUri,
    config: &IngestConfig,
    tag: &str,
    arc_pending: &mut Pending,
    tape_pending: &mut Pending,
) -> Result<IngestReport> {
    let tape_path = store.tape_path(tape_id.uuid());
    let mut index_paths = Vec::new();
    let mut arc_paths = Vec::new();

    // Planned ARC for each (object, datastream).
    let mut placement: Vec<Vec<usize>> = lens.iter().map(|l| vec![0; l.len()]).collect();
    for (a, plan) in plans.iter().enumerate() {
        for &(o, d) in &plan.members {
            placement[o][d] = a;
        }
    }

    let tape_tmp = {
        let idx_id = index_path(&tape_path, ID_INDEX_SUFFIX);
        let idx_dt = index_path(&tape_path, DT_INDEX_SUFFIX);
        let a = tape_pending.temp(&idx_id, tag);
        let b = tape_pending.temp(&idx_dt, tag);
        index_paths.push(idx_id);
        index_paths.push(idx_dt);
        let t = tape_pending.temp(&tape_path, tag);
        (a, b, t)
    };
    let mut admin = TapeAdmin::new(tape_id);
    admin.arc_ids = plans.iter().map(|p| p.id).collect();
    admin.provenance = config.provenance.clone();
    let mut tape = TapeWriter::create(admin, BufWriter::with_capacity(1 << 20, create_new(&tape_tmp.2)?))?;

    let mut current: Option<(usize, ArcWriter<BufWriter<File>>)> = None;
    let mut finish_arc = |writer: ArcWriter<BufWriter<File>>, a: usize, pending: &mut Pending| -> Result<()> {
        let mut writer = writer;
        writer.seal()?;
        let arc_path = store.arc_path(plans[a].id.uuid());
        let idx = index_path(&arc_path, ID_INDEX_SUFFIX);
        let idx_tmp = temp_path(&idx, tag);
        let mut f = create_new(&idx_tmp)?;
        io::Write::write_all(&mut f, &writer.index()?.render())?;
        f.sync_all()?;
        // Index before its file, so the rename order follows.
        let arc_tmp = pending.files.pop().expect("ARC temp registered");
        pending.files.push((idx_tmp, idx.clone()));
        pending.files.push(arc_tmp);
        index_paths.push(idx);
        arc_paths.push(arc_path);
        Ok(())
    };

    let mut prev = Datestamp::from_unix(i64::MIN / 2);
    let mut reports = Vec::with_capacity(objects.len());
    for (o, obj) in objects.iter().enumerate() {
        let created = config.clock.now().max(prev);
        prev = created;
        let package_id = RepoUri::mint(NamespaceClass::Package)?;
        let mut refs = Vec::with_capacity(obj.datastreams.len());
        for (d, ds) in obj.datastreams.iter().enumerate() {
            let a = placement[o][d];
            if current.as_ref().is_none_or(|(ca, _)| *ca != a) {
                if let Some((ca, w)) = current.take() {
                    finish_arc(w, ca, arc_pending)?;
                }
                let arc_path = store.arc_path(plans[a].id.uuid());
                let tmp = temp_path(&arc_path, tag);
                arc_pending.files.push((tmp.clone(), arc_path.clone()));
                let name = arc_path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
                let sink = BufWriter::with_capacity(1 << 20, create_new(&tmp)?);
                current = Some((a, ArcWriter::create(plans[a].id, sink, &name, created)?));
            }
            let ds_id = RepoUri::mint(NamespaceClass::Datastream)?;
            let writer = &mut current.as_mut().expect("opened above").1;
            let mut reader = ds.data.open()?;
            writer.append_from(&ds_id, &ds.media_type, lens[o][d], &mut reader, created)?;
            let mut extra = [0u8; 1];
            if reader.read(&mut extra)? != 0 {
                return Err(Error::InvalidBatch(format!("datastream {d} of object {o} grew while being read")));
            }
            refs.push(DatastreamRef { ds_id, media_type: ds.media_type.clone(), openurl: make_openurl(&config.openurl_base(&plans[a].id), &ds_id)? });
        }
        let ds_ids = refs.iter().map(|r| r.ds_id).collect();
        let wrapper = make_wrapper(package_id, &obj.content_id, created, &obj.metadata, obj.datastreams.len(), refs)?;
        tape.append_record(&TapeRecord {
            admin: TapeRecordAdmin { record_id: package_id.to_string(), created, props: Vec::new() },
            payload: wrapper.to_xml(),
        })?;
        reports.push(ObjectReport { content_id: obj.content_id.clone(), package_id, created, ds_ids });
    }
    if let Some((ca, w)) = current.take() {
        finish_arc(w, ca, arc_pending)?;
    }

    tape.seal()?;
    let (by_id, by_dt) = build_tape_indexes(tape.write_log().to_vec(), tape.target()?)?;
    for (path, bytes) in [(&tape_tmp.0, by_id.render()), (&tape_tmp.1, by_dt.render())] {
        let mut f = create_new(path)?;
        io::Write::write_all(&mut f, &bytes)?;
        f.sync_all()?;
    }

    Ok(IngestReport { tape_id, arc_ids: plans.iter().map(|p| p.id).collect(), objects: reports, tape_path, arc_paths, index_paths })
}

/// Load a batch directory: one subdirectory per object, taken in name
/// order, each holding
///
/// * `content.id`: the Content Identifier (one trailing newline allowed),
/// * `metadata.xml`: one XML element, optionally preceded by an XML
///   declaration; surrounding whitespace is ignored,
/// * datastream files named `N` or `N.ext` (N a decimal ordinal, taken in
///   numeric order), each with a sidecar `N[.ext].mediatype` holding the
///   media type.
///
/// Any other entry is an error.
pub fn load_batch_dir(dir: &Path) -> Result<Vec<SubmissionObject>> {
    let bad = |m: String| Error::InvalidBatch(m);
    let mut subdirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| bad(format!("{}: {e}", dir.display())))? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            return Err(bad(format!("unexpected file {} in batch directory", entry.path().display())));
        }
        subdirs.push(entry.path());
    }
    if subdirs.is_empty() {
        return Err(bad(format!("batch directory {} holds no objects", dir.display())));
    }
    subdirs.sort();
    subdirs.iter().map(|d| load_object_dir(d)).collect()
}

fn load_object_dir(dir: &Path) -> Result<SubmissionObject> {
    let bad = |m: &str| Error::InvalidBatch(format!("{}: {m}", dir.display()));
    let mut content_id = None;
    let mut metadata = None;
    let mut streams: Vec<(u64, PathBuf)> = Vec::new();
    let mut sidecars = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().into_string().map_err(|_| bad("non-UTF-8 file name"))?;
        let path = entry.path();
        if !entry.file_type()?.is_file() {
            return Err(bad(&format!("unexpected entry {name}")));
        }
        match name.as_str() {
            "content.id" => {
                let text = fs::read_to_string(&path).map_err(|_| bad("content.id is not UTF-8 text"))?;
                let text = text.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(&text);
                content_id = Some(ContentId::new(text)?);
            }
            "metadata.xml" => metadata = Some(strip_prolog(&fs::read(&path)?).to_vec()),
            _ if name.ends_with(".mediatype") => sidecars.push(name),
            _ => {
                let ordinal = name.split_once('.').map_or(name.as_str(), |(n, _)| n);
                if ordinal.is_empty() || !ordinal.bytes().all(|b| b.is_ascii_digit()) || ordinal.len() > 18 {
                    return Err(bad(&format!("unexpected file {name}")));
                }
                let n: u64 = ordinal.parse().expect("digits");
                if streams.iter().any(|(m, _)| *m == n) {
                    return Err(bad(&format!("datastream ordinal {n} used twice")));
                }
                streams.push((n, path));
            }
        }
    }
    streams.sort();
    for sidecar in &sidecars {
        let owner = sidecar.strip_suffix(".mediatype").expect("suffix checked");
        if !streams.iter().any(|(_, p)| p.file_name().is_some_and(|f| f == owner)) {
            return Err(bad(&format!("sidecar {sidecar} has no datastream")));
        }
    }
    let datastreams = streams
        .into_iter()
        .map(|(_, path)| {
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".mediatype");
            let media_type = fs::read_to_string(&sidecar).map_err(|_| bad(&format!("missing {}", Path::new(&sidecar).display())))?;
            Ok(Datastream { data: DatastreamData::File(path), media_type: media_type.trim().to_owned() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubmissionObject {
        content_id: content_id.ok_or_else(|| bad("missing content.id"))?,
        metadata: metadata.ok_or_else(|| bad("missing metadata.xml"))?,
        datastreams,
    })
}

fn strip_prolog(bytes: &[u8]) -> &[u8] {
    let mut b = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    if b.starts_with(b"<?xml") {
        if let Some(end) = b.windows(2).position(|w| w == b"?>") {
            b = &b[end + 2..];
        }
    }
    b.trim_ascii()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(n: usize, sizes: &[usize]) -> SubmissionObject {
        SubmissionObject {
            content_id: ContentId::new(format!("info:test/{n}")).unwrap(),
            metadata: format!("<m:meta xmlns:m=\"urn:m\"><m:n>{n}</m:n></m:meta>").into_bytes(),
            datastreams: sizes
                .iter()
                .map(|s| Datastream { data: DatastreamData::Bytes(vec![b'a'; *s]), media_type: "application/octet-stream".into() })
                .collect(),
        }
    }

    #[test]
    fn rollover_plan() {
        const MIB: usize = 1 << 20;
        let objects: Vec<_> = (0..3).map(|i| obj(i, &[40 * MIB])).collect();
        let lens = validate_batch(&objects).unwrap();
        let plans = plan_arcs(&objects, &lens, 100 << 20).unwrap();
        assert_eq!(plans.iter().map(|p| p.members.len()).collect::<Vec<_>>(), [2, 1]);

        // An oversized datastream gets a file of its own.
        let objects = vec![obj(0, &[10, 500, 10])];
        let lens = validate_batch(&objects).unwrap();
        let plans = plan_arcs(&objects, &lens, 300).unwrap();
        assert_eq!(plans.iter().map(|p| p.members.len()).collect::<Vec<_>>(), [1, 1, 1]);

        let objects = vec![obj(0, &[])];
        assert!(plan_arcs(&objects, &validate_batch(&objects).unwrap(), 10).unwrap().is_empty());
    }

    #[test]
    fn batch_validation() {
        assert!(matches!(validate_batch(&[]), Err(Error::InvalidBatch(_))));
        let mut o = obj(0, &[1]);
        o.metadata = b"<unqualified/>".to_vec();
        assert!(validate_batch(&[o]).is_err());
        let mut o = obj(0, &[1]);
        o.datastreams[0].media_type = String::new();
        assert!(validate_batch(&[o]).is_err());
        let mut o = obj(0, &[]);
        o.datastreams.push(Datastream { data: DatastreamData::File("/nonexistent/x".into()), media_type: "a/b".into() });
        assert!(validate_batch(&[o]).is_err());
    }

    #[test]
    fn templates() {
        assert!(check_template("http://h/oai/{tape}", "{tape}").is_ok());
        assert!(check_template("http://h/oai/", "{tape}").is_err());
        assert!(check_template("http://h/{tape}/{tape}", "{tape}").is_err());
        assert!(check_template("/oai/{tape}", "{tape}").is_err());
    }

    #[test]
    fn stepping_clock() {
        let c = SteppingClock::new(Datestamp::from_unix(10), 2);
        assert_eq!([c.now(), c.now()], [Datestamp::from_unix(10), Datestamp::from_unix(12)]);
    }

    #[test]
    fn prolog_stripping() {
        assert_eq!(strip_prolog(b"\xEF\xBB\xBF<?xml version=\"1.0\"?>\n  <a/>\n"), b"<a/>");
        assert_eq!(strip_prolog(b"<a/>"), b"<a/>");
    }
}
