//! XMLtapes: one well-formed XML document concatenating many records.
//!
//! Serialization is fixed byte for byte:
//!
//! ```text
//! <?xml version="1.0" encoding="UTF-8"?>\n
//! <tape xmlns="urn:xmltape:1.0">\n
//! <tapeAdmin><tapeId>…</tapeId><arcId>…</arcId>…<prop name="…" value="…"/>…</tapeAdmin>\n
//! <tapeRecord xmlns="urn:xmltape:1.0"><recordAdmin><identifier>…</identifier><date>…</date><prop …/>…</recordAdmin><record>PAYLOAD</record></tapeRecord>\n
//! …
//! </tape>\n
//! ```
//!
//! Each `tapeRecord` redeclares the tape namespace and every payload carries
//! its own declarations, so the bytes of a record extent parse on their own.
//! Records written here also carry a `xmltape:sha256` property digesting the
//! record's admin fields and payload.

use std::collections::HashSet;
use std::io::{Read, Seek, SeekFrom, Write};

use sha2::{Digest, Sha256};

use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::extent::ByteExtent;
use crate::ids::{NamespaceClass, RepoUri};
use crate::index::{valid_key, IndexEntry, TargetInfo};
use crate::io::{source_len, ByteSink, HashingReader, HashingWriter};
use crate::xml::{self, escape_attr, escape_text, Event, Token, XmlError, XmlPull};

pub const TAPE_NS: &str = "urn:xmltape:1.0";
const PROLOG: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
const DIGEST_PROP: &str = "xmltape:sha256";
const DIGEST_POLICY_PROP: &str = "xmltape:recordDigest";
const RESERVED_PREFIX: &str = "xmltape:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeAdmin {
    pub tape_id: RepoUri,
    pub arc_ids: Vec<RepoUri>,
    /// Free-form provenance, e.g. processing software or batch origin.
    pub provenance: Vec<(String, String)>,
}

impl TapeAdmin {
    pub fn new(tape_id: RepoUri) -> TapeAdmin {
        TapeAdmin { tape_id, arc_ids: Vec::new(), provenance: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeRecordAdmin {
    pub record_id: String,
    pub created: Datestamp,
    pub props: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeRecord {
    pub admin: TapeRecordAdmin,
    /// One namespace-qualified element, byte for byte.
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapeSummary {
    pub tape_id: RepoUri,
    pub record_count: u64,
    pub byte_size: u64,
    pub sha256: String,
}

fn check_props(props: &[(String, String)]) -> Result<()> {
    for (name, _) in props {
        if name.is_empty() || name.starts_with(RESERVED_PREFIX) {
            return Err(Error::payload(format!("property name {name:?} is empty or reserved")));
        }
    }
    Ok(())
}

fn write_props(out: &mut String, props: &[(String, String)]) {
    for (name, value) in props {
        out.push_str(&format!("<prop name=\"{}\" value=\"{}\"/>", escape_attr(name), escape_attr(value)));
    }
}

/// Digest over identifier, date, user properties and payload, each
/// length-prefixed.
fn record_digest(admin: &TapeRecordAdmin, payload: &[u8]) -> String {
    let mut h = Sha256::new();
    let mut field = |b: &[u8]| {
        h.update((b.len() as u64).to_be_bytes());
        h.update(b);
    };
    field(admin.record_id.as_bytes());
    field(admin.created.to_string().as_bytes());
    for (n, v) in &admin.props {
        field(n.as_bytes());
        field(v.as_bytes());
    }
    field(payload);
    hex::encode(h.finalize())
}

/// Serialize one record container, without the trailing newline.
pub fn serialize_record(record: &TapeRecord) -> Vec<u8> {
    let admin = &record.admin;
    let mut head = String::with_capacity(256);
    head.push_str("<tapeRecord xmlns=\"");
    head.push_str(TAPE_NS);
    head.push_str("\"><recordAdmin><identifier>");
    head.push_str(&escape_text(&admin.record_id));
    head.push_str("</identifier><date>");
    head.push_str(&admin.created.to_string());
    head.push_str("</date>");
    write_props(&mut head, &admin.props);
    write_props(&mut head, &[(DIGEST_PROP.to_owned(), record_digest(admin, &record.payload))]);
    head.push_str("</recordAdmin><record>");
    let mut out = Vec::with_capacity(head.len() + record.payload.len() + 24);
    out.extend_from_slice(head.as_bytes());
    out.extend_from_slice(&record.payload);
    out.extend_from_slice(b"</record></tapeRecord>");
    out
}

pub struct TapeWriter<W: ByteSink> {
    admin: TapeAdmin,
    sink: HashingWriter<W>,
    ids: HashSet<String>,
    log: Vec<IndexEntry>,
    sealed: bool,
}

impl<W: ByteSink> TapeWriter<W> {
    /// Write the prolog, root start tag and tape-level admin section.
    pub fn create(admin: TapeAdmin, mut sink: W) -> Result<TapeWriter<W>> {
        if admin.tape_id.class() != NamespaceClass::Tape {
            return Err(Error::WrongClass { expected: NamespaceClass::Tape, found: admin.tape_id.to_string() });
        }
        if let Some(a) = admin.arc_ids.iter().find(|a| a.class() != NamespaceClass::Arc) {
            return Err(Error::WrongClass { expected: NamespaceClass::Arc, found: a.to_string() });
        }
        check_props(&admin.provenance)?;
        if sink.existing_len()? != 0 {
            return Err(Error::WriteOnceViolation("tape destination is not empty".into()));
        }
        let mut head = String::from(PROLOG);
        head.push_str(&format!("<tape xmlns=\"{TAPE_NS}\">\n<tapeAdmin><tapeId>{}</tapeId>", admin.tape_id));
        for arc in &admin.arc_ids {
            head.push_str(&format!("<arcId>{arc}</arcId>"));
        }
        write_props(&mut head, &admin.provenance);
        write_props(&mut head, &[(DIGEST_POLICY_PROP.to_owned(), "sha256".to_owned())]);
        head.push_str("</tapeAdmin>\n");
        let mut sink = HashingWriter::new(sink);
        sink.write_all(head.as_bytes())?;
        Ok(TapeWriter { admin, sink, ids: HashSet::new(), log: Vec::new(), sealed: false })
    }

    pub fn admin(&self) -> &TapeAdmin {
        &self.admin
    }

    /// Bytes written so far.
    pub fn position(&self) -> u64 {
        self.sink.written()
    }

    pub fn append_record(&mut self, record: &TapeRecord) -> Result<ByteExtent> {
        if self.sealed {
            return Err(Error::Sealed);
        }
        let id = &record.admin.record_id;
        if !valid_key(id) {
            return Err(Error::payload(format!("record identifier {id:?} is empty or contains control characters")));
        }
        check_props(&record.admin.props)?;
        if self.ids.contains(id) {
            return Err(Error::DuplicateKey(id.clone()));
        }
        xml::check_self_contained_element(&record.payload).map_err(|e| Error::payload(format!("payload {e}")))?;

        let bytes = serialize_record(record);
        let offset = self.position();
        self.sink.write_all(&bytes)?;
        self.sink.write_all(b"\n")?;
        let extent = ByteExtent::new(offset, bytes.len() as u64);
        self.log.push(IndexEntry { key: id.clone(), extent, datestamp: record.admin.created, ordinal: self.log.len() as u64 });
        self.ids.insert(id.clone());
        Ok(extent)
    }

    pub fn seal(&mut self) -> Result<TapeSummary> {
        if self.sealed {
            return Err(Error::Sealed);
        }
        self.sink.write_all(b"</tape>\n")?;
        self.sink.get_mut().sync()?;
        self.sealed = true;
        Ok(TapeSummary {
            tape_id: self.admin.tape_id,
            record_count: self.log.len() as u64,
            byte_size: self.sink.written(),
            sha256: self.sink.hex_digest(),
        })
    }

    /// Index entries captured at write time, in file order.
    pub fn write_log(&self) -> &[IndexEntry] {
        &self.log
    }

    pub fn target(&self) -> Result<TargetInfo> {
        if !self.sealed {
            return Err(Error::payload("tape target requested before seal"));
        }
        Ok(TargetInfo { size: self.sink.written(), sha256: self.sink.hex_digest() })
    }

    pub fn into_sink(self) -> W {
        self.sink.into_inner()
    }
}

/// Outcome of parsing one record container.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecord {
    pub record: TapeRecord,
    /// Whether the record carried a (verified) digest property.
    pub digest_verified: bool,
}

/// Parse the exact bytes of one `tapeRecord` element. `base` is the
/// absolute offset of `bytes[0]`, used in errors.
pub fn parse_record_container(bytes: &[u8], base: u64) -> Result<ParsedRecord> {
    let corrupt = |offset: u64, message: String| Error::CorruptExtent { offset, message };
    if !bytes.starts_with(b"<tapeRecord") || !bytes.ends_with(b"</tapeRecord>") {
        return Err(corrupt(base, "extent does not span exactly one tapeRecord element".into()));
    }
    let mut p = XmlPull::with_base(bytes, base);
    let xml_err = |e: XmlError| corrupt(e.offset, e.message);
    let next = |p: &mut XmlPull<&[u8]>| -> Result<Token> {
        loop {
            match p.next_token().map_err(xml_err)? {
                Some(t) if t.is_whitespace() || t.event == Event::Comment => continue,
                Some(t) => return Ok(t),
                None => return Err(corrupt(base + bytes.len() as u64, "unexpected end of record".into())),
            }
        }
    };

    let t = next(&mut p)?;
    expect_start(&t, "tapeRecord").map_err(|m| corrupt(t.start, m))?;
    let t = next(&mut p)?;
    expect_start(&t, "recordAdmin").map_err(|m| corrupt(t.start, m))?;

    let mut record_id = None;
    let mut created = None;
    let mut props = Vec::new();
    let mut digest = None;
    loop {
        let t = next(&mut p)?;
        match &t.event {
            Event::End { name } if xml::local_name(name) == "recordAdmin" => break,
            Event::Start { name, attributes, empty, namespace, .. } if namespace.as_deref() == Some(TAPE_NS) => {
                match (xml::local_name(name), *empty) {
                    ("identifier", false) if record_id.is_none() && created.is_none() => {
                        record_id = Some(text_content(&mut p, base, bytes.len())?);
                    }
                    ("date", false) if created.is_none() && record_id.is_some() => {
                        let text = text_content(&mut p, base, bytes.len())?;
                        created = Some(Datestamp::parse_iso(&text).map_err(|_| corrupt(t.start, format!("malformed date {text:?}")))?);
                    }
                    ("prop", true) if created.is_some() => {
                        let (n, v) = prop_attrs(attributes).map_err(|m| corrupt(t.start, m))?;
                        if n == DIGEST_PROP {
                            digest = Some(v);
                        } else {
                            props.push((n, v));
                        }
                    }
                    _ => return Err(corrupt(t.start, format!("unexpected element {name} in recordAdmin"))),
                }
            }
            _ => return Err(corrupt(t.start, "unexpected content in recordAdmin".into())),
        }
    }
    let record_id = record_id.ok_or_else(|| corrupt(base, "missing mandatory admin element identifier".into()))?;
    let created = created.ok_or_else(|| corrupt(base, "missing mandatory admin element date".into()))?;

    let t = next(&mut p)?;
    expect_start(&t, "record").map_err(|m| corrupt(t.start, m))?;
    let first = next(&mut p)?;
    let payload_start = first.start;
    let payload_end = match &first.event {
        Event::Start { empty: true, .. } => first.end,
        Event::Start { .. } => {
            let depth = p.depth();
            loop {
                let t = p.next_token().map_err(xml_err)?.ok_or_else(|| corrupt(base, "unterminated payload".into()))?;
                if matches!(t.event, Event::End { .. }) && p.depth() == depth - 1 {
                    break t.end;
                }
            }
        }
        _ => return Err(corrupt(first.start, "record must contain exactly one element".into())),
    };
    let t = next(&mut p)?;
    if !matches!(&t.event, Event::End { name } if xml::local_name(name) == "record") {
        return Err(corrupt(t.start, "record must contain exactly one element".into()));
    }
    let t = next(&mut p)?;
    if !matches!(&t.event, Event::End { name } if xml::local_name(name) == "tapeRecord") {
        return Err(corrupt(t.start, "unexpected content after record".into()));
    }
    if p.next_token().map_err(xml_err)?.is_some() {
        return Err(corrupt(p.position(), "trailing content after tapeRecord".into()));
    }

    let payload = bytes[(payload_start - base) as usize..(payload_end - base) as usize].to_vec();
    xml::check_self_contained_element(&payload).map_err(|e| corrupt(payload_start + e.offset, format!("payload {}", e.message)))?;
    let admin = TapeRecordAdmin { record_id, created, props };
    let digest_verified = match digest {
        Some(d) => {
            if d != record_digest(&admin, &payload) {
                return Err(Error::CorruptRecord { offset: base, message: "record digest mismatch".into() });
            }
            true
        }
        None => false,
    };
    Ok(ParsedRecord { record: TapeRecord { admin, payload }, digest_verified })
}

fn expect_start(t: &Token, local: &str) -> std::result::Result<(), String> {
    match &t.event {
        Event::Start { name, namespace, empty: false, .. } if xml::local_name(name) == local && namespace.as_deref() == Some(TAPE_NS) => Ok(()),
        _ => Err(format!("expected <{local}> in namespace {TAPE_NS}")),
    }
}

fn prop_attrs(attributes: &[xml::Attribute]) -> std::result::Result<(String, String), String> {
    let get = |k: &str| attributes.iter().find(|a| a.name == k).map(|a| a.value.clone());
    match (get("name"), get("value"), attributes.len()) {
        (Some(n), Some(v), 2) => Ok((n, v)),
        _ => Err("prop requires exactly the name and value attributes".into()),
    }
}

/// Collect character data up to the end tag of the current element.
fn text_content<R: Read>(p: &mut XmlPull<R>, base: u64, len: usize) -> Result<String> {
    let mut out = String::new();
    loop {
        let t = p
            .next_token()
            .map_err(|e| Error::CorruptExtent { offset: e.offset, message: e.message })?
            .ok_or(Error::CorruptExtent { offset: base + len as u64, message: "unexpected end of input".into() })?;
        match t.event {
            Event::Text(s) | Event::CData(s) => out.push_str(&s),
            Event::Comment => {}
            Event::End { .. } => return Ok(out),
            _ => return Err(Error::CorruptExtent { offset: t.start, message: "unexpected markup in text element".into() }),
        }
    }
}

/// Seek to `extent` and parse exactly those bytes as a record container.
pub fn read_record_at<S: Read + Seek>(source: &mut S, extent: ByteExtent) -> Result<TapeRecord> {
    let size = source_len(source)?;
    if !extent.fits(size) {
        return Err(Error::OutOfBounds { offset: extent.offset, length: extent.length, size });
    }
    source.seek(SeekFrom::Start(extent.offset))?;
    let mut bytes = vec![0u8; extent.length as usize];
    source.read_exact(&mut bytes)?;
    Ok(parse_record_container(&bytes, extent.offset)?.record)
}

#[derive(Debug, Clone)]
pub struct TapeScan {
    pub admin: TapeAdmin,
    /// Whether the tape declares that every record carries a digest.
    pub digests_required: bool,
    pub records: Vec<(TapeRecordAdmin, ByteExtent)>,
    pub target: TargetInfo,
}

impl TapeScan {
    pub fn index_entries(&self) -> Vec<IndexEntry> {
        self.records
            .iter()
            .enumerate()
            .map(|(i, (a, e))| IndexEntry { key: a.record_id.clone(), extent: *e, datestamp: a.created, ordinal: i as u64 })
            .collect()
    }
}

/// Stream through a sealed tape, recovering every record's admin fields and
/// byte-exact extent directly from the encoded bytes.
pub fn scan_tape<R: Read>(source: R) -> Result<TapeScan> {
    let mut p = XmlPull::new(HashingReader::new(source));
    let mut records: Vec<(TapeRecordAdmin, ByteExtent)> = Vec::new();
    let ordinal = |records: &Vec<_>| Some(records.len() as u64);
    let scan_err = |e: XmlError, o: Option<u64>| Error::scan(e.offset, o, e.message);

    // Prolog up to the root start tag.
    let root = loop {
        let t = p.next_token().map_err(|e| scan_err(e, None))?.ok_or_else(|| Error::scan(0, None, "empty tape"))?;
        match &t.event {
            Event::Declaration | Event::Comment | Event::ProcessingInstruction => {}
            Event::Text(_) => {}
            Event::Start { .. } => break t,
            _ => return Err(Error::scan(t.start, None, "unexpected content before root")),
        }
    };
    expect_start(&root, "tape").map_err(|m| Error::scan(root.start, None, m))?;

    let mut admin = None;
    let mut digests_required = false;
    let mut sealed = false;
    while let Some(t) = p.next_token().map_err(|e| scan_err(e, ordinal(&records)))? {
        if t.is_whitespace() || t.event == Event::Comment {
            continue;
        }
        match &t.event {
            Event::Start { name, .. } if admin.is_none() => {
                if xml::local_name(name) != "tapeAdmin" {
                    return Err(Error::scan(t.start, None, "tape must start with tapeAdmin"));
                }
                expect_start(&t, "tapeAdmin").map_err(|m| Error::scan(t.start, None, m))?;
                let (a, d) = scan_tape_admin(&mut p)?;
                admin = Some(a);
                digests_required = d;
            }
            Event::Start { .. } => {
                let o = ordinal(&records);
                expect_start(&t, "tapeRecord").map_err(|m| Error::scan(t.start, o, m))?;
                let rec_admin = scan_record(&mut p, t.start, o)?;
                let end = p.position();
                records.push((rec_admin, ByteExtent::new(t.start, end - t.start)));
            }
            Event::End { .. } if p.depth() == 0 => {
                if admin.is_none() {
                    return Err(Error::scan(t.start, None, "missing tapeAdmin"));
                }
                sealed = true;
            }
            _ => return Err(Error::scan(t.start, ordinal(&records), "unexpected content in tape")),
        }
    }
    if !sealed {
        return Err(Error::scan(p.position(), ordinal(&records), "tape is not sealed"));
    }
    let admin = admin.expect("checked above");
    let (size, sha256) = p_into_digest(p)?;
    Ok(TapeScan { admin, digests_required, records, target: TargetInfo { size, sha256 } })
}

fn p_into_digest<R: Read>(p: XmlPull<HashingReader<R>>) -> Result<(u64, String)> {
    Ok(p.into_inner().finish()?)
}

/// Read only the tape-level admin section from the start of a tape.
pub fn read_tape_admin<R: Read>(source: R) -> Result<TapeAdmin> {
    let mut p = XmlPull::new(source);
    loop {
        let t = p.next_token().map_err(|e| Error::scan(e.offset, None, e.message))?.ok_or_else(|| Error::scan(0, None, "empty tape"))?;
        if let Event::Start { name, .. } = &t.event {
            if p.depth() == 2 && xml::local_name(name) == "tapeAdmin" {
                expect_start(&t, "tapeAdmin").map_err(|m| Error::scan(t.start, None, m))?;
                return Ok(scan_tape_admin(&mut p)?.0);
            }
            if p.depth() != 1 {
                return Err(Error::scan(t.start, None, "tape must start with tapeAdmin"));
            }
            expect_start(&t, "tape").map_err(|m| Error::scan(t.start, None, m))?;
        }
    }
}

fn scan_tape_admin<R: Read>(p: &mut XmlPull<R>) -> Result<(TapeAdmin, bool)> {
    let mut tape_id = None;
    let mut arc_ids = Vec::new();
    let mut provenance = Vec::new();
    let mut digests = false;
    loop {
        let t = p
            .next_token()
            .map_err(|e| Error::scan(e.offset, None, e.message))?
            .ok_or_else(|| Error::scan(p.position(), None, "unterminated tapeAdmin"))?;
        if t.is_whitespace() || t.event == Event::Comment {
            continue;
        }
        let bad = |m: String| Error::scan(t.start, None, m);
        match &t.event {
            Event::End { .. } => break,
            Event::Start { name, attributes, empty, namespace, .. } if namespace.as_deref() == Some(TAPE_NS) => match (xml::local_name(name), *empty)
            {
                ("tapeId", false) if tape_id.is_none() => {
                    let text = text_content(p, 0, 0).map_err(|e| bad(e.to_string()))?;
                    tape_id = Some(RepoUri::parse_class(&text, NamespaceClass::Tape).map_err(|e| bad(e.to_string()))?);
                }
                ("arcId", false) if tape_id.is_some() => {
                    let text = text_content(p, 0, 0).map_err(|e| bad(e.to_string()))?;
                    arc_ids.push(RepoUri::parse_class(&text, NamespaceClass::Arc).map_err(|e| bad(e.to_string()))?);
                }
                ("prop", true) if tape_id.is_some() => {
                    let (n, v) = prop_attrs(attributes).map_err(bad)?;
                    if n == DIGEST_POLICY_PROP {
                        if v != "sha256" {
                            return Err(bad(format!("unsupported record digest {v:?}")));
                        }
                        digests = true;
                    } else {
                        provenance.push((n, v));
                    }
                }
                _ => return Err(bad(format!("unexpected element {name} in tapeAdmin"))),
            },
            _ => return Err(bad("unexpected content in tapeAdmin".into())),
        }
    }
    let tape_id = tape_id.ok_or_else(|| Error::scan(p.position(), None, "tapeAdmin lacks tapeId"))?;
    Ok((TapeAdmin { tape_id, arc_ids, provenance }, digests))
}

/// Consume one record after its start tag, returning its admin fields.
fn scan_record<R: Read>(p: &mut XmlPull<R>, start: u64, ordinal: Option<u64>) -> Result<TapeRecordAdmin> {
    let err = |offset: u64, m: String| Error::scan(offset, ordinal, m);
    let next = |p: &mut XmlPull<R>| -> Result<Token> {
        loop {
            match p.next_token().map_err(|e| err(e.offset, e.message))? {
                Some(t) if t.is_whitespace() || t.event == Event::Comment => continue,
                Some(t) => return Ok(t),
                None => return Err(err(start, "unterminated tapeRecord".into())),
            }
        }
    };
    let t = next(p)?;
    expect_start(&t, "recordAdmin").map_err(|m| err(t.start, m))?;
    let mut record_id = None;
    let mut created = None;
    let mut props = Vec::new();
    loop {
        let t = next(p)?;
        match &t.event {
            Event::End { .. } => break,
            Event::Start { name, attributes, empty, namespace, .. } if namespace.as_deref() == Some(TAPE_NS) => match (xml::local_name(name), *empty)
            {
                ("identifier", false) if record_id.is_none() => {
                    record_id = Some(text_content(p, 0, 0).map_err(|e| err(t.start, e.to_string()))?);
                }
                ("date", false) if created.is_none() && record_id.is_some() => {
                    let text = text_content(p, 0, 0).map_err(|e| err(t.start, e.to_string()))?;
                    created = Some(Datestamp::parse_iso(&text).map_err(|_| err(t.start, format!("malformed date {text:?}")))?);
                }
                ("prop", true) if created.is_some() => {
                    let (n, v) = prop_attrs(attributes).map_err(|m| err(t.start, m))?;
                    if n != DIGEST_PROP {
                        props.push((n, v));
                    }
                }
                _ => return Err(err(t.start, format!("unexpected element {name} in recordAdmin"))),
            },
            _ => return Err(err(t.start, "unexpected content in recordAdmin".into())),
        }
    }
    let record_id = record_id.ok_or_else(|| err(start, "missing mandatory admin element identifier".into()))?;
    let created = created.ok_or_else(|| err(start, "missing mandatory admin element date".into()))?;
    if !valid_key(&record_id) {
        return Err(err(start, format!("record identifier {record_id:?} cannot be indexed")));
    }

    let t = next(p)?;
    expect_start(&t, "record").map_err(|m| err(t.start, m))?;
    let depth = p.depth();
    let mut elements = 0;
    loop {
        let t = p.next_token().map_err(|e| err(e.offset, e.message))?.ok_or_else(|| err(start, "unterminated record".into()))?;
        if p.depth() < depth {
            break;
        }
        if p.depth() == depth {
            match &t.event {
                Event::Start { .. } | Event::End { .. } => {
                    if matches!(t.event, Event::Start { .. }) {
                        elements += 1;
                    }
                }
                Event::Comment | Event::ProcessingInstruction => {}
                e if t.is_whitespace() => {
                    let _ = e;
                }
                _ => return Err(err(t.start, "character data directly inside record".into())),
            }
        } else if p.depth() == depth + 1 && matches!(t.event, Event::Start { .. }) && elements == 0 {
            elements += 1;
        }
    }
    if elements != 1 {
        return Err(err(start, format!("record must contain exactly one element, found {elements}")));
    }
    let t = next(p)?;
    if !matches!(t.event, Event::End { .. }) {
        return Err(err(t.start, "unexpected content after record".into()));
    }
    Ok(TapeRecordAdmin { record_id, created, props })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    /// Record ordinal the finding concerns, if any.
    pub ordinal: Option<u64>,
    pub message: String,
}

impl Finding {
    fn tape(message: impl Into<String>) -> Finding {
        Finding { ordinal: None, message: message.into() }
    }

    fn record(ordinal: u64, message: impl Into<String>) -> Finding {
        Finding { ordinal: Some(ordinal), message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Record count from the independent full parse, when it succeeded.
    pub census: Option<u64>,
    /// Record count from the streaming scan, when it succeeded.
    pub scanned: Option<u64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Check a complete tape: an independent full-document parse for
/// well-formedness and structure, the streaming scan, their agreement, and
/// every record extent reparsed on its own.
pub fn validate_tape(bytes: &[u8]) -> ValidationReport {
    let mut report = ValidationReport::default();

    let tree_records = match full_parse_census(bytes) {
        Ok((records, findings)) => {
            report.census = Some(records.len() as u64);
            report.findings.extend(findings);
            Some(records)
        }
        Err(f) => {
            report.findings.push(f);
            None
        }
    };

    let scan = match scan_tape(bytes) {
        Ok(scan) => scan,
        Err(Error::Scan { offset, ordinal, message }) => {
            report.findings.push(Finding { ordinal, message: format!("scan failed at byte {offset}: {message}") });
            return report;
        }
        Err(e) => {
            report.findings.push(Finding::tape(format!("scan failed: {e}")));
            return report;
        }
    };
    report.scanned = Some(scan.records.len() as u64);

    if let Some(tree) = &tree_records {
        if tree.len() != scan.records.len() {
            report.findings.push(Finding::tape(format!("full parse found {} records, scan found {}", tree.len(), scan.records.len())));
        } else {
            for (i, ((id, date), (admin, _))) in tree.iter().zip(&scan.records).enumerate() {
                if id.as_deref() != Some(admin.record_id.as_str()) || date.as_deref() != Some(admin.created.to_string().as_str()) {
                    report.findings.push(Finding::record(i as u64, "full parse and scan disagree on admin fields"));
                }
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, (admin, extent)) in scan.records.iter().enumerate() {
        let i = i as u64;
        if !seen.insert(admin.record_id.as_str()) {
            report.findings.push(Finding::record(i, format!("duplicate identifier {}", admin.record_id)));
        }
        let slice = &bytes[extent.offset as usize..extent.end() as usize];
        match parse_record_container(slice, extent.offset) {
            Ok(parsed) => {
                if scan.digests_required && !parsed.digest_verified {
                    report.findings.push(Finding::record(i, "missing record digest"));
                }
            }
            Err(e) => report.findings.push(Finding::record(i, e.to_string())),
        }
    }
    report
}

/// Parse with roxmltree (never used by the write or scan paths) and take a
/// census of records: (identifier, date) text per record.
#[allow(clippy::type_complexity)]
fn full_parse_census(bytes: &[u8]) -> std::result::Result<(Vec<(Option<String>, Option<String>)>, Vec<Finding>), Finding> {
    let text = std::str::from_utf8(bytes).map_err(|e| Finding::tape(format!("not well-formed: invalid UTF-8 at byte {}", e.valid_up_to())))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| Finding::tape(format!("not well-formed: {e}")))?;
    let mut findings = Vec::new();
    let root = doc.root_element();
    let is = |n: &roxmltree::Node, local: &str| n.is_element() && n.tag_name().name() == local && n.tag_name().namespace() == Some(TAPE_NS);
    if !is(&root, "tape") {
        return Err(Finding::tape(format!("root element is not {{{TAPE_NS}}}tape")));
    }
    let mut children = root.children().filter(|n| n.is_element());
    match children.next() {
        Some(a) if is(&a, "tapeAdmin") => {
            let ids: Vec<_> = a.children().filter(|n| is(n, "tapeId")).collect();
            if ids.len() != 1 {
                findings.push(Finding::tape("tapeAdmin must contain exactly one tapeId"));
            }
        }
        _ => findings.push(Finding::tape("tape must start with tapeAdmin")),
    }
    let mut records = Vec::new();
    for (i, rec) in children.enumerate() {
        let i = i as u64;
        if !is(&rec, "tapeRecord") {
            findings.push(Finding::record(i, format!("unexpected element {}", rec.tag_name().name())));
            continue;
        }
        let admin = rec.children().find(|n| is(n, "recordAdmin"));
        let field = |local: &str| admin.and_then(|a| a.children().find(|n| is(n, local))).map(|n| n.text().unwrap_or_default().to_owned());
        let id = field("identifier");
        let date = field("date");
        if admin.is_none() {
            findings.push(Finding::record(i, "missing recordAdmin"));
        }
        if id.as_deref().is_none_or(str::is_empty) {
            findings.push(Finding::record(i, "missing mandatory admin element identifier"));
        }
        match &date {
            None => findings.push(Finding::record(i, "missing mandatory admin element date")),
            Some(d) if Datestamp::parse_iso(d).is_err() => findings.push(Finding::record(i, format!("malformed date {d:?}"))),
            _ => {}
        }
        match rec.children().find(|n| is(n, "record")) {
            Some(r) if r.children().filter(|n| n.is_element()).count() == 1 => {}
            _ => findings.push(Finding::record(i, "record must contain exactly one element")),
        }
        records.push((id, date));
    }
    Ok((records, findings))
}
