//! Internet Archive ARC v1 files holding constituent datastreams.
//!
//! Layout:
//!
//! ```text
//! filedesc://<name> 0.0.0.0 <date14> text/plain <len>\n
//! 1 0 XMLtapeARC\n
//! URL IP-address Archive-date Content-type Archive-length\n
//! \n
//! <ds-uri> 0.0.0.0 <date14> <content-type> <length>\n
//! <length bytes>\n
//! ...
//! ```
//!
//! Every record, the version block included, is followed by exactly one
//! newline. Extents cover the header line and the data block, never the
//! separator.

use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};

use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::extent::ByteExtent;
use crate::ids::{NamespaceClass, RepoUri};
use crate::index::{IdIndex, IndexEntry, TargetInfo};
use crate::io::{source_len, ByteSink, HashingReader, HashingWriter};

/// IP field for locally ingested content; there is no acquisition host.
pub const LOCAL_IP: &str = "0.0.0.0";
pub const VERSION_LINE: &str = "1 0 XMLtapeARC";
pub const FIELD_LINE: &str = "URL IP-address Archive-date Content-type Archive-length";
const MAX_HEADER_LINE: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcRecordHeader {
    pub url: String,
    pub ip: String,
    pub archive_date: Datestamp,
    pub content_type: String,
    pub length: u64,
}

impl ArcRecordHeader {
    pub fn to_line(&self) -> String {
        format!("{} {} {} {} {}\n", self.url, self.ip, self.archive_date.to_arc(), self.content_type, self.length)
    }

    /// Parse one header line (without its trailing newline).
    pub fn parse_line(line: &[u8]) -> std::result::Result<ArcRecordHeader, String> {
        let line = std::str::from_utf8(line).map_err(|_| "header line is not ASCII".to_owned())?;
        if !line.is_ascii() {
            return Err("header line is not ASCII".into());
        }
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 5 || fields.iter().any(|f| f.is_empty()) {
            return Err(format!("expected 5 space-separated fields, found {:?}", line));
        }
        if !is_dotted_quad(fields[1]) {
            return Err(format!("malformed IP address {:?}", fields[1]));
        }
        let archive_date = Datestamp::parse_arc(fields[2]).map_err(|e| e.to_string())?;
        if !fields[4].bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("malformed length {:?}", fields[4]));
        }
        let length = fields[4].parse::<u64>().map_err(|_| format!("malformed length {:?}", fields[4]))?;
        Ok(ArcRecordHeader { url: fields[0].to_owned(), ip: fields[1].to_owned(), archive_date, content_type: fields[3].to_owned(), length })
    }

    pub fn is_version_block(&self) -> bool {
        self.url.starts_with("filedesc://")
    }

    /// The datastream identifier in the URL field of a data record.
    pub fn datastream_id(&self) -> std::result::Result<RepoUri, String> {
        RepoUri::parse_class(&self.url, NamespaceClass::Datastream).map_err(|e| e.to_string())
    }
}

fn is_dotted_quad(s: &str) -> bool {
    let parts: Vec<&str> = s.split('.').collect();
    parts.len() == 4
        && parts.iter().all(|p| !p.is_empty() && p.len() <= 3 && p.bytes().all(|b| b.is_ascii_digit()) && p.parse::<u16>().is_ok_and(|v| v <= 255))
}

fn version_block_data() -> String {
    format!("{VERSION_LINE}\n{FIELD_LINE}\n")
}

pub fn valid_media_type(media_type: &str) -> bool {
    !media_type.is_empty() && media_type.bytes().all(|b| b.is_ascii_graphic())
}

/// Bytes a data record occupies in an ARC file, separator included.
pub fn record_footprint(ds_id: &RepoUri, media_type: &str, data_len: u64, date: Datestamp) -> u64 {
    let header = ArcRecordHeader {
        url: ds_id.to_string(),
        ip: LOCAL_IP.to_owned(),
        archive_date: date,
        content_type: media_type.to_owned(),
        length: data_len,
    };
    header.to_line().len() as u64 + data_len + 1
}

/// Bytes the version block of a file called `name` occupies, separator included.
pub fn version_block_footprint(name: &str, date: Datestamp) -> u64 {
    let data = version_block_data();
    let header = ArcRecordHeader {
        url: format!("filedesc://{name}"),
        ip: LOCAL_IP.to_owned(),
        archive_date: date,
        content_type: "text/plain".to_owned(),
        length: data.len() as u64,
    };
    (header.to_line().len() + data.len() + 1) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcSummary {
    pub arc_id: RepoUri,
    pub record_count: u64,
    pub total_bytes: u64,
    pub sha256: String,
}

/// Appends datastream records to a fresh ARC file.
pub struct ArcWriter<W: ByteSink> {
    arc_id: RepoUri,
    sink: HashingWriter<W>,
    records: Vec<(ArcRecordHeader, ByteExtent)>,
    sealed: bool,
}

impl<W: ByteSink> ArcWriter<W> {
    /// Write the version block to an empty sink. `name` becomes the
    /// `filedesc://` subject.
    pub fn create(arc_id: RepoUri, mut sink: W, name: &str, created: Datestamp) -> Result<ArcWriter<W>> {
        if arc_id.class() != NamespaceClass::Arc {
            return Err(Error::WrongClass { expected: NamespaceClass::Arc, found: arc_id.to_string() });
        }
        if sink.existing_len()? != 0 {
            return Err(Error::WriteOnceViolation("ARC destination is not empty".into()));
        }
        if name.is_empty() || name.bytes().any(|b| !b.is_ascii_graphic()) {
            return Err(Error::Payload(format!("invalid ARC file name {name:?}")));
        }
        let data = version_block_data();
        let header = ArcRecordHeader {
            url: format!("filedesc://{name}"),
            ip: LOCAL_IP.to_owned(),
            archive_date: created,
            content_type: "text/plain".to_owned(),
            length: data.len() as u64,
        };
        let mut writer = ArcWriter { arc_id, sink: HashingWriter::new(sink), records: Vec::new(), sealed: false };
        let line = header.to_line();
        writer.sink.write_all(line.as_bytes())?;
        writer.sink.write_all(data.as_bytes())?;
        writer.sink.write_all(b"\n")?;
        writer.records.push((header, ByteExtent::new(0, (line.len() + data.len()) as u64)));
        Ok(writer)
    }

    pub fn arc_id(&self) -> RepoUri {
        self.arc_id
    }

    /// Current file size in bytes.
    pub fn position(&self) -> u64 {
        self.sink.written()
    }

    pub fn append_datastream(&mut self, ds_id: &RepoUri, media_type: &str, data: &[u8], archived: Datestamp) -> Result<ByteExtent> {
        self.append_from(ds_id, media_type, data.len() as u64, &mut &data[..], archived)
    }

    /// Append a record whose data block is read from `data` (exactly `len` bytes).
    pub fn append_from<R: Read>(&mut self, ds_id: &RepoUri, media_type: &str, len: u64, data: &mut R, archived: Datestamp) -> Result<ByteExtent> {
        if self.sealed {
            return Err(Error::Sealed);
        }
        if !valid_media_type(media_type) {
            return Err(Error::InvalidMediaType(media_type.to_owned()));
        }
        if ds_id.class() != NamespaceClass::Datastream {
            return Err(Error::WrongClass { expected: NamespaceClass::Datastream, found: ds_id.to_string() });
        }
        let header = ArcRecordHeader {
            url: ds_id.to_string(),
            ip: LOCAL_IP.to_owned(),
            archive_date: archived,
            content_type: media_type.to_owned(),
            length: len,
        };
        let offset = self.position();
        let line = header.to_line();
        self.sink.write_all(line.as_bytes())?;
        let copied = io::copy(&mut data.take(len), &mut self.sink)?;
        if copied != len {
            return Err(Error::Io(io::Error::new(io::ErrorKind::UnexpectedEof, format!("datastream ended after {copied} of {len} bytes"))));
        }
        self.sink.write_all(b"\n")?;
        let extent = ByteExtent::new(offset, line.len() as u64 + len);
        self.records.push((header, extent));
        Ok(extent)
    }

    /// Headers and extents written so far, version block first.
    pub fn records(&self) -> &[(ArcRecordHeader, ByteExtent)] {
        &self.records
    }

    pub fn seal(&mut self) -> Result<ArcSummary> {
        if self.sealed {
            return Err(Error::Sealed);
        }
        self.sink.get_mut().sync()?;
        self.sealed = true;
        Ok(ArcSummary {
            arc_id: self.arc_id,
            record_count: self.records.len() as u64 - 1,
            total_bytes: self.sink.written(),
            sha256: self.sink.hex_digest(),
        })
    }

    /// Index captured at write time. Only available once sealed.
    pub fn index(&self) -> Result<IdIndex> {
        if !self.sealed {
            return Err(Error::Payload("ARC index requested before seal".into()));
        }
        let target = TargetInfo { size: self.sink.written(), sha256: self.sink.hex_digest() };
        build_arc_index_from(&self.records, target)
    }

    pub fn into_sink(self) -> W {
        self.sink.into_inner()
    }
}

#[derive(Debug, Clone)]
pub struct ArcScan {
    /// Every record in file order, the version block first.
    pub records: Vec<(ArcRecordHeader, ByteExtent)>,
    pub target: TargetInfo,
}

/// Walk a complete ARC file, checking every declared length.
pub fn scan_arc<R: Read>(source: R) -> Result<ArcScan> {
    let mut reader = BufReader::with_capacity(1 << 20, HashingReader::new(source));
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut line = Vec::with_capacity(256);
    loop {
        line.clear();
        let n = (&mut reader).take(MAX_HEADER_LINE as u64 + 1).read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        let ordinal = Some(records.len() as u64);
        if line.last() != Some(&b'\n') {
            let msg = if n > MAX_HEADER_LINE { "header line too long" } else { "truncated header line" };
            return Err(Error::scan(offset, ordinal, msg));
        }
        let header = ArcRecordHeader::parse_line(&line[..line.len() - 1]).map_err(|m| Error::scan(offset, ordinal, m))?;
        if records.is_empty() {
            if !header.is_version_block() || header.content_type != "text/plain" {
                return Err(Error::scan(offset, ordinal, "first record is not a filedesc version block"));
            }
        } else if let Err(m) = header.datastream_id() {
            return Err(Error::scan(offset, ordinal, m));
        }
        let mut remaining = header.length;
        if records.is_empty() {
            let mut data = vec![0; header.length.min(4096) as usize];
            if header.length > 4096 {
                return Err(Error::scan(offset, ordinal, "oversized version block"));
            }
            reader.read_exact(&mut data).map_err(|_| Error::scan(offset, ordinal, "truncated version block"))?;
            if data != version_block_data().as_bytes() {
                return Err(Error::scan(offset, ordinal, "unexpected version block contents"));
            }
            remaining = 0;
        }
        let skipped = io::copy(&mut (&mut reader).take(remaining), &mut io::sink())?;
        if skipped != remaining {
            return Err(Error::scan(offset, ordinal, format!("data block truncated: declared {} bytes", header.length)));
        }
        let mut sep = [0u8; 1];
        match reader.read(&mut sep)? {
            1 if sep[0] == b'\n' => {}
            1 => return Err(Error::scan(offset, ordinal, "declared length does not match data block")),
            _ => return Err(Error::scan(offset, ordinal, "missing record separator")),
        }
        let extent = ByteExtent::new(offset, line.len() as u64 + header.length);
        offset = extent.end() + 1;
        records.push((header, extent));
    }
    if records.is_empty() {
        return Err(Error::scan(0, None, "empty ARC file"));
    }
    let (size, sha256) = reader.into_inner().finish()?;
    Ok(ArcScan { records, target: TargetInfo { size, sha256 } })
}

/// Datastream-id index over the data records (version block excluded).
pub fn build_arc_index(scan: &ArcScan) -> Result<IdIndex> {
    build_arc_index_from(&scan.records, scan.target.clone())
}

fn build_arc_index_from(records: &[(ArcRecordHeader, ByteExtent)], target: TargetInfo) -> Result<IdIndex> {
    let entries = records
        .iter()
        .skip(1)
        .enumerate()
        .map(|(i, (h, e))| IndexEntry { key: h.url.clone(), extent: *e, datestamp: h.archive_date, ordinal: i as u64 })
        .collect();
    IdIndex::new(entries, target)
}

/// Read the record at `extent`, verifying header and declared length.
pub fn read_record<S: Read + Seek>(source: &mut S, extent: ByteExtent) -> Result<(ArcRecordHeader, Vec<u8>)> {
    let size = source_len(source)?;
    if !extent.fits(size) {
        return Err(Error::OutOfBounds { offset: extent.offset, length: extent.length, size });
    }
    source.seek(SeekFrom::Start(extent.offset))?;
    let mut bytes = vec![0u8; extent.length as usize];
    source.read_exact(&mut bytes)?;
    let corrupt = |m: String| Error::CorruptRecord { offset: extent.offset, message: m };
    let nl = bytes.iter().take(MAX_HEADER_LINE).position(|b| *b == b'\n').ok_or_else(|| corrupt("no header line in extent".into()))?;
    let header = ArcRecordHeader::parse_line(&bytes[..nl]).map_err(corrupt)?;
    if !header.is_version_block() {
        header.datastream_id().map_err(corrupt)?;
    }
    if nl as u64 + 1 + header.length != extent.length {
        return Err(corrupt(format!("declared length {} does not fill extent of {} bytes", header.length, extent.length)));
    }
    bytes.drain(..=nl);
    Ok((header, bytes))
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;
    use crate::io::sha256_hex;

    fn date() -> Datestamp {
        Datestamp::parse_iso("2005-06-01T10:00:00Z").unwrap()
    }

    fn new_writer() -> ArcWriter<Vec<u8>> {
        let id = RepoUri::mint(NamespaceClass::Arc).unwrap();
        ArcWriter::create(id, Vec::new(), &format!("{}.arc", id.uuid_str()), date()).unwrap()
    }

    fn ds() -> RepoUri {
        RepoUri::mint(NamespaceClass::Datastream).unwrap()
    }

    #[test]
    fn fresh_file_layout() {
        let mut w = new_writer();
        let name = format!("{}.arc", w.arc_id().uuid_str());
        let summary = w.seal().unwrap();
        assert_eq!(summary.record_count, 0);
        let bytes = w.into_sink();
        let expected = format!(
            "filedesc://{name} 0.0.0.0 20050601100000 text/plain 71\n1 0 XMLtapeARC\nURL IP-address Archive-date Content-type Archive-length\n\n"
        );
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), expected);
        assert_eq!(version_block_footprint(&name, date()), bytes.len() as u64);

        let scan = scan_arc(&bytes[..]).unwrap();
        assert_eq!(scan.records.len(), 1);
        assert_eq!(scan.records[0].1, ByteExtent::new(0, bytes.len() as u64 - 1));
        assert!(build_arc_index(&scan).unwrap().is_empty());
    }

    #[test]
    fn refuses_non_empty_sink() {
        let id = RepoUri::mint(NamespaceClass::Arc).unwrap();
        let err = ArcWriter::create(id, vec![1u8], "x.arc", date()).err().unwrap();
        assert!(matches!(err, Error::WriteOnceViolation(_)));
    }

    #[test]
    fn appends_and_reads_back() {
        let mut w = new_writer();
        let a = ds();
        let b = ds();
        let ea = w.append_datastream(&a, "application/octet-stream", &[7u8; 100], date()).unwrap();
        let eb = w.append_datastream(&b, "application/octet-stream", &[9u8; 100], date()).unwrap();
        assert_eq!(eb.offset, ea.offset + ea.length + 1);
        assert_eq!(record_footprint(&a, "application/octet-stream", 100, date()), ea.length + 1);
        w.seal().unwrap();
        let write_index = w.index().unwrap();
        let bytes = w.into_sink();

        let scan = scan_arc(&bytes[..]).unwrap();
        let extents: Vec<_> = scan.records.iter().map(|r| r.1).collect();
        assert_eq!(extents[1..], [ea, eb]);
        assert_eq!(build_arc_index(&scan).unwrap().render(), write_index.render());

        let (h, data) = read_record(&mut Cursor::new(&bytes), eb).unwrap();
        assert_eq!(h.url, b.to_string());
        assert_eq!(data, vec![9u8; 100]);
    }

    #[test]
    fn zero_length_datastream() {
        let mut w = new_writer();
        let id = ds();
        let e = w.append_datastream(&id, "text/plain", b"", date()).unwrap();
        let line = format!("{id} 0.0.0.0 20050601100000 text/plain 0\n");
        assert_eq!(e.length, line.len() as u64);
        w.seal().unwrap();
        let bytes = w.into_sink();
        let (h, data) = read_record(&mut Cursor::new(&bytes), e).unwrap();
        assert_eq!(h.length, 0);
        assert!(data.is_empty());
        assert_eq!(scan_arc(&bytes[..]).unwrap().records[1].1, e);
    }

    #[test]
    fn data_may_contain_newlines_and_header_lookalikes() {
        let mut w = new_writer();
        let id = ds();
        let fake = format!("\n{} 0.0.0.0 20050601100000 text/plain 3\nabc\n", ds());
        let e = w.append_datastream(&id, "text/plain", fake.as_bytes(), date()).unwrap();
        let e2 = w.append_datastream(&ds(), "text/plain", b"\n\n", date()).unwrap();
        w.seal().unwrap();
        let bytes = w.into_sink();
        let scan = scan_arc(&bytes[..]).unwrap();
        assert_eq!(scan.records.len(), 3);
        assert_eq!(scan.records[1].1, e);
        assert_eq!(scan.records[2].1, e2);
    }

    #[test]
    fn sealed_writer_rejects_appends() {
        let mut w = new_writer();
        for _ in 0..3 {
            w.append_datastream(&ds(), "image/png", b"png", date()).unwrap();
        }
        assert_eq!(w.seal().unwrap().record_count, 3);
        assert!(matches!(w.append_datastream(&ds(), "image/png", b"x", date()), Err(Error::Sealed)));
        assert!(matches!(w.seal(), Err(Error::Sealed)));
    }

    #[test]
    fn invalid_media_type() {
        let mut w = new_writer();
        assert!(matches!(w.append_datastream(&ds(), "text/plain; charset=utf-8", b"x", date()), Err(Error::InvalidMediaType(_))));
        assert!(matches!(w.append_datastream(&ds(), "", b"x", date()), Err(Error::InvalidMediaType(_))));
    }

    #[test]
    fn read_errors() {
        let mut w = new_writer();
        let e = w.append_datastream(&ds(), "text/plain", b"hello world", date()).unwrap();
        w.seal().unwrap();
        let bytes = w.into_sink();
        let mut cur = Cursor::new(&bytes);
        let beyond = ByteExtent::new(e.offset, bytes.len() as u64);
        assert!(matches!(read_record(&mut cur, beyond), Err(Error::OutOfBounds { .. })));
        let shifted = ByteExtent::new(e.offset + 1, e.length);
        assert!(matches!(read_record(&mut cur, shifted), Err(Error::CorruptRecord { .. })));
        for delta in [-1i64, 1] {
            let shifted = ByteExtent::new((e.offset as i64 + delta) as u64, e.length);
            assert!(read_record(&mut cur, shifted).is_err());
            let resized = ByteExtent::new(e.offset, (e.length as i64 + delta) as u64);
            assert!(read_record(&mut cur, resized).is_err());
        }
    }

    #[test]
    fn scan_detects_damage() {
        let mut w = new_writer();
        let e = w.append_datastream(&ds(), "text/plain", b"0123456789", date()).unwrap();
        w.append_datastream(&ds(), "text/plain", b"abc", date()).unwrap();
        w.seal().unwrap();
        let bytes = w.into_sink();

        let truncated = &bytes[..(e.offset + e.length - 4) as usize];
        match scan_arc(truncated) {
            Err(Error::Scan { offset, .. }) => assert_eq!(offset, e.offset),
            other => panic!("{other:?}"),
        }

        let text = String::from_utf8(bytes.clone()).unwrap();
        let wrong = text.replacen("text/plain 10\n", "text/plain 11\n", 1);
        assert!(matches!(scan_arc(wrong.as_bytes()), Err(Error::Scan { .. })));
        let wrong = text.replacen("text/plain 10\n", "text/plain 9\n", 1);
        assert!(matches!(scan_arc(wrong.as_bytes()), Err(Error::Scan { .. })));

        let no_sep = &bytes[..bytes.len() - 1];
        assert!(scan_arc(no_sep).is_err());
        assert!(scan_arc(&b""[..]).is_err());
    }

    #[test]
    fn large_round_trip_hash() {
        let data: Vec<u8> = (0..(1u32 << 20)).map(|i| (i.wrapping_mul(2654435761) >> 13) as u8).collect();
        let mut w = new_writer();
        let e = w.append_datastream(&ds(), "application/pdf", &data, date()).unwrap();
        w.seal().unwrap();
        let bytes = w.into_sink();
        let (_, back) = read_record(&mut Cursor::new(&bytes), e).unwrap();
        assert_eq!(sha256_hex(&back), sha256_hex(&data));
    }

    #[test]
    fn header_line_parsing() {
        let ok = b"info:lanl-repo/ds/550e8400-e29b-41d4-a716-446655440000 0.0.0.0 20050601100000 image/tiff 12";
        let h = ArcRecordHeader::parse_line(ok).unwrap();
        assert_eq!(h.length, 12);
        assert_eq!(h.to_line().trim_end().as_bytes(), ok);
        for bad in [
            &b"a 0.0.0.0 20050601100000 image/tiff"[..],
            b"a 0.0.0.0 20050601100000 image/tiff 1 2",
            b"a 0.0.0.256 20050601100000 image/tiff 1",
            b"a 0.0.0.0 2005060110000 image/tiff 1",
            b"a 0.0.0.0 20050601100000 image/tiff -1",
            b"a  0.0.0.0 20050601100000 image/tiff 1",
        ] {
            assert!(ArcRecordHeader::parse_line(bad).is_err(), "{}", String::from_utf8_lossy(bad));
        }
    }
}
