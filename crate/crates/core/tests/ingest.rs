mod common;

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use common::*;
use xmltape::arc::scan_arc;
use xmltape::ingest::{Datastream, DatastreamData};
use xmltape::io::{file_digest, sha256_hex};
use xmltape::store::{reindex, validate_file, IndexWrite};
use xmltape::tape::{scan_tape, validate_tape};
use xmltape::wrapper::{openurl_rft_id, WrapperDocument};
use xmltape::{ingest_batch, load_batch_dir, Error, Locator, NamespaceClass, RepoUri, Store};

fn tree_hashes(root: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for dir in ["tapes", "arcs"] {
        let Ok(entries) = fs::read_dir(root.join(dir)) else { continue };
        for e in entries {
            let p = e.unwrap().path();
            out.push((p.display().to_string(), file_digest(&p).unwrap().1));
        }
    }
    out.sort();
    out
}

#[test]
fn batch_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let objects: Vec<_> = (0..12).map(|i| object(i, &[1000 + i * 37, 20_000][..1 + i % 2])).collect();
    let report = ingest_batch(&store, &objects, &config(40_000)).unwrap();

    assert_eq!(report.objects.len(), 12);
    assert!(report.arc_ids.len() > 1, "expected rollover, got {:?}", report.arc_ids);
    assert_eq!(store.tape_ids().unwrap(), vec![report.tape_id.uuid()]);
    assert!(store.temporaries().unwrap().is_empty());

    let tape = store.mount_tape(report.tape_id.uuid()).unwrap();
    assert_eq!(tape.admin.arc_ids, report.arc_ids);
    assert_eq!(tape.by_id.len(), 12);

    let mut referenced = BTreeSet::new();
    let mut prev = None;
    for (obj, rep) in objects.iter().zip(&report.objects) {
        let record = tape.get_record(&rep.package_id.to_string()).unwrap();
        assert_eq!(record.admin.record_id, rep.package_id.to_string());
        assert!(prev <= Some(record.admin.created));
        prev = Some(record.admin.created);

        let w = WrapperDocument::parse(&record.payload).unwrap();
        assert_eq!(w.package_id, rep.package_id);
        assert_eq!(w.content_id, obj.content_id);
        assert_eq!(w.metadata, obj.metadata);
        assert_eq!(w.datastreams.len(), obj.datastreams.len());
        for (r, ds) in w.datastreams.iter().zip(&obj.datastreams) {
            let arc_uuid = r.openurl.split("/openurl/").nth(1).unwrap().split('?').next().unwrap();
            let arc = store.mount_arc(uuid::Uuid::parse_str(arc_uuid).unwrap()).unwrap();
            referenced.insert(arc.id);
            let rft = openurl_rft_id(&r.openurl).unwrap();
            assert_eq!(rft, r.ds_id.to_string());
            let (header, data) = arc.get_datastream(&rft).unwrap();
            assert_eq!(header.content_type, ds.media_type);
            let DatastreamData::Bytes(orig) = &ds.data else { unreachable!() };
            assert_eq!(sha256_hex(&data), sha256_hex(orig));
        }
    }
    // Association closure.
    assert_eq!(referenced, report.arc_ids.iter().copied().collect());

    let loc = Locator::open(store.locator_path()).unwrap();
    assert_eq!(loc.len(), 12);
    let versions = loc.resolve_versions("info:test/object/3", OAI_TEMPLATE);
    assert_eq!(versions.len(), 1);
    assert!(versions[0].oai_base_url.contains(&report.tape_id.uuid_str()));

    let manifest = report.manifest();
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 12);
    assert!(manifest.starts_with(&format!("# tape {}\n", report.tape_id)));
}

#[test]
fn arc_sizes_respect_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let objects: Vec<_> = (0..3).map(|i| object(i, &[40 * 1024])).collect();
    let report = ingest_batch(&store, &objects, &config(100 * 1024)).unwrap();
    let sizes: Vec<u64> = report.arc_paths.iter().map(|p| fs::metadata(p).unwrap().len()).collect();
    assert_eq!(sizes.len(), 2);
    assert!(sizes[0] > 80 * 1024 && sizes[0] <= 100 * 1024, "{sizes:?}");
    assert!(sizes[1] > 40 * 1024 && sizes[1] < 41 * 1024, "{sizes:?}");
}

#[test]
fn zero_datastreams_zero_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let report = ingest_batch(&store, &[object(0, &[])], &config(1 << 20)).unwrap();
    assert!(report.arc_ids.is_empty());
    assert!(store.arc_ids().unwrap().is_empty());
    let tape = store.mount_tape(report.tape_id.uuid()).unwrap();
    assert!(tape.admin.arc_ids.is_empty());
    let w = WrapperDocument::parse(&tape.get_record(&report.objects[0].package_id.to_string()).unwrap().payload).unwrap();
    assert!(w.datastreams.is_empty());
}

#[test]
fn invalid_batch_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    let store = Store::new(&root);
    let mut objects: Vec<_> = (0..5).map(|i| object(i, &[100])).collect();
    objects[3].metadata = b"<broken xmlns=\"urn:x\">".to_vec();
    assert!(matches!(ingest_batch(&store, &objects, &config(1 << 20)), Err(Error::InvalidBatch(_))));
    assert!(!root.exists());
    assert!(matches!(ingest_batch(&store, &[], &config(1 << 20)), Err(Error::InvalidBatch(_))));
    assert!(!root.exists());
}

#[test]
fn io_failure_removes_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let mut objects: Vec<_> = (0..4).map(|i| object(i, &[5000])).collect();
    objects[2].datastreams.push(Datastream {
        data: DatastreamData::Stream {
            len: 10_000,
            open: Arc::new(|| {
                let broken: Box<dyn io::Read + Send> = Box::new(io::Read::chain(&[7u8; 100][..], FailingReader));
                Ok(broken)
            }),
        },
        media_type: "application/octet-stream".into(),
    });
    assert!(ingest_batch(&store, &objects, &config(8000)).is_err());
    assert!(store.temporaries().unwrap().is_empty());
    assert!(store.tape_ids().unwrap().is_empty());
    assert!(store.arc_ids().unwrap().is_empty());
    assert!(!store.locator_path().exists());
}

struct FailingReader;

impl io::Read for FailingReader {
    fn read(&mut self, _: &mut [u8]) -> io::Result<usize> {
        Err(io::Error::other("device unplugged"))
    }
}

#[test]
fn reingest_is_write_once() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let objects: Vec<_> = (0..6).map(|i| object(i, &[300])).collect();
    let first = ingest_batch(&store, &objects, &config(1 << 20)).unwrap();
    let before = tree_hashes(dir.path());

    let mut changed = objects[..3].to_vec();
    for o in &mut changed {
        o.metadata = metadata(99, "Revised");
    }
    let second = ingest_batch(&store, &changed, &config_at(1 << 20, 86_400)).unwrap();
    let after = tree_hashes(dir.path());
    for entry in &before {
        assert!(after.contains(entry), "{entry:?} changed");
    }
    let loc = Locator::open(store.locator_path()).unwrap();
    for (i, o) in objects.iter().enumerate() {
        let v = loc.entries(o.content_id.as_str());
        if i < 3 {
            assert_eq!(v.len(), 2);
            assert_eq!(v[0].package_id, first.objects[i].package_id);
            assert_eq!(v[1].package_id, second.objects[i].package_id);
            assert_ne!(v[0].package_id, v[1].package_id);
        } else {
            assert_eq!(v.len(), 1);
        }
    }
}

#[test]
fn reindex_is_deterministic_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let objects: Vec<_> = (0..20).map(|i| object(i, &[700, 300])).collect();
    let report = ingest_batch(&store, &objects, &config(10_000)).unwrap();
    let originals: Vec<Vec<u8>> = report.index_paths.iter().map(|p| fs::read(p).unwrap()).collect();
    for p in &report.index_paths {
        fs::remove_file(p).unwrap();
    }
    let mut files = vec![report.tape_path.clone()];
    files.extend(report.arc_paths.iter().cloned());
    for f in &files {
        assert!(reindex(f).unwrap().iter().all(|(_, w)| *w == IndexWrite::Written));
    }
    for (p, orig) in report.index_paths.iter().zip(&originals) {
        assert_eq!(&fs::read(p).unwrap(), orig, "{}", p.display());
    }
    for f in &files {
        assert!(reindex(f).unwrap().iter().all(|(_, w)| *w == IndexWrite::Unchanged));
        assert!(validate_file(f).unwrap().is_valid());
    }
}

#[test]
fn reindex_rejects_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let report = ingest_batch(&store, &[object(0, &[100]), object(1, &[100])], &config(1 << 20)).unwrap();
    let bytes = fs::read(&report.tape_path).unwrap();
    let cut = dir.path().join("cut.xml");
    fs::write(&cut, &bytes[..bytes.len() - 20]).unwrap();
    assert!(reindex(&cut).is_err());
    let arc_bytes = fs::read(&report.arc_paths[0]).unwrap();
    let cut = dir.path().join("cut.arc");
    fs::write(&cut, &arc_bytes[..arc_bytes.len() - 5]).unwrap();
    assert!(reindex(&cut).is_err());
}

#[test]
fn flipped_byte_names_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let objects: Vec<_> = (0..10).map(|i| object(i, &[10])).collect();
    let report = ingest_batch(&store, &objects, &config(1 << 20)).unwrap();
    let bytes = fs::read(&report.tape_path).unwrap();
    let scan = scan_tape(&bytes[..]).unwrap();
    let (_, extent) = &scan.records[6];
    let text = std::str::from_utf8(&bytes[extent.offset as usize..extent.end() as usize]).unwrap();
    let pos = extent.offset as usize + text.find("Object 6").unwrap();
    let mut bad = bytes.clone();
    bad[pos] = b'Q';
    let report = validate_tape(&bad);
    assert!(!report.is_valid());
    assert!(report.findings.iter().all(|f| f.ordinal == Some(6)), "{report:?}");
}

#[test]
fn wrong_arc_length_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let report = ingest_batch(&store, &[object(0, &[100, 50])], &config(1 << 20)).unwrap();
    let bytes = fs::read(&report.arc_paths[0]).unwrap();
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let needle = " application/pdf 100\n";
    let pos = text.find(needle).unwrap();
    let mut bad = bytes.clone();
    bad[pos + needle.len() - 2] = b'1';
    let path = dir.path().join("bad.arc");
    fs::write(&path, &bad).unwrap();
    assert!(!validate_file(&path).unwrap().is_valid());
    assert!(scan_arc(&bad[..]).is_err());
}

#[test]
fn batch_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let batch = dir.path().join("batch");
    for (name, cid, streams) in [("b", "info:x/b", vec![("2.png", "image/png"), ("10", "text/plain")]), ("a", "info:x/a", vec![])] {
        let d = batch.join(name);
        fs::create_dir_all(&d).unwrap();
        fs::write(d.join("content.id"), format!("{cid}\n")).unwrap();
        fs::write(d.join("metadata.xml"), "<?xml version=\"1.0\"?>\n<m xmlns=\"urn:m\">x</m>\n").unwrap();
        for (file, mt) in streams {
            fs::write(d.join(file), file.as_bytes()).unwrap();
            fs::write(d.join(format!("{file}.mediatype")), format!("{mt}\n")).unwrap();
        }
    }
    let objects = load_batch_dir(&batch).unwrap();
    assert_eq!(objects.len(), 2);
    assert_eq!(objects[0].content_id.as_str(), "info:x/a");
    assert_eq!(objects[1].metadata, b"<m xmlns=\"urn:m\">x</m>");
    let types: Vec<_> = objects[1].datastreams.iter().map(|d| d.media_type.as_str()).collect();
    assert_eq!(types, ["image/png", "text/plain"]);

    fs::write(batch.join("a").join("stray.txt"), "x").unwrap();
    assert!(load_batch_dir(&batch).is_err());
    fs::remove_file(batch.join("a").join("stray.txt")).unwrap();
    fs::remove_file(batch.join("b").join("10.mediatype")).unwrap();
    assert!(load_batch_dir(&batch).is_err());

    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert!(matches!(load_batch_dir(&empty), Err(Error::InvalidBatch(_))));
}

#[test]
fn identifiers_are_fresh_across_batches() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let mut seen = BTreeSet::new();
    for _ in 0..3 {
        let report = ingest_batch(&store, &(0..5).map(|i| object(i, &[10, 10])).collect::<Vec<_>>(), &config(1 << 20)).unwrap();
        assert!(seen.insert(report.tape_id));
        for o in &report.objects {
            assert!(seen.insert(o.package_id));
            for d in &o.ds_ids {
                assert_eq!(d.class(), NamespaceClass::Datastream);
                assert!(seen.insert(*d));
            }
        }
    }
    let _: Vec<RepoUri> = seen.into_iter().collect();
}
