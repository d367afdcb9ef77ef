#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_xmltape");

pub struct BatchObject {
    pub content_id: String,
    pub metadata: String,
    pub datastreams: Vec<(Vec<u8>, String)>,
}

pub fn bytes(seed: u64, len: usize) -> Vec<u8> {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            x as u8
        })
        .collect()
}

pub fn batch_object(n: usize, sizes: &[usize]) -> BatchObject {
    BatchObject {
        content_id: format!("info:test/object/{n}"),
        metadata: format!("<dc xmlns=\"http://purl.org/dc/elements/1.1/\"><title>Object {n}</title></dc>"),
        datastreams: sizes.iter().enumerate().map(|(d, &len)| (bytes((n * 16 + d) as u64, len), "application/octet-stream".into())).collect(),
    }
}

/// Lay out a batch directory as `xmltape ingest` expects it.
pub fn write_batch(dir: &Path, objects: &[BatchObject]) {
    fs::create_dir_all(dir).unwrap();
    for (i, o) in objects.iter().enumerate() {
        let d = dir.join(format!("{i:06}"));
        fs::create_dir(&d).unwrap();
        fs::write(d.join("content.id"), format!("{}\n", o.content_id)).unwrap();
        fs::write(d.join("metadata.xml"), format!("<?xml version=\"1.0\"?>\n{}\n", o.metadata)).unwrap();
        for (n, (data, media_type)) in o.datastreams.iter().enumerate() {
            fs::write(d.join(format!("{n}.bin")), data).unwrap();
            fs::write(d.join(format!("{n}.bin.mediatype")), media_type).unwrap();
        }
    }
}

pub fn run(store: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--store").arg(store).args(args).output().unwrap()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub struct Manifest {
    pub tape: String,
    pub arcs: Vec<String>,
    /// content id, package id, datastream ids
    pub objects: Vec<(String, String, Vec<String>)>,
}

pub fn parse_manifest(text: &str) -> Manifest {
    let mut m = Manifest { tape: String::new(), arcs: Vec::new(), objects: Vec::new() };
    for line in text.lines() {
        if let Some(t) = line.strip_prefix("# tape ") {
            m.tape = t.to_owned();
        } else if let Some(a) = line.strip_prefix("# arc ") {
            m.arcs.push(a.to_owned());
        } else {
            let mut f = line.split('\t');
            let (c, p, d) = (f.next().unwrap(), f.next().unwrap(), f.next().unwrap_or(""));
            let ds = if d.is_empty() { Vec::new() } else { d.split(',').map(str::to_owned).collect() };
            m.objects.push((c.to_owned(), p.to_owned(), ds));
        }
    }
    m
}

pub fn uuid_of(uri: &str) -> &str {
    uri.rsplit('/').next().unwrap()
}

/// Every regular file under `root` with its content hash.
pub fn hash_tree(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = fs::read_dir(&dir) else { continue };
        for e in entries {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.clone(), xmltape::io::sha256_hex(&fs::read(&p).unwrap()));
            }
        }
    }
    out
}
