#![allow(dead_code)]

use std::sync::Arc;

use xmltape::datestamp::Datestamp;
use xmltape::ingest::{Datastream, DatastreamData, IngestConfig, SteppingClock, SubmissionObject};
use xmltape::ContentId;

pub const OPENURL_TEMPLATE: &str = "http://test.invalid/openurl/{arc}";
pub const OAI_TEMPLATE: &str = "http://test.invalid/oai/{tape}";

pub fn config(max_arc_bytes: u64) -> IngestConfig {
    config_at(max_arc_bytes, 0)
}

/// Clock starts `offset` seconds after the default start.
pub fn config_at(max_arc_bytes: u64, offset: i64) -> IngestConfig {
    let mut c = IngestConfig::new(OPENURL_TEMPLATE, OAI_TEMPLATE);
    c.max_arc_bytes = max_arc_bytes;
    c.clock = Arc::new(SteppingClock::new(Datestamp::from_unix(1_117_620_000 + offset), 1));
    c
}

pub fn metadata(n: usize, tag: &str) -> Vec<u8> {
    format!(r#"<dc:dc xmlns:dc="http://purl.org/dc/elements/1.1/"><dc:title>{tag} {n}</dc:title></dc:dc>"#).into_bytes()
}

/// Deterministic pseudo-random bytes.
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

pub fn object(n: usize, sizes: &[usize]) -> SubmissionObject {
    SubmissionObject {
        content_id: ContentId::new(format!("info:test/object/{n}")).unwrap(),
        metadata: metadata(n, "Object"),
        datastreams: sizes
            .iter()
            .enumerate()
            .map(|(i, s)| Datastream {
                data: DatastreamData::Bytes(bytes((n * 10 + i) as u64, *s)),
                media_type: if i % 2 == 0 { "application/pdf".into() } else { "image/png".into() },
            })
            .collect(),
    }
}
