//! Wrapper documents: the XML representation of one Digital Object, carrying
//! its metadata by value and its datastreams by reference (as OpenURLs).
//!
//! ```text
//! <object xmlns="urn:xmltape:wrapper:1.0" packageId="…" contentId="…" created="…">
//!   <metadata>ELEMENT</metadata>
//!   <datastream dsId="…" mediaType="…" ref="…"/>*
//! </object>
//! ```
//!
//! Serialized without whitespace between elements.

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::ids::{ContentId, NamespaceClass, RepoUri};
use crate::xml::{self, escape_attr, Event};

pub const WRAPPER_NS: &str = "urn:xmltape:wrapper:1.0";
pub const URL_VER: &str = "Z39.88-2004";

/// RFC 3986 unreserved characters pass through; everything else is escaped.
const KEV_VALUE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

pub fn encode_kev(value: &str) -> String {
    utf8_percent_encode(value, KEV_VALUE).to_string()
}

/// Decode one query-string component (`+` is a space).
pub fn decode_kev(value: &str) -> Option<String> {
    percent_decode_str(&value.replace('+', " ")).decode_utf8().ok().map(|s| s.into_owned())
}

/// Split a raw query string into decoded key/value pairs, keeping repeats.
pub fn parse_query(query: &str) -> Option<Vec<(String, String)>> {
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            Some((decode_kev(k)?, decode_kev(v)?))
        })
        .collect()
}

/// `http://host[:port]/path` with no query or fragment.
pub fn check_base_url(base: &str) -> Result<()> {
    let rest = base.strip_prefix("http://").or_else(|| base.strip_prefix("https://"));
    let ok = match rest {
        Some(rest) => {
            let host = rest.split('/').next().unwrap_or_default();
            !host.is_empty() && !base.contains(['?', '#']) && !base.chars().any(|c| c.is_whitespace() || c.is_control())
        }
        None => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidBase(base.to_owned()))
    }
}

pub fn make_openurl(arc_base_url: &str, ds_id: &RepoUri) -> Result<String> {
    check_base_url(arc_base_url)?;
    if ds_id.class() != NamespaceClass::Datastream {
        return Err(Error::WrongClass { expected: NamespaceClass::Datastream, found: ds_id.to_string() });
    }
    Ok(format!("{arc_base_url}?url_ver={URL_VER}&rft_id={}", encode_kev(&ds_id.to_string())))
}

/// Pull `rft_id` back out of an OpenURL produced by [`make_openurl`].
pub fn openurl_rft_id(url: &str) -> Option<String> {
    let (_, query) = url.split_once('?')?;
    parse_query(query)?.into_iter().find(|(k, _)| k == "rft_id").map(|(_, v)| v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatastreamRef {
    pub ds_id: RepoUri,
    pub media_type: String,
    pub openurl: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WrapperDocument {
    pub package_id: RepoUri,
    pub content_id: ContentId,
    pub created: Datestamp,
    /// One self-contained XML element, byte for byte.
    pub metadata: Vec<u8>,
    pub datastreams: Vec<DatastreamRef>,
}

impl WrapperDocument {
    pub fn to_xml(&self) -> Vec<u8> {
        let mut out = format!(
            "<object xmlns=\"{WRAPPER_NS}\" packageId=\"{}\" contentId=\"{}\" created=\"{}\"><metadata>",
            self.package_id,
            escape_attr(self.content_id.as_str()),
            self.created
        )
        .into_bytes();
        out.extend_from_slice(&self.metadata);
        out.extend_from_slice(b"</metadata>");
        for ds in &self.datastreams {
            out.extend_from_slice(
                format!("<datastream dsId=\"{}\" mediaType=\"{}\" ref=\"{}\"/>", ds.ds_id, escape_attr(&ds.media_type), escape_attr(&ds.openurl))
                    .as_bytes(),
            );
        }
        out.extend_from_slice(b"</object>");
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<WrapperDocument> {
        let bad = |m: String| Error::payload(format!("wrapper: {m}"));
        let tokens = xml::tokenize(bytes).map_err(|e| bad(e.to_string()))?;
        let mut it = tokens.iter().filter(|t| !t.is_whitespace() && !matches!(t.event, Event::Comment));

        let attr = |attrs: &[xml::Attribute], name: &str| -> Result<String> {
            attrs.iter().find(|a| a.name == name).map(|a| a.value.clone()).ok_or_else(|| bad(format!("missing attribute {name}")))
        };
        let is_wrapper = |ns: &Option<String>| ns.as_deref() == Some(WRAPPER_NS);

        let (package_id, content_id, created) = match it.next().map(|t| &t.event) {
            Some(Event::Start { name, attributes, namespace, empty: false, .. }) if xml::local_name(name) == "object" && is_wrapper(namespace) => (
                RepoUri::parse_class(&attr(attributes, "packageId")?, NamespaceClass::Package)?,
                ContentId::new(attr(attributes, "contentId")?)?,
                Datestamp::parse_iso(&attr(attributes, "created")?)?,
            ),
            _ => return Err(bad("root is not an object element".into())),
        };
        match it.next().map(|t| &t.event) {
            Some(Event::Start { name, namespace, empty: false, .. }) if xml::local_name(name) == "metadata" && is_wrapper(namespace) => {}
            _ => return Err(bad("expected metadata element".into())),
        }
        let first = it.next().ok_or_else(|| bad("truncated".into()))?;
        let meta_start = first.start as usize;
        let meta_end = match &first.event {
            Event::Start { empty: true, .. } => first.end as usize,
            Event::Start { .. } => {
                let mut depth = 1;
                loop {
                    let t = it.next().ok_or_else(|| bad("truncated metadata".into()))?;
                    match t.event {
                        Event::Start { empty: false, .. } => depth += 1,
                        Event::End { .. } => depth -= 1,
                        _ => {}
                    }
                    if depth == 0 {
                        break t.end as usize;
                    }
                }
            }
            _ => return Err(bad("metadata must hold one element".into())),
        };
        if !matches!(it.next().map(|t| &t.event), Some(Event::End { .. })) {
            return Err(bad("metadata must hold one element".into()));
        }
        let mut datastreams = Vec::new();
        loop {
            match it.next().map(|t| &t.event) {
                Some(Event::Start { name, attributes, namespace, empty: true, .. })
                    if xml::local_name(name) == "datastream" && is_wrapper(namespace) =>
                {
                    datastreams.push(DatastreamRef {
                        ds_id: RepoUri::parse_class(&attr(attributes, "dsId")?, NamespaceClass::Datastream)?,
                        media_type: attr(attributes, "mediaType")?,
                        openurl: attr(attributes, "ref")?,
                    });
                }
                Some(Event::End { .. }) => break,
                _ => return Err(bad("unexpected content in object".into())),
            }
        }
        Ok(WrapperDocument { package_id, content_id, created, metadata: bytes[meta_start..meta_end].to_vec(), datastreams })
    }
}

/// Build the wrapper for `metadata` and its datastream references.
pub fn make_wrapper(
    package_id: RepoUri,
    content_id: &ContentId,
    created: Datestamp,
    metadata: &[u8],
    datastream_count: usize,
    refs: Vec<DatastreamRef>,
) -> Result<WrapperDocument> {
    if package_id.class() != NamespaceClass::Package {
        return Err(Error::WrongClass { expected: NamespaceClass::Package, found: package_id.to_string() });
    }
    if refs.len() != datastream_count {
        return Err(Error::payload(format!("{} datastream references for {datastream_count} datastreams", refs.len())));
    }
    xml::check_self_contained_element(metadata).map_err(|e| Error::payload(format!("metadata {e}")))?;
    Ok(WrapperDocument { package_id, content_id: content_id.clone(), created, metadata: metadata.to_vec(), datastreams: refs })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ds(s: &str) -> RepoUri {
        RepoUri::parse(s).unwrap()
    }

    #[test]
    fn openurl_shape() {
        let url =
            make_openurl("http://h/openurl/38f2d0c4-5b7e-4b1a-9c3d-2e6f8a9b0c1d", &ds("info:lanl-repo/ds/550e8400-e29b-41d4-a716-446655440000"))
                .unwrap();
        assert_eq!(
            url,
            "http://h/openurl/38f2d0c4-5b7e-4b1a-9c3d-2e6f8a9b0c1d?url_ver=Z39.88-2004&rft_id=info%3Alanl-repo%2Fds%2F550e8400-e29b-41d4-a716-446655440000"
        );
        assert_eq!(openurl_rft_id(&url).unwrap(), "info:lanl-repo/ds/550e8400-e29b-41d4-a716-446655440000");
    }

    #[test]
    fn openurl_rejects_bad_bases() {
        let d = RepoUri::mint(NamespaceClass::Datastream).unwrap();
        for base in ["/openurl/x", "ftp://h/x", "http://", "http://h/x?a=b", "http://h/a b", ""] {
            assert!(matches!(make_openurl(base, &d), Err(Error::InvalidBase(_))), "{base}");
        }
        let p = RepoUri::mint(NamespaceClass::Package).unwrap();
        assert!(make_openurl("http://h/x", &p).is_err());
    }

    #[test]
    fn query_parsing() {
        let q = parse_query("a=1&b=x%20y&a=2&c&d=e+f").unwrap();
        assert_eq!(q, [("a", "1"), ("b", "x y"), ("a", "2"), ("c", ""), ("d", "e f")].map(|(k, v)| (k.to_owned(), v.to_owned())).to_vec());
        assert!(parse_query("a=%FF").is_none());
    }

    fn sample(n: usize) -> WrapperDocument {
        let refs = (0..n)
            .map(|i| {
                let d = RepoUri::mint(NamespaceClass::Datastream).unwrap();
                DatastreamRef { ds_id: d, media_type: format!("application/x-{i}"), openurl: make_openurl("http://h:8080/openurl/abc", &d).unwrap() }
            })
            .collect();
        make_wrapper(
            RepoUri::mint(NamespaceClass::Package).unwrap(),
            &ContentId::new("info:doi/10.1000/a&b\"c").unwrap(),
            Datestamp::from_unix(1_117_620_000),
            br#"<dc:dc xmlns:dc="http://purl.org/dc/elements/1.1/"><dc:title>T &amp; <![CDATA[<x>]]></dc:title></dc:dc>"#,
            n,
            refs,
        )
        .unwrap()
    }

    #[test]
    fn wrapper_round_trip() {
        for n in [0, 1, 3] {
            let w = sample(n);
            let bytes = w.to_xml();
            xml::check_self_contained_element(&bytes).unwrap();
            assert_eq!(WrapperDocument::parse(&bytes).unwrap(), w);
        }
    }

    #[test]
    fn wrapper_without_datastreams_has_metadata_only() {
        let text = String::from_utf8(sample(0).to_xml()).unwrap();
        assert!(text.ends_with("</dc:dc></metadata></object>"));
        assert!(!text.contains("<datastream"));
    }

    #[test]
    fn wrapper_rejections() {
        let p = RepoUri::mint(NamespaceClass::Package).unwrap();
        let c = ContentId::new("info:x/1").unwrap();
        let t = Datestamp::from_unix(0);
        assert!(make_wrapper(p, &c, t, b"<m xmlns=\"urn:m\"/>", 1, vec![]).is_err());
        assert!(matches!(make_wrapper(p, &c, t, b"<m xmlns=\"urn:m\">", 0, vec![]), Err(Error::Payload(_))));
        assert!(matches!(make_wrapper(p, &c, t, b"<m/>", 0, vec![]), Err(Error::Payload(_))));
        assert!(make_wrapper(p, &c, t, b"<m xmlns=\"urn:m\"/>", 0, vec![]).is_ok());
    }

    proptest! {
        #[test]
        fn kev_round_trip(s in "\\PC{0,40}") {
            prop_assert_eq!(decode_kev(&encode_kev(&s)).unwrap(), s);
        }

        #[test]
        fn only_reserved_ds_chars_escaped(bits in any::<u128>()) {
            let d = RepoUri::from_parts(NamespaceClass::Datastream, uuid::Uuid::from_u128(bits)).unwrap();
            let enc = encode_kev(&d.to_string());
            prop_assert_eq!(enc, d.to_string().replace(':', "%3A").replace('/', "%2F"));
        }
    }
}
