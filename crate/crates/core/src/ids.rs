//! Repository identifiers.
//!
//! Minted identifiers live under `info:lanl-repo/<subns>/<uuid>` where the
//! sub-namespace token is one of `pkg`, `xmltape`, `arc` or `ds`. Content
//! identifiers are supplied by the information provider and kept verbatim.

use std::fmt;
use std::str::FromStr;

use uuid::Uuid;

use crate::error::{Error, Result};

pub const REPO_PREFIX: &str = "info:lanl-repo/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamespaceClass {
    Content,
    Package,
    Tape,
    Arc,
    Datastream,
}

impl NamespaceClass {
    /// Sub-namespace token, or `None` for the unminted content class.
    pub fn token(self) -> Option<&'static str> {
        match self {
            NamespaceClass::Content => None,
            NamespaceClass::Package => Some("pkg"),
            NamespaceClass::Tape => Some("xmltape"),
            NamespaceClass::Arc => Some("arc"),
            NamespaceClass::Datastream => Some("ds"),
        }
    }

    const MINTED: [NamespaceClass; 4] = [NamespaceClass::Package, NamespaceClass::Tape, NamespaceClass::Arc, NamespaceClass::Datastream];
}

/// A minted identifier: a namespace class plus a UUID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RepoUri {
    class: NamespaceClass,
    uuid: Uuid,
}

impl RepoUri {
    pub fn mint(class: NamespaceClass) -> Result<RepoUri> {
        if class == NamespaceClass::Content {
            return Err(Error::InvalidClass(class));
        }
        Ok(RepoUri { class, uuid: Uuid::new_v4() })
    }

    pub fn from_parts(class: NamespaceClass, uuid: Uuid) -> Result<RepoUri> {
        if class == NamespaceClass::Content {
            return Err(Error::InvalidClass(class));
        }
        Ok(RepoUri { class, uuid })
    }

    pub fn parse(s: &str) -> Result<RepoUri> {
        let bytes = s.as_bytes();
        let malformed = |position: usize| Error::MalformedIdentifier { input: s.to_owned(), position };

        let prefix = REPO_PREFIX.as_bytes();
        if let Some(pos) = first_mismatch(bytes, prefix) {
            return Err(malformed(pos));
        }
        let rest = &bytes[prefix.len()..];

        // Pick the sub-namespace token that matches longest; report the
        // furthest position reached otherwise.
        let mut best_fail = 0;
        let mut matched = None;
        for class in NamespaceClass::MINTED {
            let mut token = class.token().unwrap().as_bytes().to_vec();
            token.push(b'/');
            match first_mismatch(rest, &token) {
                None => {
                    matched = Some((class, token.len()));
                    break;
                }
                Some(p) => best_fail = best_fail.max(p),
            }
        }
        let (class, token_len) = matched.ok_or_else(|| malformed(prefix.len() + best_fail))?;

        let start = prefix.len() + token_len;
        let uuid_text = &bytes[start..];
        check_canonical_uuid(uuid_text).map_err(|p| malformed(start + p))?;
        // Grammar already verified; this cannot fail on canonical hex.
        let uuid = Uuid::parse_str(std::str::from_utf8(uuid_text).unwrap()).map_err(|_| malformed(start))?;
        Ok(RepoUri { class, uuid })
    }

    /// Parse and require a particular class.
    pub fn parse_class(s: &str, expected: NamespaceClass) -> Result<RepoUri> {
        let uri = RepoUri::parse(s)?;
        if uri.class != expected {
            return Err(Error::WrongClass { expected, found: s.to_owned() });
        }
        Ok(uri)
    }

    /// Accept either the full URI or the bare canonical UUID of the given class.
    pub fn parse_lenient(s: &str, class: NamespaceClass) -> Result<RepoUri> {
        if s.starts_with(REPO_PREFIX) {
            return RepoUri::parse_class(s, class);
        }
        check_canonical_uuid(s.as_bytes()).map_err(|position| Error::MalformedIdentifier { input: s.to_owned(), position })?;
        RepoUri::from_parts(class, Uuid::parse_str(s).expect("canonical uuid"))
    }

    pub fn class(&self) -> NamespaceClass {
        self.class
    }

    pub fn uuid(&self) -> Uuid {
        self.uuid
    }

    /// Canonical lowercase hyphenated UUID text.
    pub fn uuid_str(&self) -> String {
        self.uuid.hyphenated().to_string()
    }
}

impl fmt::Display for RepoUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}/{}", REPO_PREFIX, self.class.token().unwrap(), self.uuid.hyphenated())
    }
}

impl FromStr for RepoUri {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepoUri::parse(s)
    }
}

/// Position of the first byte of `input` that disagrees with `expected`,
/// or `None` if `input` starts with `expected`.
fn first_mismatch(input: &[u8], expected: &[u8]) -> Option<usize> {
    for (i, e) in expected.iter().enumerate() {
        match input.get(i) {
            Some(b) if b == e => {}
            _ => return Some(i),
        }
    }
    None
}

fn check_canonical_uuid(text: &[u8]) -> std::result::Result<(), usize> {
    const HYPHENS: [usize; 4] = [8, 13, 18, 23];
    for (i, &b) in text.iter().enumerate() {
        let ok = if HYPHENS.contains(&i) { b == b'-' } else { b.is_ascii_digit() || (b'a'..=b'f').contains(&b) };
        if !ok || i >= 36 {
            return Err(i);
        }
    }
    if text.len() < 36 {
        return Err(text.len());
    }
    Ok(())
}

/// Externally assigned identifier of a Digital Object, shared by all its versions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentId(String);

impl ContentId {
    pub fn new(uri: impl Into<String>) -> Result<ContentId> {
        let uri = uri.into();
        if !is_uri_like(&uri) {
            return Err(Error::MalformedContentId(uri));
        }
        Ok(ContentId(uri))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// scheme ":" non-empty remainder, with no whitespace or control characters
/// (they would break the line-oriented logs and manifests).
fn is_uri_like(s: &str) -> bool {
    let Some((scheme, rest)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    let scheme_ok =
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    scheme_ok && !rest.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control())
}
