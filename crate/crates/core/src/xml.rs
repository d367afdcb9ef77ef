//! A small streaming XML tokenizer that reports the absolute byte offset of
//! every token it produces.
//!
//! It checks well-formedness (tag balance, attribute syntax, character and
//! entity references, a single root element) and namespace bindings: every
//! prefix in use must be declared inside the parsed input. DTDs are not
//! supported and are reported as errors.

use std::borrow::Cow;
use std::io::{self, Read};

const CHUNK: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlError {
    pub offset: u64,
    pub message: String,
}

impl XmlError {
    fn new(offset: u64, message: impl Into<String>) -> Self {
        XmlError { offset, message: message.into() }
    }
}

impl std::fmt::Display for XmlError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "byte {}: {}", self.offset, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Declaration,
    ProcessingInstruction,
    Comment,
    Start {
        name: String,
        attributes: Vec<Attribute>,
        /// `<name/>`: no matching `End` event follows.
        empty: bool,
        /// Resolved namespace URI; `None` for no namespace.
        namespace: Option<String>,
        /// Whether an in-document declaration determined `namespace`.
        /// False only for unprefixed elements with no `xmlns` in scope.
        namespace_declared: bool,
    },
    End {
        name: String,
    },
    Text(String),
    CData(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub event: Event,
    /// Absolute offset of the first byte of the token.
    pub start: u64,
    /// Absolute offset one past the last byte of the token.
    pub end: u64,
}

impl Token {
    pub fn is_whitespace(&self) -> bool {
        matches!(&self.event, Event::Text(t) if t.bytes().all(is_space))
    }
}

struct Frame {
    name: String,
    bindings: usize,
}

pub struct XmlPull<R> {
    reader: R,
    buf: Vec<u8>,
    pos: usize,
    base: u64,
    eof: bool,
    stack: Vec<Frame>,
    /// (prefix, uri); the empty prefix is the default namespace and an empty
    /// uri undeclares it.
    bindings: Vec<(String, String)>,
    root_seen: bool,
    finished: bool,
    failed: bool,
}

enum Step {
    Token(Event, usize),
    More,
}

impl<R: Read> XmlPull<R> {
    pub fn new(reader: R) -> Self {
        XmlPull::with_base(reader, 0)
    }

    /// `base` is the absolute offset of the first byte `reader` yields.
    pub fn with_base(reader: R, base: u64) -> Self {
        XmlPull {
            reader,
            buf: Vec::new(),
            pos: 0,
            base,
            eof: false,
            stack: Vec::new(),
            bindings: Vec::new(),
            root_seen: false,
            finished: false,
            failed: false,
        }
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn into_inner(self) -> R {
        self.reader
    }

    /// Absolute offset of the next unread byte.
    pub fn position(&self) -> u64 {
        self.base + self.pos as u64
    }

    pub fn next_token(&mut self) -> Result<Option<Token>, XmlError> {
        if self.finished || self.failed {
            return Ok(None);
        }
        let result = self.next_inner();
        if result.is_err() {
            self.failed = true;
        }
        result
    }

    fn next_inner(&mut self) -> Result<Option<Token>, XmlError> {
        loop {
            if self.pos >= self.buf.len() {
                if self.eof {
                    return self.finish().map(|_| None);
                }
                self.fill()?;
                continue;
            }
            match self.step()? {
                Step::More => {
                    if self.eof {
                        let msg = if self.buf[self.pos] == b'<' { "unterminated markup" } else { "unexpected end of input" };
                        return Err(self.err_at(self.pos, msg));
                    }
                    self.fill()?;
                }
                Step::Token(event, len) => {
                    let start = self.base + self.pos as u64;
                    self.pos += len;
                    let token = Token { event, start, end: start + len as u64 };
                    self.apply(&token)?;
                    return Ok(Some(token));
                }
            }
        }
    }

    fn finish(&mut self) -> Result<(), XmlError> {
        let at = self.position();
        if let Some(open) = self.stack.last() {
            return Err(XmlError::new(at, format!("unexpected end of input inside <{}>", open.name)));
        }
        if !self.root_seen {
            return Err(XmlError::new(at, "no root element"));
        }
        self.finished = true;
        Ok(())
    }

    fn fill(&mut self) -> Result<(), XmlError> {
        if self.pos > 0 && self.pos >= self.buf.len() / 2 {
            self.buf.drain(..self.pos);
            self.base += self.pos as u64;
            self.pos = 0;
        }
        let old = self.buf.len();
        self.buf.resize(old + CHUNK, 0);
        let n = loop {
            match self.reader.read(&mut self.buf[old..]) {
                Ok(n) => break n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    self.buf.truncate(old);
                    return Err(XmlError::new(self.base + old as u64, format!("read error: {e}")));
                }
            }
        };
        self.buf.truncate(old + n);
        if n == 0 {
            self.eof = true;
        }
        Ok(())
    }

    fn err_at(&self, rel: usize, message: impl Into<String>) -> XmlError {
        XmlError::new(self.base + rel as u64, message)
    }

    fn step(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        if s[0] != b'<' {
            return self.text();
        }
        if s.len() < 2 {
            return Ok(Step::More);
        }
        match s[1] {
            b'?' => self.processing_instruction(),
            b'!' => {
                if s.starts_with(b"<!--") {
                    self.comment()
                } else if s.starts_with(b"<![CDATA[") {
                    self.cdata()
                } else if b"<![CDATA[".starts_with(&s[..s.len().min(9)]) || b"<!--".starts_with(&s[..s.len().min(4)]) {
                    Ok(Step::More)
                } else if s.len() >= 9 && s.starts_with(b"<!DOCTYPE") {
                    Err(self.err_at(self.pos, "document type declarations are not supported"))
                } else if s.len() < 9 && b"<!DOCTYPE".starts_with(s) {
                    Ok(Step::More)
                } else {
                    Err(self.err_at(self.pos, "malformed markup declaration"))
                }
            }
            b'/' => self.end_tag(),
            _ => self.start_tag(),
        }
    }

    fn text(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        let len = match memchr(b'<', s) {
            Some(i) => i,
            None if self.eof => s.len(),
            None => return Ok(Step::More),
        };
        let raw = &s[..len];
        if self.stack.is_empty() {
            if let Some(i) = raw.iter().position(|b| !is_space(*b)) {
                return Err(self.err_at(self.pos + i, "text outside the root element"));
            }
            let text = std::str::from_utf8(raw).expect("whitespace is ascii");
            return Ok(Step::Token(Event::Text(text.to_owned()), len));
        }
        if let Some(i) = find(raw, b"]]>") {
            return Err(self.err_at(self.pos + i, "']]>' is not allowed in character data"));
        }
        let text = self.decode(raw, self.pos, false)?;
        Ok(Step::Token(Event::Text(text.into_owned()), len))
    }

    fn processing_instruction(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        let Some(close) = find(&s[2..], b"?>") else {
            return Ok(Step::More);
        };
        let body = &s[2..2 + close];
        let target_len = body.iter().position(|b| is_space(*b)).unwrap_or(body.len());
        let target = self.utf8(&body[..target_len], self.pos + 2)?;
        if !is_name(target) {
            return Err(self.err_at(self.pos + 2, "malformed processing instruction target"));
        }
        self.check_chars(body, self.pos + 2)?;
        let len = close + 4;
        if target == "xml" {
            if self.position() != 0 {
                return Err(self.err_at(self.pos, "XML declaration is only allowed at the start of the document"));
            }
            return Ok(Step::Token(Event::Declaration, len));
        }
        if target.eq_ignore_ascii_case("xml") {
            return Err(self.err_at(self.pos, "reserved processing instruction target"));
        }
        Ok(Step::Token(Event::ProcessingInstruction, len))
    }

    fn comment(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        let Some(close) = find(&s[4..], b"-->") else {
            return Ok(Step::More);
        };
        let body = &s[4..4 + close];
        if let Some(i) = find(body, b"--") {
            return Err(self.err_at(self.pos + 4 + i, "'--' is not allowed inside a comment"));
        }
        if body.last() == Some(&b'-') {
            return Err(self.err_at(self.pos + 3 + close, "comment may not end with '-'"));
        }
        self.check_chars(body, self.pos + 4)?;
        Ok(Step::Token(Event::Comment, close + 7))
    }

    fn cdata(&self) -> Result<Step, XmlError> {
        if self.stack.is_empty() {
            return Err(self.err_at(self.pos, "CDATA section outside the root element"));
        }
        let s = &self.buf[self.pos..];
        let Some(close) = find(&s[9..], b"]]>") else {
            return Ok(Step::More);
        };
        let body = &s[9..9 + close];
        let text = self.utf8(body, self.pos + 9)?;
        self.check_chars(body, self.pos + 9)?;
        Ok(Step::Token(Event::CData(text.to_owned()), close + 12))
    }

    fn end_tag(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        let Some(close) = memchr(b'>', s) else {
            return Ok(Step::More);
        };
        let inner = &s[2..close];
        let name_len = inner.iter().position(|b| is_space(*b)).unwrap_or(inner.len());
        if inner[name_len..].iter().any(|b| !is_space(*b)) {
            return Err(self.err_at(self.pos + 2 + name_len, "unexpected content in end tag"));
        }
        let name = self.utf8(&inner[..name_len], self.pos + 2)?;
        match self.stack.last() {
            Some(open) if open.name == name => Ok(Step::Token(Event::End { name: name.to_owned() }, close + 1)),
            Some(open) => Err(self.err_at(self.pos, format!("end tag </{name}> does not match <{}>", open.name))),
            None => Err(self.err_at(self.pos, format!("unexpected end tag </{name}>"))),
        }
    }

    fn start_tag(&self) -> Result<Step, XmlError> {
        let s = &self.buf[self.pos..];
        // Find the closing '>' while honouring quoted attribute values.
        let mut quote = None;
        let mut close = None;
        for (i, &b) in s.iter().enumerate().skip(1) {
            match quote {
                Some(q) if b == q => quote = None,
                Some(_) => {}
                None if b == b'"' || b == b'\'' => quote = Some(b),
                None if b == b'>' => {
                    close = Some(i);
                    break;
                }
                None => {}
            }
        }
        let Some(close) = close else {
            return Ok(Step::More);
        };
        if self.stack.is_empty() && self.root_seen {
            return Err(self.err_at(self.pos, "more than one root element"));
        }
        let empty = s[close - 1] == b'/' && close >= 2;
        let inner_end = if empty { close - 1 } else { close };
        let inner = &s[1..inner_end];
        let at = self.pos + 1;

        let name_len = inner.iter().position(|b| is_space(*b) || *b == b'/').unwrap_or(inner.len());
        let name = self.utf8(&inner[..name_len], at)?;
        if !is_name(name) {
            return Err(self.err_at(at, format!("malformed element name {name:?}")));
        }

        let mut attributes: Vec<Attribute> = Vec::new();
        let mut i = name_len;
        loop {
            let ws_start = i;
            while i < inner.len() && is_space(inner[i]) {
                i += 1;
            }
            if i == inner.len() {
                break;
            }
            if i == ws_start {
                return Err(self.err_at(at + i, "expected whitespace before attribute"));
            }
            let n_start = i;
            while i < inner.len() && !is_space(inner[i]) && inner[i] != b'=' {
                i += 1;
            }
            let attr_name = self.utf8(&inner[n_start..i], at + n_start)?;
            if !is_name(attr_name) {
                return Err(self.err_at(at + n_start, format!("malformed attribute name {attr_name:?}")));
            }
            while i < inner.len() && is_space(inner[i]) {
                i += 1;
            }
            if i == inner.len() || inner[i] != b'=' {
                return Err(self.err_at(at + i, format!("expected '=' after attribute {attr_name}")));
            }
            i += 1;
            while i < inner.len() && is_space(inner[i]) {
                i += 1;
            }
            let q = match inner.get(i) {
                Some(&q) if q == b'"' || q == b'\'' => q,
                _ => return Err(self.err_at(at + i, "expected quoted attribute value")),
            };
            let v_start = i + 1;
            let Some(v_len) = memchr(q, &inner[v_start..]) else {
                return Err(self.err_at(at + i, "unterminated attribute value"));
            };
            let raw = &inner[v_start..v_start + v_len];
            if let Some(lt) = memchr(b'<', raw) {
                return Err(self.err_at(at + v_start + lt, "'<' is not allowed in attribute values"));
            }
            let value = self.decode(raw, at + v_start, true)?.into_owned();
            if attributes.iter().any(|a| a.name == attr_name) {
                return Err(self.err_at(at + n_start, format!("duplicate attribute {attr_name}")));
            }
            attributes.push(Attribute { name: attr_name.to_owned(), value });
            i = v_start + v_len + 1;
        }

        let (namespace, namespace_declared) = self.resolve_element(name, &attributes, at)?;
        Ok(Step::Token(Event::Start { name: name.to_owned(), attributes, empty, namespace, namespace_declared }, close + 1))
    }

    /// Resolve the element's namespace taking its own declarations into
    /// account, and check every prefixed attribute is bound.
    fn resolve_element(&self, name: &str, attributes: &[Attribute], at: usize) -> Result<(Option<String>, bool), XmlError> {
        let mut local: Vec<(&str, &str)> = Vec::new();
        for a in attributes {
            if a.name == "xmlns" {
                local.push(("", &a.value));
            } else if let Some(prefix) = a.name.strip_prefix("xmlns:") {
                if prefix == "xmlns" || (prefix == "xml") != (a.value == XML_NS) {
                    return Err(self.err_at(at, format!("illegal namespace declaration {}", a.name)));
                }
                if a.value.is_empty() {
                    return Err(self.err_at(at, format!("prefix {prefix} may not be undeclared")));
                }
                local.push((prefix, &a.value));
            }
        }
        let lookup = |prefix: &str| -> Option<String> {
            if prefix == "xml" {
                return Some(XML_NS.to_owned());
            }
            local
                .iter()
                .rev()
                .find(|(p, _)| *p == prefix)
                .map(|(_, u)| (*u).to_owned())
                .or_else(|| self.bindings.iter().rev().find(|(p, _)| p == prefix).map(|(_, u)| u.clone()))
        };

        for a in attributes {
            if a.name == "xmlns" || a.name.starts_with("xmlns:") {
                continue;
            }
            if let Some((prefix, _)) = split_qname(&a.name) {
                if lookup(prefix).is_none() {
                    return Err(self.err_at(at, format!("unbound namespace prefix {prefix:?} on attribute {}", a.name)));
                }
            }
        }
        match split_qname(name) {
            Some(("xmlns", _)) => Err(self.err_at(at, "elements may not use the xmlns prefix")),
            Some((prefix, _)) => match lookup(prefix) {
                Some(uri) => Ok((Some(uri), true)),
                None => Err(self.err_at(at, format!("unbound namespace prefix {prefix:?} on element {name}"))),
            },
            None => match lookup("") {
                Some(uri) if uri.is_empty() => Ok((None, true)),
                Some(uri) => Ok((Some(uri), true)),
                None => Ok((None, false)),
            },
        }
    }

    fn apply(&mut self, token: &Token) -> Result<(), XmlError> {
        match &token.event {
            Event::Start { name, attributes, empty, .. } => {
                self.root_seen = true;
                if *empty {
                    return Ok(());
                }
                let before = self.bindings.len();
                for a in attributes {
                    if a.name == "xmlns" {
                        self.bindings.push((String::new(), a.value.clone()));
                    } else if let Some(prefix) = a.name.strip_prefix("xmlns:") {
                        self.bindings.push((prefix.to_owned(), a.value.clone()));
                    }
                }
                self.stack.push(Frame { name: name.clone(), bindings: self.bindings.len() - before });
            }
            Event::End { .. } => {
                let frame = self.stack.pop().expect("end tag matched an open element");
                let keep = self.bindings.len() - frame.bindings;
                self.bindings.truncate(keep);
            }
            _ => {}
        }
        Ok(())
    }

    fn utf8<'a>(&self, bytes: &'a [u8], rel: usize) -> Result<&'a str, XmlError> {
        std::str::from_utf8(bytes).map_err(|e| self.err_at(rel + e.valid_up_to(), "invalid UTF-8"))
    }

    fn check_chars(&self, bytes: &[u8], rel: usize) -> Result<(), XmlError> {
        let text = self.utf8(bytes, rel)?;
        for (i, c) in text.char_indices() {
            if !is_xml_char(c) {
                return Err(self.err_at(rel + i, format!("character U+{:04X} is not allowed", c as u32)));
            }
        }
        Ok(())
    }

    /// Validate and expand entity and character references. Attribute values
    /// additionally get whitespace normalisation.
    fn decode<'a>(&self, raw: &'a [u8], rel: usize, attribute: bool) -> Result<Cow<'a, str>, XmlError> {
        self.check_chars(raw, rel)?;
        let text = std::str::from_utf8(raw).expect("checked");
        let needs_work = text.contains('&') || (attribute && text.bytes().any(|b| matches!(b, b'\t' | b'\n' | b'\r')));
        if !needs_work {
            return Ok(Cow::Borrowed(text));
        }
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        let mut offset = rel;
        while let Some(amp) = rest.find('&') {
            push_normalised(&mut out, &rest[..amp], attribute);
            let after = &rest[amp + 1..];
            let Some(semi) = after.find(';') else {
                return Err(self.err_at(offset + amp, "unterminated entity reference"));
            };
            let entity = &after[..semi];
            let ch = match entity {
                "amp" => '&',
                "lt" => '<',
                "gt" => '>',
                "quot" => '"',
                "apos" => '\'',
                _ => {
                    let code = if let Some(hex) = entity.strip_prefix("#x") {
                        u32::from_str_radix(hex, 16).ok().filter(|_| !hex.is_empty() && hex.bytes().all(|b| b.is_ascii_hexdigit()))
                    } else if let Some(dec) = entity.strip_prefix('#') {
                        dec.parse::<u32>().ok().filter(|_| !dec.is_empty() && dec.bytes().all(|b| b.is_ascii_digit()))
                    } else {
                        return Err(self.err_at(offset + amp, format!("undefined entity &{entity};")));
                    };
                    match code.and_then(char::from_u32).filter(|c| is_xml_char(*c)) {
                        Some(c) => c,
                        None => return Err(self.err_at(offset + amp, format!("invalid character reference &{entity};"))),
                    }
                }
            };
            out.push(ch);
            let consumed = amp + 1 + semi + 1;
            rest = &rest[consumed..];
            offset += consumed;
        }
        push_normalised(&mut out, rest, attribute);
        Ok(Cow::Owned(out))
    }
}

fn push_normalised(out: &mut String, s: &str, attribute: bool) {
    if attribute {
        out.extend(s.chars().map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c }));
    } else {
        out.push_str(s);
    }
}

pub const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

pub fn split_qname(name: &str) -> Option<(&str, &str)> {
    name.split_once(':')
}

pub fn local_name(name: &str) -> &str {
    split_qname(name).map_or(name, |(_, l)| l)
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    let start_ok = |c: char| c.is_ascii_alphabetic() || c == '_' || c == ':' || (!c.is_ascii() && is_xml_char(c));
    start_ok(first)
        && chars.all(|c| start_ok(c) || c.is_ascii_digit() || c == '-' || c == '.')
        && s.matches(':').count() <= 1
        && !s.starts_with(':')
        && !s.ends_with(':')
}

fn memchr(needle: u8, hay: &[u8]) -> Option<usize> {
    hay.iter().position(|b| *b == needle)
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Escape character data for element content.
pub fn escape_text(s: &str) -> Cow<'_, str> {
    if !s.contains(['&', '<', '>', '\r']) {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

/// Escape a double-quoted attribute value so it survives normalisation.
pub fn escape_attr(s: &str) -> Cow<'_, str> {
    if !s.contains(['&', '<', '>', '"', '\t', '\n', '\r']) {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

/// Tokenize a complete document held in memory.
pub fn tokenize(bytes: &[u8]) -> Result<Vec<Token>, XmlError> {
    let mut parser = XmlPull::new(bytes);
    let mut tokens = Vec::new();
    while let Some(t) = parser.next_token()? {
        tokens.push(t);
    }
    Ok(tokens)
}

/// Check that `bytes` is exactly one element (no prolog, no surrounding
/// whitespace) that carries every namespace declaration it relies on,
/// including a default namespace declaration (possibly `xmlns=""`) for any
/// unprefixed element. Such an element can be embedded anywhere without its
/// meaning changing.
pub fn check_self_contained_element(bytes: &[u8]) -> Result<(), XmlError> {
    if bytes.first() != Some(&b'<') {
        return Err(XmlError::new(0, "expected an element"));
    }
    if bytes.last() != Some(&b'>') {
        return Err(XmlError::new(bytes.len().saturating_sub(1) as u64, "trailing content after element"));
    }
    let mut parser = XmlPull::new(bytes);
    let mut first = true;
    while let Some(token) = parser.next_token()? {
        match &token.event {
            Event::Declaration | Event::ProcessingInstruction | Event::Comment if parser.depth() == 0 && first => {
                return Err(XmlError::new(token.start, "expected an element"));
            }
            Event::Start { name, namespace_declared, namespace, .. } => {
                if first && namespace.is_none() {
                    return Err(XmlError::new(token.start, format!("element {name} is not namespace-qualified")));
                }
                if !namespace_declared {
                    return Err(XmlError::new(token.start, format!("element {name} relies on an undeclared default namespace")));
                }
                first = false;
            }
            _ => {}
        }
        if parser.depth() == 0 && !first && token.end != bytes.len() as u64 {
            if let Event::Start { empty: true, .. } | Event::End { .. } = token.event {
                return Err(XmlError::new(token.end, "trailing content after element"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A reader that hands out one byte at a time, to exercise refills.
    struct Trickle<'a>(&'a [u8]);

    impl Read for Trickle<'_> {
        fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
            if self.0.is_empty() || buf.is_empty() {
                return Ok(0);
            }
            buf[0] = self.0[0];
            self.0 = &self.0[1..];
            Ok(1)
        }
    }

    fn tokens_of(s: &str) -> Vec<Token> {
        tokenize(s.as_bytes()).unwrap()
    }

    #[test]
    fn offsets_cover_input() {
        let doc = r#"<?xml version="1.0"?>
<a xmlns="urn:x" k='v&amp;w'><!-- c --><b/>text<![CDATA[</a>]]></a>
"#;
        let toks = tokens_of(doc);
        let mut at = 0;
        for t in &toks {
            assert_eq!(t.start, at);
            at = t.end;
        }
        assert_eq!(at, doc.len() as u64);
        let slices: Vec<&str> = toks.iter().map(|t| &doc[t.start as usize..t.end as usize]).collect();
        assert_eq!(slices[0], r#"<?xml version="1.0"?>"#);
        assert_eq!(slices[2], r#"<a xmlns="urn:x" k='v&amp;w'>"#);
        assert!(matches!(&toks[2].event, Event::Start { attributes, .. } if attributes[1].value == "v&w"));
        assert!(matches!(&toks[6].event, Event::CData(t) if t == "</a>"));
    }

    #[test]
    fn trickle_matches_bulk() {
        let doc = br#"<r xmlns:p="urn:p"><p:x a="1 &#x3c; 2">t&lt;</p:x><!--x--><![CDATA[]]]]><?pi data?></r>"#;
        let bulk = tokenize(doc).unwrap();
        let mut p = XmlPull::new(Trickle(doc));
        let mut trickled = Vec::new();
        while let Some(t) = p.next_token().unwrap() {
            trickled.push(t);
        }
        assert_eq!(bulk, trickled);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "<a>",
            "<a></b>",
            "<a/><b/>",
            "text",
            "<a>&foo;</a>",
            "<a>&amp</a>",
            "<a x='1' x='2'/>",
            "<a x=1/>",
            "<a><!-- a -- b --></a>",
            "<a>]]></a>",
            "<p:a/>",
            "<a xmlns:p=''/>",
            "<a p:x='1'/>",
            "<!DOCTYPE a><a/>",
            "<a>&#0;</a>",
            "<a>\u{1}</a>",
            "<a/>trailing",
            "<a x='<'/>",
            "<a><?xml version='1.0'?></a>",
            "",
        ] {
            assert!(tokenize(bad.as_bytes()).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn error_offsets() {
        let err = tokenize(b"<a><b></a>").unwrap_err();
        assert_eq!(err.offset, 6);
        let err = tokenize(b"<a>\xff</a>").unwrap_err();
        assert_eq!(err.offset, 3);
    }

    #[test]
    fn namespace_resolution() {
        let toks = tokens_of(r#"<a xmlns="urn:d"><b xmlns=""><c/></b><p:e xmlns:p="urn:p"/></a>"#);
        let ns: Vec<_> = toks
            .iter()
            .filter_map(|t| match &t.event {
                Event::Start { namespace, namespace_declared, .. } => Some((namespace.clone(), *namespace_declared)),
                _ => None,
            })
            .collect();
        assert_eq!(ns, vec![(Some("urn:d".into()), true), (None, true), (None, true), (Some("urn:p".into()), true),]);
        let toks = tokens_of("<a/>");
        assert!(matches!(&toks[0].event, Event::Start { namespace: None, namespace_declared: false, .. }));
    }

    #[test]
    fn self_containment() {
        assert!(check_self_contained_element(br#"<x:a xmlns:x="urn:x"><x:b/></x:a>"#).is_ok());
        assert!(check_self_contained_element(br#"<a xmlns="urn:x"><b/></a>"#).is_ok());
        assert!(check_self_contained_element(br#"<a xmlns="urn:x"><b xmlns=""/></a>"#).is_ok());
        assert!(check_self_contained_element(b"<a/>").is_err());
        assert!(check_self_contained_element(br#"<x:a xmlns:x="urn:x"><b/></x:a>"#).is_err());
        assert!(check_self_contained_element(br#"<x:a/>"#).is_err());
        assert!(check_self_contained_element(br#" <a xmlns="urn:x"/>"#).is_err());
        assert!(check_self_contained_element(br#"<a xmlns="urn:x"/><b xmlns="urn:x"/>"#).is_err());
        assert!(check_self_contained_element(br#"<a xmlns="urn:x"/><!--c-->"#).is_err());
    }

    #[test]
    fn escaping_round_trips_through_decoder() {
        let nasty = "a&b<c>d\"e'f\tg\nh\ri ]]>";
        let doc = format!(r#"<a v="{}">{}</a>"#, escape_attr(nasty), escape_text(nasty).replace("]]>", "]]&gt;"));
        let toks = tokens_of(&doc);
        assert!(matches!(&toks[0].event, Event::Start { attributes, .. } if attributes[0].value == nasty));
        assert!(matches!(&toks[1].event, Event::Text(t) if t == nasty));
    }
}
