//! OAI-PMH 2.0 data provider over one mounted tape.
//!
//! Identifiers are Package Identifiers, datestamps are record creation
//! datetimes at seconds granularity, and the only metadata format is the
//! tape payload under the configured prefix. Resumption tokens are
//! self-describing, so the provider keeps no per-harvest state.

use std::fs::File;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

use crate::datestamp::Datestamp;
use crate::error::Result;
use crate::store::MountedTape;
use crate::tape::read_record_at;
use crate::wrapper::WRAPPER_NS;
use crate::xml::{escape_attr, escape_text};

pub const OAI_NS: &str = "http://www.openarchives.org/OAI/2.0/";
const TOKEN_VERSION: &str = "1";

#[derive(Debug, Clone)]
pub struct OaiContext {
    pub base_url: String,
    pub metadata_prefix: String,
    pub page_size: usize,
    pub admin_email: String,
    pub response_date: Datestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OaiError {
    BadVerb(String),
    BadArgument(String),
    BadResumptionToken(String),
    CannotDisseminateFormat(String),
    IdDoesNotExist(String),
    NoRecordsMatch,
    NoSetHierarchy,
}

impl OaiError {
    pub fn code(&self) -> &'static str {
        match self {
            OaiError::BadVerb(_) => "badVerb",
            OaiError::BadArgument(_) => "badArgument",
            OaiError::BadResumptionToken(_) => "badResumptionToken",
            OaiError::CannotDisseminateFormat(_) => "cannotDisseminateFormat",
            OaiError::IdDoesNotExist(_) => "idDoesNotExist",
            OaiError::NoRecordsMatch => "noRecordsMatch",
            OaiError::NoSetHierarchy => "noSetHierarchy",
        }
    }

    fn message(&self) -> String {
        match self {
            OaiError::BadVerb(m) | OaiError::BadArgument(m) | OaiError::BadResumptionToken(m) => m.clone(),
            OaiError::CannotDisseminateFormat(p) => format!("metadata format {p} is not supported"),
            OaiError::IdDoesNotExist(id) => format!("no record with identifier {id}"),
            OaiError::NoRecordsMatch => "no records match the request".into(),
            OaiError::NoSetHierarchy => "this repository does not support sets".into(),
        }
    }

    /// badVerb and badArgument responses do not echo the arguments.
    fn echoes_arguments(&self) -> bool {
        !matches!(self, OaiError::BadVerb(_) | OaiError::BadArgument(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Identify,
    ListMetadataFormats,
    ListSets,
    GetRecord,
    ListRecords,
    ListIdentifiers,
}

impl Verb {
    fn parse(s: &str) -> Option<Verb> {
        Some(match s {
            "Identify" => Verb::Identify,
            "ListMetadataFormats" => Verb::ListMetadataFormats,
            "ListSets" => Verb::ListSets,
            "GetRecord" => Verb::GetRecord,
            "ListRecords" => Verb::ListRecords,
            "ListIdentifiers" => Verb::ListIdentifiers,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Verb::Identify => "Identify",
            Verb::ListMetadataFormats => "ListMetadataFormats",
            Verb::ListSets => "ListSets",
            Verb::GetRecord => "GetRecord",
            Verb::ListRecords => "ListRecords",
            Verb::ListIdentifiers => "ListIdentifiers",
        }
    }

    /// (required, optional, exclusive) arguments.
    fn arguments(self) -> (&'static [&'static str], &'static [&'static str], Option<&'static str>) {
        match self {
            Verb::Identify => (&[], &[], None),
            Verb::ListMetadataFormats => (&[], &["identifier"], None),
            Verb::ListSets => (&[], &[], Some("resumptionToken")),
            Verb::GetRecord => (&["identifier", "metadataPrefix"], &[], None),
            Verb::ListRecords | Verb::ListIdentifiers => (&["metadataPrefix"], &["from", "until", "set"], Some("resumptionToken")),
        }
    }
}

/// A validated request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OaiRequest {
    pub verb: Verb,
    pub args: Vec<(String, String)>,
}

impl OaiRequest {
    fn get(&self, key: &str) -> Option<&str> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Check verb and argument syntax.
pub fn parse_request(params: &[(String, String)]) -> std::result::Result<OaiRequest, OaiError> {
    let verbs: Vec<&str> = params.iter().filter(|(k, _)| k == "verb").map(|(_, v)| v.as_str()).collect();
    let verb = match verbs.as_slice() {
        [] => return Err(OaiError::BadVerb("missing verb".into())),
        [v] => Verb::parse(v).ok_or_else(|| OaiError::BadVerb(format!("illegal verb {v}")))?,
        _ => return Err(OaiError::BadVerb("repeated verb".into())),
    };
    let args: Vec<(String, String)> = params.iter().filter(|(k, _)| k != "verb").cloned().collect();
    for (i, (k, _)) in args.iter().enumerate() {
        if args[..i].iter().any(|(j, _)| j == k) {
            return Err(OaiError::BadArgument(format!("repeated argument {k}")));
        }
    }
    let (required, optional, exclusive) = verb.arguments();
    if let Some(ex) = exclusive {
        if args.iter().any(|(k, _)| k == ex) {
            if args.len() != 1 {
                return Err(OaiError::BadArgument(format!("{ex} is an exclusive argument")));
            }
            return Ok(OaiRequest { verb, args });
        }
    }
    for (k, _) in &args {
        if !required.contains(&k.as_str()) && !optional.contains(&k.as_str()) {
            return Err(OaiError::BadArgument(format!("illegal argument {k}")));
        }
    }
    if let Some(missing) = required.iter().find(|r| !args.iter().any(|(k, _)| k == *r)) {
        return Err(OaiError::BadArgument(format!("missing argument {missing}")));
    }
    Ok(OaiRequest { verb, args })
}

/// Parse from/until; day granularity widens `until` to the end of the day.
fn parse_bound(value: &str, is_until: bool) -> std::result::Result<(Datestamp, bool), OaiError> {
    let bad = || OaiError::BadArgument(format!("illegal datestamp {value}"));
    if value.len() == 10 {
        let d = Datestamp::parse_day(value).map_err(|_| bad())?;
        return Ok((if is_until { d.plus_seconds(86_399) } else { d }, true));
    }
    Datestamp::parse_iso(value).map(|d| (d, false)).map_err(|_| bad())
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    verb: Verb,
    prefix: String,
    tape: String,
    from: Option<Datestamp>,
    until: Option<Datestamp>,
    cursor: usize,
    hash: String,
}

impl Token {
    fn encode(&self) -> String {
        let opt = |d: Option<Datestamp>| d.map(|d| d.unix().to_string()).unwrap_or_default();
        let raw =
            [TOKEN_VERSION, self.verb.name(), &self.prefix, &self.tape, &opt(self.from), &opt(self.until), &self.cursor.to_string(), &self.hash]
                .join("|");
        URL_SAFE_NO_PAD.encode(raw)
    }

    fn decode(token: &str) -> Option<Token> {
        let raw = String::from_utf8(URL_SAFE_NO_PAD.decode(token).ok()?).ok()?;
        let f: Vec<&str> = raw.split('|').collect();
        let [v, verb, prefix, tape, from, until, cursor, hash] = f.as_slice() else { return None };
        if *v != TOKEN_VERSION {
            return None;
        }
        let opt = |s: &str| -> Option<Option<Datestamp>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse().ok().map(|n| Some(Datestamp::from_unix(n)))
            }
        };
        Some(Token {
            verb: Verb::parse(verb)?,
            prefix: prefix.to_string(),
            tape: tape.to_string(),
            from: opt(from)?,
            until: opt(until)?,
            cursor: cursor.parse().ok()?,
            hash: hash.to_string(),
        })
    }
}

fn envelope(ctx: &OaiContext, request_attrs: &[(String, String)], body: &str) -> String {
    let mut attrs = String::new();
    for (k, v) in request_attrs {
        attrs.push_str(&format!(" {k}=\"{}\"", escape_attr(v)));
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<OAI-PMH xmlns=\"{OAI_NS}\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" xsi:schemaLocation=\"{OAI_NS} http://www.openarchives.org/OAI/2.0/OAI-PMH.xsd\"><responseDate>{}</responseDate><request{attrs}>{}</request>{body}</OAI-PMH>\n",
        ctx.response_date,
        escape_text(&ctx.base_url)
    )
}

fn error_response(ctx: &OaiContext, params: &[(String, String)], err: &OaiError) -> String {
    let echo: Vec<(String, String)> = if err.echoes_arguments() { params.to_vec() } else { Vec::new() };
    envelope(ctx, &echo, &format!("<error code=\"{}\">{}</error>", err.code(), escape_text(&err.message())))
}

fn header(identifier: &str, datestamp: Datestamp) -> String {
    format!("<header><identifier>{}</identifier><datestamp>{datestamp}</datestamp></header>", escape_text(identifier))
}

/// Answer one request against `tape`. Protocol errors become OAI-PMH error
/// responses; only storage failures are returned as `Err`.
pub fn handle_oai(tape: &MountedTape, params: &[(String, String)], ctx: &OaiContext) -> Result<String> {
    let request = match parse_request(params) {
        Ok(r) => r,
        Err(e) => return Ok(error_response(ctx, &[], &e)),
    };
    let mut echo = vec![("verb".to_owned(), request.verb.name().to_owned())];
    echo.extend(request.args.iter().cloned());
    match respond(tape, &request, ctx)? {
        Ok(body) => Ok(envelope(ctx, &echo, &body)),
        Err(e) => Ok(error_response(ctx, &echo, &e)),
    }
}

fn respond(tape: &MountedTape, req: &OaiRequest, ctx: &OaiContext) -> Result<std::result::Result<String, OaiError>> {
    let check_prefix = |p: &str| if p == ctx.metadata_prefix { Ok(()) } else { Err(OaiError::CannotDisseminateFormat(p.to_owned())) };
    Ok(match req.verb {
        Verb::Identify => {
            let earliest = tape.by_datetime.entries().first().map_or(ctx.response_date, |e| e.datestamp);
            Ok(format!(
                "<Identify><repositoryName>XMLtape {}</repositoryName><baseURL>{}</baseURL><protocolVersion>2.0</protocolVersion><adminEmail>{}</adminEmail><earliestDatestamp>{earliest}</earliestDatestamp><deletedRecord>no</deletedRecord><granularity>YYYY-MM-DDThh:mm:ssZ</granularity></Identify>",
                tape.id,
                escape_text(&ctx.base_url),
                escape_text(&ctx.admin_email)
            ))
        }
        Verb::ListMetadataFormats => match req.get("identifier") {
            Some(id) if tape.by_id.lookup(id).is_none() => Err(OaiError::IdDoesNotExist(id.to_owned())),
            _ => Ok(format!(
                "<ListMetadataFormats><metadataFormat><metadataPrefix>{}</metadataPrefix><schema>{WRAPPER_NS}</schema><metadataNamespace>{WRAPPER_NS}</metadataNamespace></metadataFormat></ListMetadataFormats>",
                escape_text(&ctx.metadata_prefix)
            )),
        },
        Verb::ListSets => Err(OaiError::NoSetHierarchy),
        Verb::GetRecord => {
            let id = req.get("identifier").expect("required");
            let prefix = req.get("metadataPrefix").expect("required");
            match tape.by_id.lookup(id) {
                None => Err(OaiError::IdDoesNotExist(id.to_owned())),
                Some(_) if check_prefix(prefix).is_err() => Err(OaiError::CannotDisseminateFormat(prefix.to_owned())),
                Some(entry) => {
                    let record = tape.read(entry)?;
                    let payload = String::from_utf8(record.payload).map_err(|_| crate::Error::payload("payload is not UTF-8"))?;
                    Ok(format!(
                        "<GetRecord><record>{}<metadata>{payload}</metadata></record></GetRecord>",
                        header(&record.admin.record_id, record.admin.created)
                    ))
                }
            }
        }
        Verb::ListRecords | Verb::ListIdentifiers => return list(tape, req, ctx),
    })
}

fn list(tape: &MountedTape, req: &OaiRequest, ctx: &OaiContext) -> Result<std::result::Result<String, OaiError>> {
    let query = match list_query(tape, req, ctx) {
        Ok(q) => q,
        Err(e) => return Ok(Err(e)),
    };
    let matches = match tape.by_datetime.range(query.from, query.until) {
        Ok(m) => m,
        Err(_) => return Ok(Err(OaiError::BadArgument("from is later than until".into()))),
    };
    if matches.is_empty() {
        return Ok(Err(if query.cursor == 0 {
            OaiError::NoRecordsMatch
        } else {
            OaiError::BadResumptionToken("token is past the end of the list".into())
        }));
    }
    if query.cursor >= matches.len() {
        return Ok(Err(OaiError::BadResumptionToken("token is past the end of the list".into())));
    }
    let end = (query.cursor + ctx.page_size).min(matches.len());
    let mut body = format!("<{}>", req.verb.name());
    let mut file = if req.verb == Verb::ListRecords { Some(File::open(&tape.path)?) } else { None };
    for entry in &matches[query.cursor..end] {
        match file.as_mut() {
            Some(f) => {
                let record = read_record_at(f, entry.extent)?;
                let payload = std::str::from_utf8(&record.payload).map_err(|_| crate::Error::payload("payload is not UTF-8"))?;
                body.push_str(&format!("<record>{}<metadata>{payload}</metadata></record>", header(&record.admin.record_id, record.admin.created)));
            }
            None => body.push_str(&header(&entry.key, entry.datestamp)),
        }
    }
    if end < matches.len() || query.cursor > 0 {
        let token = if end < matches.len() {
            Token {
                verb: req.verb,
                prefix: ctx.metadata_prefix.clone(),
                tape: tape.id.uuid_str(),
                from: query.from,
                until: query.until,
                cursor: end,
                hash: tape.hash_prefix().to_owned(),
            }
            .encode()
        } else {
            String::new()
        };
        body.push_str(&format!("<resumptionToken completeListSize=\"{}\" cursor=\"{}\">{token}</resumptionToken>", matches.len(), query.cursor));
    }
    body.push_str(&format!("</{}>", req.verb.name()));
    Ok(Ok(body))
}

struct ListQuery {
    from: Option<Datestamp>,
    until: Option<Datestamp>,
    cursor: usize,
}

fn list_query(tape: &MountedTape, req: &OaiRequest, ctx: &OaiContext) -> std::result::Result<ListQuery, OaiError> {
    if let Some(raw) = req.get("resumptionToken") {
        let bad = || OaiError::BadResumptionToken(format!("invalid resumption token {raw}"));
        let t = Token::decode(raw).ok_or_else(bad)?;
        if t.verb != req.verb || t.tape != tape.id.uuid_str() || t.hash != tape.hash_prefix() || t.prefix != ctx.metadata_prefix || t.cursor == 0 {
            return Err(bad());
        }
        return Ok(ListQuery { from: t.from, until: t.until, cursor: t.cursor });
    }
    let prefix = req.get("metadataPrefix").expect("required");
    if prefix != ctx.metadata_prefix {
        return Err(OaiError::CannotDisseminateFormat(prefix.to_owned()));
    }
    let from = req.get("from").map(|v| parse_bound(v, false)).transpose()?;
    let until = req.get("until").map(|v| parse_bound(v, true)).transpose()?;
    if let (Some((f, fd)), Some((u, ud))) = (from, until) {
        if fd != ud {
            return Err(OaiError::BadArgument("from and until have different granularities".into()));
        }
        if f > u {
            return Err(OaiError::BadArgument("from is later than until".into()));
        }
    }
    if req.get("set").is_some() {
        return Err(OaiError::NoSetHierarchy);
    }
    Ok(ListQuery { from: from.map(|b| b.0), until: until.map(|b| b.0), cursor: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn request_syntax() {
        assert!(matches!(parse_request(&p(&[])), Err(OaiError::BadVerb(_))));
        assert!(matches!(parse_request(&p(&[("verb", "Nope")])), Err(OaiError::BadVerb(_))));
        assert!(matches!(parse_request(&p(&[("verb", "Identify"), ("verb", "Identify")])), Err(OaiError::BadVerb(_))));
        assert!(parse_request(&p(&[("verb", "Identify")])).is_ok());
        assert!(matches!(parse_request(&p(&[("verb", "Identify"), ("x", "1")])), Err(OaiError::BadArgument(_))));
        assert!(matches!(parse_request(&p(&[("verb", "GetRecord"), ("identifier", "a")])), Err(OaiError::BadArgument(_))));
        assert!(matches!(
            parse_request(&p(&[("verb", "ListRecords"), ("metadataPrefix", "didl"), ("metadataPrefix", "didl")])),
            Err(OaiError::BadArgument(_))
        ));
        assert!(matches!(
            parse_request(&p(&[("verb", "ListRecords"), ("metadataPrefix", "didl"), ("resumptionToken", "x")])),
            Err(OaiError::BadArgument(_))
        ));
        assert!(parse_request(&p(&[("verb", "ListIdentifiers"), ("resumptionToken", "x")])).is_ok());
        assert!(matches!(parse_request(&p(&[("verb", "ListRecords")])), Err(OaiError::BadArgument(_))));
    }

    #[test]
    fn bounds() {
        assert_eq!(parse_bound("2005-06-01", false).unwrap().0.to_string(), "2005-06-01T00:00:00Z");
        assert_eq!(parse_bound("2005-06-01", true).unwrap().0.to_string(), "2005-06-01T23:59:59Z");
        assert_eq!(parse_bound("2005-06-01T10:00:00Z", true).unwrap(), (Datestamp::parse_iso("2005-06-01T10:00:00Z").unwrap(), false));
        assert!(parse_bound("2005-06-01T10:00Z", true).is_err());
        assert!(parse_bound("yesterday", false).is_err());
    }

    #[test]
    fn token_round_trip() {
        let t = Token {
            verb: Verb::ListRecords,
            prefix: "didl".into(),
            tape: "00000000-0000-4000-8000-000000000000".into(),
            from: Some(Datestamp::from_unix(5)),
            until: None,
            cursor: 500,
            hash: "0123456789abcdef".into(),
        };
        assert_eq!(Token::decode(&t.encode()).unwrap(), t);
        assert!(Token::decode("garbage!").is_none());
        assert!(Token::decode(&URL_SAFE_NO_PAD.encode("2|ListRecords|didl|x||||h")).is_none());
    }
}
