//! The access service: mounted tapes and ARC files plus the locator, and
//! the protocol handlers over them. Transport-neutral; [`crate::http`]
//! adapts it to HTTP and the CLI calls it directly.
//!
//! Mounts and the locator are immutable snapshots behind `RwLock<Arc<_>>`.
//! Readers clone the `Arc` and never block on a remount; a miss on an
//! unknown tape or ARC file triggers a look at the store for a newly sealed
//! file, and a grown locator log is replayed into a fresh snapshot.

use std::collections::HashMap;
use std::fs;
use std::sync::{Arc, Mutex, RwLock};

use log::{info, warn};
use serde::Serialize;
use uuid::Uuid;

use crate::arc::ArcRecordHeader;
use crate::config::Config;
use crate::datestamp::Datestamp;
use crate::error::{Error, Result};
use crate::ids::NamespaceClass;
use crate::ingest::{ARC_PLACEHOLDER, TAPE_PLACEHOLDER};
use crate::locator::{Locator, Version};
use crate::oai::{handle_oai, OaiContext};
use crate::store::{MountedArc, MountedTape, Store};
use crate::wrapper::{encode_kev, parse_query, URL_VER};
use crate::RepoUri;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Response {
    fn new(status: u16, content_type: &str, body: impl Into<Vec<u8>>) -> Response {
        Response { status, content_type: content_type.to_owned(), headers: Vec::new(), body: body.into() }
    }

    fn text(status: u16, message: impl Into<String>) -> Response {
        let mut m = message.into();
        m.push('\n');
        Response::new(status, "text/plain; charset=utf-8", m)
    }

    fn from_error(e: &Error) -> Response {
        match e {
            Error::NotFound(_) => Response::text(404, e.to_string()),
            _ => Response::text(500, e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct LocateVersion {
    package_id: String,
    oai_base_url: String,
    created: String,
    get_record_url: String,
}

#[derive(Debug, Serialize)]
struct LocateResponse<'a> {
    content_id: &'a str,
    versions: Vec<LocateVersion>,
}

struct LocatorSnapshot {
    locator: Arc<Locator>,
    seen_len: u64,
}

type Mounts<T> = RwLock<Arc<HashMap<Uuid, Arc<T>>>>;

pub struct Service {
    store: Store,
    config: Config,
    tapes: Mounts<MountedTape>,
    arcs: Mounts<MountedArc>,
    locator: RwLock<Arc<LocatorSnapshot>>,
    /// Serializes mount and reload work; readers never take it.
    writer: Mutex<()>,
}

impl Service {
    /// Mount every sealed file under the store root. Files that fail to
    /// mount are logged and skipped.
    pub fn open(config: Config) -> Result<Service> {
        config.validate()?;
        let store = Store::new(&config.store);
        let mut tapes = HashMap::new();
        for id in store.tape_ids()? {
            match store.mount_tape(id) {
                Ok(t) => {
                    tapes.insert(id, Arc::new(t));
                }
                Err(e) => warn!("not mounting tape {id}: {e}"),
            }
        }
        let mut arcs = HashMap::new();
        for id in store.arc_ids()? {
            match store.mount_arc(id) {
                Ok(a) => {
                    arcs.insert(id, Arc::new(a));
                }
                Err(e) => warn!("not mounting ARC file {id}: {e}"),
            }
        }
        info!("mounted {} tapes and {} ARC files from {}", tapes.len(), arcs.len(), store.root().display());
        let locator = Locator::open(store.locator_path())?;
        let seen_len = locator.consumed();
        Ok(Service {
            store,
            config,
            tapes: RwLock::new(Arc::new(tapes)),
            arcs: RwLock::new(Arc::new(arcs)),
            locator: RwLock::new(Arc::new(LocatorSnapshot { locator: Arc::new(locator), seen_len })),
            writer: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn mounted_tapes(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.tapes.read().expect("lock").keys().copied().collect();
        ids.sort();
        ids
    }

    pub fn mounted_arcs(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.arcs.read().expect("lock").keys().copied().collect();
        ids.sort();
        ids
    }

    fn lookup<T>(
        &self,
        mounts: &Mounts<T>,
        id: &str,
        class: NamespaceClass,
        exists: impl Fn(Uuid) -> bool,
        mount: impl Fn(Uuid) -> Result<T>,
    ) -> Result<Arc<T>> {
        let not_found = || Error::NotFound(id.to_owned());
        let uuid = RepoUri::parse_lenient(id, class).map_err(|_| not_found())?.uuid();
        if let Some(m) = mounts.read().expect("lock").get(&uuid) {
            return Ok(m.clone());
        }
        if !exists(uuid) {
            return Err(not_found());
        }
        let _guard = self.writer.lock().expect("lock");
        if let Some(m) = mounts.read().expect("lock").get(&uuid) {
            return Ok(m.clone());
        }
        let mounted = Arc::new(mount(uuid)?);
        let mut next = HashMap::clone(&mounts.read().expect("lock"));
        next.insert(uuid, mounted.clone());
        *mounts.write().expect("lock") = Arc::new(next);
        info!("mounted {id}");
        Ok(mounted)
    }

    /// The mounted tape with this UUID (or tape URI), mounting it if it
    /// was sealed after startup.
    pub fn tape(&self, id: &str) -> Result<Arc<MountedTape>> {
        self.lookup(&self.tapes, id, NamespaceClass::Tape, |u| self.store.tape_path(u).is_file(), |u| self.store.mount_tape(u))
    }

    pub fn arc(&self, id: &str) -> Result<Arc<MountedArc>> {
        self.lookup(&self.arcs, id, NamespaceClass::Arc, |u| self.store.arc_path(u).is_file(), |u| self.store.mount_arc(u))
    }

    /// Current locator snapshot, replaying the log first if it grew.
    pub fn locator(&self) -> Result<Arc<Locator>> {
        let len = fs::metadata(self.store.locator_path()).map(|m| m.len()).unwrap_or(0);
        let snap = self.locator.read().expect("lock").clone();
        if len == snap.seen_len {
            return Ok(snap.locator.clone());
        }
        let _guard = self.writer.lock().expect("lock");
        let snap = self.locator.read().expect("lock").clone();
        if len == snap.seen_len {
            return Ok(snap.locator.clone());
        }
        let mut next = Locator::clone(&snap.locator);
        next.refresh()?;
        let next = Arc::new(next);
        *self.locator.write().expect("lock") = Arc::new(LocatorSnapshot { locator: next.clone(), seen_len: len });
        Ok(next)
    }

    pub fn oai_base_url(&self, tape: &RepoUri) -> String {
        self.config.oai_base_template.replace(TAPE_PLACEHOLDER, &tape.uuid_str())
    }

    pub fn openurl_base_url(&self, arc: &RepoUri) -> String {
        self.config.openurl_base_template.replace(ARC_PLACEHOLDER, &arc.uuid_str())
    }

    fn oai_context(&self, tape: &MountedTape) -> OaiContext {
        OaiContext {
            base_url: self.oai_base_url(&tape.id),
            metadata_prefix: self.config.metadata_prefix.clone(),
            page_size: self.config.page_size,
            admin_email: self.config.admin_email.clone(),
            response_date: Datestamp::now(),
        }
    }

    /// Record payload bytes, as GetRecord would embed them.
    pub fn get_record(&self, tape: &str, package_id: &str) -> Result<Vec<u8>> {
        Ok(self.tape(tape)?.get_record(package_id)?.payload)
    }

    pub fn get_datastream(&self, arc: &str, ds_id: &str) -> Result<(ArcRecordHeader, Vec<u8>)> {
        self.arc(arc)?.get_datastream(ds_id)
    }

    pub fn resolve_versions(&self, content_id: &str) -> Result<Vec<Version>> {
        Ok(self.locator()?.resolve_versions(content_id, &self.config.oai_base_template))
    }

    /// OAI-PMH request against one tape; `query` is the raw query string
    /// or form body.
    pub fn oai(&self, tape: &str, query: &str) -> Response {
        let tape = match self.tape(tape) {
            Ok(t) => t,
            Err(e) => return Response::from_error(&e),
        };
        let ctx = self.oai_context(&tape);
        // An undecodable query has no verb to speak of.
        let params = parse_query(query).unwrap_or_else(|| vec![("verb".into(), String::new())]);
        match handle_oai(&tape, &params, &ctx) {
            Ok(xml) => Response::new(200, "text/xml; charset=utf-8", xml),
            Err(e) => {
                warn!("OAI-PMH request on {} failed: {e}", tape.id);
                Response::from_error(&e)
            }
        }
    }

    /// OpenURL request against one ARC file.
    pub fn openurl(&self, arc: &str, query: &str) -> Response {
        let Some(params) = parse_query(query) else {
            return Response::text(400, "malformed query string");
        };
        let values = |key: &str| params.iter().filter(|(k, _)| k == key).map(|(_, v)| v.as_str()).collect::<Vec<_>>();
        let rft_id = match values("rft_id").as_slice() {
            [] => return Response::text(400, "missing rft_id"),
            [id] => id.to_string(),
            _ => return Response::text(400, "repeated rft_id"),
        };
        let mut warning = None;
        match values("url_ver").as_slice() {
            [] if self.config.strict_url_ver => return Response::text(400, format!("missing url_ver (expected {URL_VER})")),
            [] => warning = Some(format!("299 - \"url_ver missing; assumed {URL_VER}\"")),
            [URL_VER] => {}
            _ => return Response::text(400, format!("unsupported url_ver (expected {URL_VER})")),
        }
        let arc = match self.arc(arc) {
            Ok(a) => a,
            Err(e) => return Response::from_error(&e),
        };
        match arc.get_datastream(&rft_id) {
            Ok((header, data)) => {
                let mut r = Response::new(200, &header.content_type, data);
                if let Some(w) = warning {
                    r.headers.push(("Warning".into(), w));
                }
                r
            }
            Err(e) => Response::from_error(&e),
        }
    }

    /// Locator query; `query` must carry `content_id`.
    pub fn locate(&self, query: &str) -> Response {
        let Some(params) = parse_query(query) else {
            return Response::text(400, "malformed query string");
        };
        let ids: Vec<&str> = params.iter().filter(|(k, _)| k == "content_id").map(|(_, v)| v.as_str()).collect();
        let [content_id] = ids.as_slice() else {
            return Response::text(400, "exactly one content_id parameter is required");
        };
        let versions = match self.resolve_versions(content_id) {
            Ok(v) => v,
            Err(e) => return Response::from_error(&e),
        };
        let versions = versions
            .into_iter()
            .map(|v| LocateVersion {
                get_record_url: format!(
                    "{}?verb=GetRecord&identifier={}&metadataPrefix={}",
                    v.oai_base_url,
                    encode_kev(&v.package_id),
                    encode_kev(&self.config.metadata_prefix)
                ),
                package_id: v.package_id,
                oai_base_url: v.oai_base_url,
                created: v.created,
            })
            .collect();
        let body = serde_json::to_vec(&LocateResponse { content_id, versions }).expect("serializable");
        Response::new(200, "application/json", body)
    }
}
