//! HTTP binding of [`Service`]:
//!
//! * `GET|POST /oai/{tape-uuid}`: OAI-PMH 2.0
//! * `GET /openurl/{arc-uuid}`: OpenURL (KEV) datastream delivery
//! * `GET /locate?content_id=…`: versions of a Digital Object as JSON

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::routing::get;
use axum::Router;

use crate::service::{Response, Service};

fn into_http(r: Response) -> axum::response::Response {
    let mut out = axum::response::Response::new(Body::from(r.body));
    *out.status_mut() = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let headers = out.headers_mut();
    if let Ok(v) = HeaderValue::from_str(&r.content_type) {
        headers.insert(header::CONTENT_TYPE, v);
    }
    for (k, v) in r.headers {
        if let (Ok(k), Ok(v)) = (header::HeaderName::from_bytes(k.as_bytes()), HeaderValue::from_str(&v)) {
            headers.append(k, v);
        }
    }
    out
}

/// Run a blocking handler off the async workers.
async fn blocking(f: impl FnOnce() -> Response + Send + 'static) -> axum::response::Response {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => into_http(r),
        Err(_) => into_http(Response { status: 500, content_type: "text/plain".into(), headers: Vec::new(), body: b"handler failed\n".to_vec() }),
    }
}

async fn oai_get(State(s): State<Arc<Service>>, Path(tape): Path<String>, RawQuery(q): RawQuery) -> axum::response::Response {
    blocking(move || s.oai(&tape, q.as_deref().unwrap_or_default())).await
}

async fn oai_post(State(s): State<Arc<Service>>, Path(tape): Path<String>, body: String) -> axum::response::Response {
    blocking(move || s.oai(&tape, &body)).await
}

async fn openurl(State(s): State<Arc<Service>>, Path(arc): Path<String>, RawQuery(q): RawQuery) -> axum::response::Response {
    blocking(move || s.openurl(&arc, q.as_deref().unwrap_or_default())).await
}

async fn locate(State(s): State<Arc<Service>>, RawQuery(q): RawQuery) -> axum::response::Response {
    blocking(move || s.locate(q.as_deref().unwrap_or_default())).await
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/oai/{tape}", get(oai_get).post(oai_post))
        .route("/openurl/{arc}", get(openurl))
        .route("/locate", get(locate))
        .with_state(service)
}

/// Serve until the process is stopped.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(service, addr))
}
