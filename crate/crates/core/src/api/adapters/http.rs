//! HTTP/1.1 transport for the web adapter.

use std::future::Future;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use serde_json::Value;

use super::web::WebAdapter;
use crate::contract::{HttpRequest, Method};

pub fn router(web: Arc<WebAdapter>) -> Router {
    Router::new().fallback(handle).with_state(web)
}

async fn handle(
    State(web): State<Arc<WebAdapter>>,
    method: axum::http::Method,
    uri: Uri,
    headers: HeaderMap,
    bytes: Bytes,
) -> Response {
    let target = uri.path_and_query().map(|p| p.as_str().to_string()).unwrap_or_else(|| uri.path().to_string());
    let response = tokio::task::spawn_blocking(move || {
        // Methods outside the contract's vocabulary route nowhere; DELETE
        // on a GET path is reported as a violation by the contract check.
        let m = Method::from_str(method.as_str()).unwrap_or(Method::Delete);
        let mut req = HttpRequest::from_target(m, &target);
        for (name, value) in &headers {
            if let Ok(v) = value.to_str() {
                req.headers.insert(name.as_str().to_ascii_lowercase(), v.to_string());
            }
        }
        if bytes.is_empty() {
            return web.handle(&req);
        }
        match serde_json::from_slice::<Value>(&bytes) {
            Ok(body) => {
                req.body = Some(body);
                web.handle(&req)
            }
            Err(e) => web.unreadable(&req, &format!("request body is not JSON: {e}")),
        }
    })
    .await;
    match response {
        Ok(r) => {
            let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            (status, Json(r.body)).into_response()
        }
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    web: Arc<WebAdapter>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(web)).with_graceful_shutdown(shutdown).await
}

/// Bind `addr` and serve on a fresh multi-threaded runtime until Ctrl-C.
/// `on_bound` sees the bound address before requests are accepted.
pub fn serve_blocking(addr: SocketAddr, web: Arc<WebAdapter>, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        on_bound(listener.local_addr()?);
        serve(listener, web, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
