use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

use og_core::api::adapters::http::serve;
use og_core::api::adapters::{MemoryTelemetry, NoReference, WebAdapter};
use og_core::api::core::{ApiConfig, InvestigatorService};
use og_core::api::store_ports;
use og_core::contract::builtin;
use og_core::store::LockOptions;
use serde_json::Value;

fn exchange(addr: std::net::SocketAddr, raw: &str) -> (u16, Value) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(raw.as_bytes()).unwrap();
    let mut text = String::new();
    stream.read_to_string(&mut text).unwrap();
    let status: u16 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text.split("\r\n\r\n").nth(1).unwrap_or("");
    (status, serde_json::from_str(body).unwrap())
}

#[test]
fn serves_http_over_a_socket() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ApiConfig { data_dir: tmp.path().to_path_buf(), token: Some("t0k".into()), ..ApiConfig::default() };
    let telemetry = Arc::new(MemoryTelemetry::default());
    let service = InvestigatorService::new(store_ports(&cfg, LockOptions::default(), Arc::new(NoReference)), builtin::api_service());
    let web = Arc::new(WebAdapter::new(Arc::new(service), telemetry.clone(), builtin::api_service(), Arc::new(|| 1)));

    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = rt.spawn(serve(listener, web, async {
        let _ = stopped.await;
    }));

    let (status, body) = exchange(addr, "GET /api/v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!((status, body["status"].as_str()), (200, Some("degraded")));
    let (status, _) = exchange(addr, "GET /api/v1/anomalies HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!(status, 401);
    let (status, body) = exchange(
        addr,
        "GET /api/v1/anomalies?bbox=0,0,10,10 HTTP/1.1\r\nHost: x\r\nAuthorization: Bearer t0k\r\nConnection: close\r\n\r\n",
    );
    assert_eq!((status, body["items"].clone()), (200, serde_json::json!([])));
    let junk = "{not json";
    let (status, body) = exchange(
        addr,
        &format!(
            "POST /api/v1/labels HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{junk}",
            junk.len()
        ),
    );
    assert_eq!((status, body["error"]["kind"].as_str()), (400, Some("bad_request")));

    stop.send(()).unwrap();
    rt.block_on(server).unwrap().unwrap();
    assert_eq!(telemetry.events().len(), 4);
}
