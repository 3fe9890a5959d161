//! Remote detector adapter against a scripted local endpoint.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;

use mgtd_eval::corpus::{Decoding, Document, Domain, Label, Model};
use mgtd_eval::detector::{DetectorHandle, DetectorKind};
use mgtd_eval::Error;

struct ReceivedRequest {
    authorization: Option<String>,
    body: String,
}

/// Serves the scripted `(status, body)` responses in order, one connection
/// each, and reports what it saw.
fn scripted_endpoint(script: Vec<(u16, String)>) -> (String, mpsc::Receiver<ReceivedRequest>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind fake endpoint");
    let url = format!("http://{}/score", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        for (status, body) in script {
            let (mut stream, _) = listener.accept().expect("accept");
            let mut raw = Vec::new();
            let mut buf = [0u8; 4096];
            let header_end = loop {
                let n = stream.read(&mut buf).expect("read request");
                raw.extend_from_slice(&buf[..n]);
                if let Some(pos) = raw.windows(4).position(|w| w == b"\r\n\r\n") {
                    break pos + 4;
                }
            };
            let head = String::from_utf8_lossy(&raw[..header_end]).to_string();
            let content_length: usize = head
                .lines()
                .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(str::trim).map(String::from))
                .and_then(|v| v.parse().ok())
                .unwrap_or(0);
            while raw.len() < header_end + content_length {
                let n = stream.read(&mut buf).expect("read body");
                raw.extend_from_slice(&buf[..n]);
            }
            let authorization = head
                .lines()
                .find_map(|l| l.to_ascii_lowercase().starts_with("authorization:").then(|| l.split_once(':').unwrap().1.trim().to_string()));
            tx.send(ReceivedRequest {
                authorization,
                body: String::from_utf8_lossy(&raw[header_end..]).to_string(),
            })
            .ok();
            let reason = if status == 200 { "OK" } else { "ERR" };
            let response = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).expect("write response");
        }
    });
    (url, rx)
}

fn docs() -> Vec<Document> {
    ["d1", "d2"]
        .iter()
        .map(|id| Document {
            id: id.to_string(),
            text: format!("text of {id}"),
            label: Label::Machine,
            model: Model::Gpt2,
            domain: Domain::News,
            decoding: Decoding::Sampling,
            attack: None,
            source_id: "h1".into(),
            adv_source_id: String::new(),
        })
        .collect()
}

fn handle(url: &str, retries: u32) -> DetectorHandle {
    DetectorHandle {
        detector_id: "remote".into(),
        kind: DetectorKind::RemoteEndpoint {
            url: url.to_string(),
            timeout_secs: 5,
            max_batch: 32,
            retries,
            backoff_ms: 1,
        },
    }
}

#[test]
fn retries_transient_failures_then_succeeds() {
    let ok = r#"{"scores":[{"id":"d1","score":0.1},{"id":"d2","score":0.9}]}"#;
    let (url, rx) = scripted_endpoint(vec![
        (500, "{}".into()),
        (503, "{}".into()),
        (200, ok.into()),
    ]);
    let scores = handle(&url, 3).get_scores(&docs()).unwrap();
    assert_eq!(scores.len(), 2);
    assert_eq!(scores[0].doc_id, "d1");
    assert_eq!(scores[0].score, 0.1);
    assert_eq!(scores[1].score, 0.9);
    let requests: Vec<ReceivedRequest> = rx.iter().take(3).collect();
    assert_eq!(requests.len(), 3, "expected one request per attempt");
    assert!(requests[2].body.contains("\"text of d1\""));
}

#[test]
fn exhausted_retries_report_attempt_count() {
    let (url, _rx) = scripted_endpoint(vec![(500, "{}".into()), (500, "{}".into())]);
    let err = handle(&url, 2).get_scores(&docs()).unwrap_err();
    match err {
        Error::Remote { attempts, .. } => assert_eq!(attempts, 2),
        other => panic!("expected remote error, got {other:?}"),
    }
}

#[test]
fn client_error_is_fatal_without_retry() {
    let (url, rx) = scripted_endpoint(vec![(400, "{}".into())]);
    let err = handle(&url, 3).get_scores(&docs()).unwrap_err();
    assert!(matches!(err, Error::Remote { .. }), "got {err:?}");
    // Only the single rejected request was sent; no retries followed.
    drop(rx.recv().unwrap());
    assert!(rx.recv_timeout(std::time::Duration::from_millis(200)).is_err());
}

#[test]
fn missing_document_score_is_fatal() {
    let partial = r#"{"scores":[{"id":"d1","score":0.1}]}"#;
    let (url, _rx) = scripted_endpoint(vec![(200, partial.into())]);
    let err = handle(&url, 3).get_scores(&docs()).unwrap_err();
    assert!(matches!(err, Error::MissingScore(id) if id == "d2"));
}

#[test]
fn bearer_token_forwarded_from_environment() {
    let ok = r#"{"scores":[{"id":"d1","score":0.1},{"id":"d2","score":0.9}]}"#;
    let (url, rx) = scripted_endpoint(vec![(200, ok.into())]);
    std::env::set_var(mgtd_eval::detector::TOKEN_ENV_VAR, "sekrit");
    let result = handle(&url, 1).get_scores(&docs());
    std::env::remove_var(mgtd_eval::detector::TOKEN_ENV_VAR);
    result.unwrap();
    let request = rx.recv().unwrap();
    assert_eq!(request.authorization.as_deref(), Some("Bearer sekrit"));
}
