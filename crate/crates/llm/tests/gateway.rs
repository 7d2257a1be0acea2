use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use lardo_llm::protocol::STAGE1_MARKER;
use lardo_llm::{
    cached_complete, Backend, CompletionSource, GatewayError, LiveClient, PromptRequest, ReplayCache, RetryPolicy,
};

/// Scripted HTTP server: answers each connection with the next (status,
/// body) pair and records request bodies.
struct Stub {
    url: String,
    bodies: Arc<Mutex<Vec<String>>>,
}

fn stub(script: Vec<(u16, String)>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&bodies);
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            assert!(request_line.starts_with("POST /v1/chat/completions"), "{request_line}");
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            seen.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = reader.into_inner();
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    Stub { url, bodies }
}

fn ok(text: &str) -> (u16, String) {
    (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string())
}

fn client(url: &str) -> LiveClient {
    let policy = RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(5),
        timeout: Duration::from_secs(10),
    };
    LiveClient::new(url, Some("secret".into()), policy, 4)
}

fn request() -> PromptRequest {
    PromptRequest::new("You are a chemist.", "Describe water.", "mistral-7b-instruct", 64).unwrap()
}

#[test]
fn live_completion_returns_first_choice() {
    let s = stub(vec![ok("hello")]);
    let r = client(&s.url).complete(&request()).unwrap();
    assert_eq!(r.text, "hello");
    assert_eq!(r.source, CompletionSource::Live);
    assert!(r.latency_ms.is_some());
    let body: serde_json::Value = serde_json::from_str(&s.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "mistral-7b-instruct");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Describe water.");
    assert_eq!(body["temperature"], 0.0);
}

#[test]
fn server_errors_are_retried() {
    let s = stub(vec![(500, "{}".into()), (503, "{}".into()), ok("finally")]);
    let r = client(&s.url).complete(&request()).unwrap();
    assert_eq!(r.text, "finally");
    assert_eq!(s.bodies.lock().unwrap().len(), 3);
}

#[test]
fn retries_stop_after_three_attempts() {
    let s = stub(vec![(429, "{}".into()), (500, "{}".into()), (502, "{}".into()), ok("late")]);
    let err = client(&s.url).complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::Status { status: 502, .. }), "{err}");
    assert_eq!(s.bodies.lock().unwrap().len(), 3);
}

#[test]
fn unauthorized_is_not_retried() {
    let s = stub(vec![(401, "{\"error\":\"bad key\"}".into()), ok("never")]);
    let err = client(&s.url).complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::Status { status: 401, .. }), "{err}");
    assert_eq!(s.bodies.lock().unwrap().len(), 1);
}

#[test]
fn malformed_and_empty_bodies() {
    let s = stub(vec![(200, "not json".into())]);
    assert!(matches!(client(&s.url).complete(&request()), Err(GatewayError::Malformed(_))));
    let s = stub(vec![ok("  ")]);
    assert!(matches!(client(&s.url).complete(&request()), Err(GatewayError::EmptyCompletion)));
}

#[test]
fn unreachable_endpoint() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = client(&format!("http://127.0.0.1:{port}")).complete(&request()).unwrap_err();
    assert!(matches!(err, GatewayError::Network(_)), "{err}");
}

#[test]
fn cache_replays_and_scopes_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("llm_cache.jsonl");
    let cache = ReplayCache::open(&path).unwrap();
    let req = PromptRequest::new("", &format!("{STAGE1_MARKER}\nBBBP"), "mock", 64).unwrap();

    let first = cached_complete(&req, &Backend::Mock, &cache).unwrap();
    assert_eq!(first.source, CompletionSource::Mock);
    let second = cached_complete(&req, &Backend::Mock, &cache).unwrap();
    assert_eq!(second.source, CompletionSource::Cache);
    assert_eq!(first.text, second.text);

    let seeded = PromptRequest { seed: Some(7), ..req.clone() };
    assert_eq!(cached_complete(&seeded, &Backend::Mock, &cache).unwrap().source, CompletionSource::Mock);
    assert_eq!(cache.len(), 2);

    drop(cache);
    let reopened = ReplayCache::open(&path).unwrap();
    assert_eq!(reopened.len(), 2);
    assert_eq!(cached_complete(&req, &Backend::Mock, &reopened).unwrap().source, CompletionSource::Cache);
}

#[test]
fn live_answers_are_cached() {
    let s = stub(vec![ok("from server")]);
    let dir = tempfile::tempdir().unwrap();
    let cache = ReplayCache::open(&dir.path().join("c.jsonl")).unwrap();
    let backend = Backend::Live(client(&s.url));
    assert_eq!(cached_complete(&request(), &backend, &cache).unwrap().source, CompletionSource::Live);
    // The stub has no more scripted answers; only the cache can respond.
    let again = cached_complete(&request(), &backend, &cache).unwrap();
    assert_eq!((again.source, again.text.as_str()), (CompletionSource::Cache, "from server"));
}

#[test]
fn corrupted_cache_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("llm_cache.jsonl");
    let good = format!("{{\"key\":\"{}\",\"value\":\"v\",\"created_at\":0}}", "a".repeat(64));
    std::fs::write(&path, format!("{good}\n{{truncated\n")).unwrap();
    match ReplayCache::open(&path) {
        Err(GatewayError::CacheCorrupt { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn concurrent_readers_and_writers() {
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ReplayCache::open(&dir.path().join("c.jsonl")).unwrap());
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let cache = Arc::clone(&cache);
            thread::spawn(move || {
                for j in 0..20 {
                    let req = PromptRequest::new("", &format!("q{}", (i * 7 + j) % 30), "mock", 8).unwrap();
                    cached_complete(&req, &Backend::Mock, &cache).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(cache.len(), 30);
    let lines = std::fs::read_to_string(cache.path()).unwrap().lines().count();
    assert_eq!(lines, 30);
}

#[test]
fn timeouts_are_retried() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    thread::spawn(move || {
        // Hold the first connection open without answering.
        let (silent, _) = listener.accept().unwrap();
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut buf = vec![0; length];
        reader.read_exact(&mut buf).unwrap();
        let (_, body) = ok("after timeout");
        let response = format!("HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len());
        reader.into_inner().write_all(response.as_bytes()).unwrap();
        drop(silent);
    });
    let policy = RetryPolicy {
        max_attempts: 3,
        initial_backoff: Duration::from_millis(5),
        timeout: Duration::from_millis(300),
    };
    let r = LiveClient::new(&url, None, policy, 1).complete(&request()).unwrap();
    assert_eq!(r.text, "after timeout");
}
