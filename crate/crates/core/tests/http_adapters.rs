//! Wire-level checks of the HTTP adapters against a local one-shot server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use bcg_core::gateway::{
    ChatMessage, ChatRequest, Gateway, GatewayError, ProviderConfig, ProviderKind,
    RecordingSleeper, RetryPolicy, TranscriptSink,
};

const SENTINEL: &str = "sk-SENTINEL-7f3a9c";

struct Captured {
    request_line: String,
    headers: Vec<(String, String)>,
    body: String,
}

impl Captured {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Serves `replies` (status, body) in order, one connection each.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut headers = Vec::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (k, v) = line.split_once(':').unwrap();
                headers.push((k.trim().to_string(), v.trim().to_string()));
            }
            let len: usize = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                .map_or(0, |(_, v)| v.parse().unwrap());
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured {
                request_line: request_line.trim_end().to_string(),
                headers,
                body: String::from_utf8(buf).unwrap(),
            });
            let mut stream = stream;
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn gateway(
    kind: ProviderKind,
    base_url: String,
    env: &str,
    sleeper: Arc<RecordingSleeper>,
) -> Gateway {
    std::env::set_var(env, SENTINEL);
    let cfg = ProviderConfig {
        id: "p".into(),
        kind,
        base_url,
        credential_env: Some(env.into()),
        max_concurrent: 1,
        retry: RetryPolicy {
            max_attempts: 3,
            base_backoff: Duration::from_millis(10),
            jitter: 0.0,
        },
    };
    Gateway::from_configs(&[cfg]).unwrap().with_sleeper(sleeper)
}

fn request() -> ChatRequest {
    ChatRequest::new(
        "p",
        "model-x",
        vec![ChatMessage::system("sys"), ChatMessage::user("hello")],
    )
}

fn openai_reply(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3}
    })
    .to_string()
}

#[test]
fn openai_round_trip_with_retry_and_scrubbing() {
    let (url, seen) = serve(vec![
        (500, "{\"error\":\"overloaded\"}".into()),
        // a misbehaving server echoing the key back
        (
            200,
            openai_reply(&format!("{{\"answer\": 20}} key={SENTINEL}")),
        ),
    ]);
    let sleeper = Arc::new(RecordingSleeper::default());
    let gw = gateway(
        ProviderKind::OpenaiCompatible,
        url,
        "BCG_TEST_OPENAI_KEY",
        Arc::clone(&sleeper),
    );
    let sink = TranscriptSink::new();
    let resp = gw.complete(&request(), &sink).unwrap();

    assert_eq!(resp.attempts, 2);
    assert!(resp.content.starts_with("{\"answer\": 20}"));
    assert_eq!(resp.token_usage.unwrap().prompt, 11);
    assert_eq!(sleeper.delays(), vec![Duration::from_millis(10)]);

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    let req = &seen[1];
    assert_eq!(req.request_line, "POST /v1/chat/completions HTTP/1.1");
    assert_eq!(
        req.header("authorization"),
        Some(format!("Bearer {SENTINEL}").as_str())
    );
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "model-x");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "hello");
    assert!(body.get("temperature").is_none());

    // one transcript entry per attempt, none carrying the key
    let entries = sink.snapshot();
    assert_eq!(entries.len(), 2);
    let dumped = serde_json::to_string(&entries).unwrap();
    assert!(!dumped.contains(SENTINEL));
    assert!(dumped.contains("[REDACTED]"));
}

#[test]
fn anthropic_headers_and_auth_failure() {
    let reply = serde_json::json!({
        "content": [{"type": "text", "text": "{\"answer\": 33}"}],
        "usage": {"input_tokens": 5, "output_tokens": 2}
    })
    .to_string();
    let (url, seen) = serve(vec![
        (200, reply),
        (401, format!("{{\"error\":\"bad key {SENTINEL}\"}}")),
    ]);
    let sleeper = Arc::new(RecordingSleeper::default());
    let gw = gateway(
        ProviderKind::Anthropic,
        url,
        "BCG_TEST_ANTHROPIC_KEY",
        Arc::clone(&sleeper),
    );

    let sink = TranscriptSink::new();
    let resp = gw.complete(&request(), &sink).unwrap();
    assert_eq!(resp.content, "{\"answer\": 33}");
    {
        let seen = seen.lock().unwrap();
        let req = &seen[0];
        assert_eq!(req.request_line, "POST /v1/messages HTTP/1.1");
        assert_eq!(req.header("x-api-key"), Some(SENTINEL));
        assert_eq!(req.header("anthropic-version"), Some("2023-06-01"));
        let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["system"], "sys");
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
    }

    let err = gw.complete(&request(), &sink).unwrap_err();
    assert!(
        matches!(err, GatewayError::Auth { attempts: 1, .. }),
        "{err:?}"
    );
    assert!(!err.to_string().contains(SENTINEL));
    assert!(sleeper.delays().is_empty());
    let dumped = serde_json::to_string(&sink.snapshot()).unwrap();
    assert!(!dumped.contains(SENTINEL));
}

#[test]
fn unreachable_server_is_transport_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let sleeper = Arc::new(RecordingSleeper::default());
    let gw = gateway(
        ProviderKind::OpenaiCompatible,
        format!("http://127.0.0.1:{port}/v1"),
        "BCG_TEST_DEAD_KEY",
        Arc::clone(&sleeper),
    );
    let sink = TranscriptSink::new();
    let err = gw.complete(&request(), &sink).unwrap_err();
    assert!(
        matches!(err, GatewayError::Transport { attempts: 3, .. }),
        "{err:?}"
    );
    assert_eq!(sink.len(), 3);
    assert_eq!(
        sleeper.delays(),
        vec![Duration::from_millis(10), Duration::from_millis(20)]
    );
}
