use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use roteval::dataset::{load_responses, Orientation, ResponseRecord, ResponseSet};
use roteval::pipeline::{
    cmd_collect, cmd_rotate, files, EndpointDescriptor, ResponderError, RunConfig,
};
use roteval::rotation::ConcreteQuestion;

const MANIFEST: &str = r#"{"id":"q1","category":"scene_understanding","task_kind":"mcq","rotation_sensitivity":"invariant","text":"Is it day?","choices":["yes","no"],"label":0,"image_ref":"a.png"}
{"id":"q2","category":"spatial_relationship","task_kind":"mcq","rotation_sensitivity":"sensitive","text":"Where is the boat?","choices":["top-left","bottom-right"],"label":1,"image_ref":"b.png"}
"#;

#[derive(Default)]
struct ServerStats {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    bodies: Mutex<Vec<serde_json::Value>>,
    auth: Mutex<Vec<String>>,
}

/// A chat-completion stand-in that answers "A" after a short delay, or
/// fails with HTTP 500 when the prompt contains `fail_on`.
fn spawn_server(fail_on: Option<&'static str>) -> (String, Arc<ServerStats>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let stats = Arc::new(ServerStats::default());
    let shared = Arc::clone(&stats);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let stats = Arc::clone(&shared);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        stats.auth.lock().unwrap().push(line.trim().to_string());
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();

                stats.requests.fetch_add(1, Ordering::SeqCst);
                let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(40));
                stats.in_flight.fetch_sub(1, Ordering::SeqCst);

                let json: serde_json::Value = serde_json::from_slice(&body).unwrap();
                let prompt = json["messages"][0]["content"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter_map(|p| p["text"].as_str())
                    .collect::<String>();
                stats.bodies.lock().unwrap().push(json);
                let (status, payload) = match fail_on {
                    Some(marker) if prompt.contains(marker) => (
                        "500 Internal Server Error",
                        "{\"error\":\"boom\"}".to_string(),
                    ),
                    _ => (
                        "200 OK",
                        r#"{"choices":[{"message":{"role":"assistant","content":"A"}}]}"#
                            .to_string(),
                    ),
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
            });
        }
    });
    (format!("http://{addr}/v1"), stats)
}

fn setup(dir: &Path, url: &str, max_concurrent: usize) -> RunConfig {
    let manifest = dir.join("manifest.jsonl");
    std::fs::write(&manifest, MANIFEST).unwrap();
    let mut cfg = RunConfig::new(&manifest, dir.join("out"));
    cfg.seed = 11;
    let mut ep = EndpointDescriptor::new(url, "test-model");
    ep.max_concurrent = max_concurrent;
    ep.retry_budget = 2;
    ep.backoff_ms = 5;
    ep.timeout_secs = 5;
    cfg.endpoint = Some(ep);
    cmd_rotate(&cfg).unwrap();
    cfg
}

#[test]
fn eight_items_with_two_workers() {
    let (url, server) = spawn_server(None);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path(), &url, 2);
    std::env::set_var("ROTEVAL_COLLECT_TEST_TOKEN", "sekret");
    cfg.endpoint.as_mut().unwrap().auth_env = Some("ROTEVAL_COLLECT_TEST_TOKEN".into());

    let summary = cmd_collect(&cfg, None).unwrap();
    assert_eq!(summary.pending, 8);
    assert_eq!(summary.written, 8);
    assert!(summary.failures.is_empty());
    assert_eq!(server.requests.load(Ordering::SeqCst), 8);
    let peak = server.max_in_flight.load(Ordering::SeqCst);
    assert!(peak <= 2, "{peak} requests in flight");

    let responses = load_responses(&cfg.out(files::RESPONSES)).unwrap();
    assert_eq!(responses.len(), 8);
    assert!(responses.iter().all(|r| r.raw_text == "A"));

    for body in server.bodies.lock().unwrap().iter() {
        assert_eq!(body["temperature"], 0);
        assert_eq!(body["model"], "test-model");
    }
    let auth = server.auth.lock().unwrap();
    assert_eq!(auth.len(), 8);
    assert!(auth.iter().all(|h| h.ends_with("Bearer sekret")));

    let log = std::fs::read_to_string(cfg.out(files::REQUEST_LOG)).unwrap();
    assert_eq!(log.lines().count(), 8);
    assert_eq!(
        std::fs::read_to_string(cfg.out(files::FAILURES))
            .unwrap()
            .trim(),
        "[]"
    );
}

#[test]
fn resume_issues_only_missing_requests() {
    let (url, server) = spawn_server(None);
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &url, 3);

    // an earlier run got through five of the eight items
    let mut earlier = ResponseSet::new();
    let done = [
        ("q1", Orientation::Deg0),
        ("q1", Orientation::Deg90),
        ("q1", Orientation::Deg180),
        ("q1", Orientation::Deg270),
        ("q2", Orientation::Deg0),
    ];
    for (id, phi) in done {
        earlier.insert(ResponseRecord::new(id, phi, "B")).unwrap();
    }
    earlier.write(&cfg.out(files::RESPONSES)).unwrap();

    let summary = cmd_collect(&cfg, None).unwrap();
    assert_eq!(summary.skipped, 5);
    assert_eq!(summary.pending, 3);
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
    let responses = load_responses(&cfg.out(files::RESPONSES)).unwrap();
    assert_eq!(responses.len(), 8);
    assert_eq!(
        responses.get("q1", Orientation::Deg90).unwrap().raw_text,
        "B"
    );

    // a further rerun has nothing to do
    let again = cmd_collect(&cfg, None).unwrap();
    assert_eq!(again.pending, 0);
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn persistent_failure_is_reported_and_run_completes() {
    let (url, server) = spawn_server(Some("Is it day?"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &url, 2);

    let summary = cmd_collect(&cfg, None).unwrap();
    assert_eq!(summary.written, 4);
    assert_eq!(summary.failures.len(), 4);
    assert!(summary
        .failures
        .iter()
        .all(|f| f.question_id == "q1" && f.attempts == 3));
    // four good requests plus three attempts for each failing item
    assert_eq!(server.requests.load(Ordering::SeqCst), 4 + 4 * 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cfg.out(files::FAILURES)).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 4);
    assert_eq!(load_responses(&cfg.out(files::RESPONSES)).unwrap().len(), 4);
}

#[test]
fn single_failing_item_with_scripted_responder() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "http://127.0.0.1:9", 2);
    let calls = AtomicUsize::new(0);
    let responder = |q: &ConcreteQuestion| {
        calls.fetch_add(1, Ordering::SeqCst);
        if q.source_id == "q2" && q.phi == Orientation::Deg90 {
            Err(ResponderError::Permanent("refused".into()))
        } else {
            Ok("A".to_string())
        }
    };
    let summary = cmd_collect(&cfg, Some(&responder)).unwrap();
    assert_eq!(summary.written, 7);
    assert_eq!(summary.failures.len(), 1);
    assert_eq!(summary.failures[0].phi, Orientation::Deg90);
    // permanent errors are not retried
    assert_eq!(calls.load(Ordering::SeqCst), 8);
}
