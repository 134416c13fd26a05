//! Collects answers through a scripted responder, with one item that fails.

use std::time::Duration;

use roteval::dataset::{load_responses, Orientation, ResponseSet};
use roteval::pipeline::simulate::synthetic_manifest;
use roteval::pipeline::{collect, realize_all, CollectOptions, ResponderError};
use roteval::rotation::ConcreteQuestion;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let set = synthetic_manifest(5, 1);
    let questions: Vec<ConcreteQuestion> = realize_all(&set, 3, set.canvas()).unwrap().concat();

    let responder = |q: &ConcreteQuestion| {
        if q.source_id == "syn000002" && q.phi == Orientation::Deg180 {
            return Err(ResponderError::Transient("server busy".into()));
        }
        Ok(match q.label_index {
            Some(i) => ((b'A' + i as u8) as char).to_string(),
            None => "[0, 0, 10, 10]".to_string(),
        })
    };
    let opts = CollectOptions {
        max_concurrent: 2,
        retry_budget: 2,
        base_backoff: Duration::from_millis(5),
        ..CollectOptions::default()
    };
    let out = dir.path().join("responses.jsonl");
    let summary = collect(
        &questions,
        dir.path(),
        &ResponseSet::new(),
        &responder,
        &opts,
        &out,
        None,
    )
    .unwrap();
    println!(
        "{} pending, {} written, {} request(s), {} failure(s)",
        summary.pending,
        summary.written,
        summary.requests,
        summary.failures.len()
    );
    for f in &summary.failures {
        println!(
            "  {} at {}° after {} attempt(s): {}",
            f.question_id,
            f.phi.degrees(),
            f.attempts,
            f.error
        );
    }
    println!(
        "{} response line(s) on disk",
        load_responses(&out).unwrap().len()
    );
}
