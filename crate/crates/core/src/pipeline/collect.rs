use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use super::http::HttpResponder;
use super::rotate::load_realized;
use super::{files, io_err, PipelineError, ResponseSource, RunConfig};
use crate::dataset::{parse_responses, Orientation, ResponseRecord, ResponseSet};
use crate::rotation::ConcreteQuestion;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponderError {
    /// Worth retrying: timeouts, rate limits, server errors.
    #[error("transient: {0}")]
    Transient(String),
    #[error("permanent: {0}")]
    Permanent(String),
}

/// Something that answers realized questions.
pub trait Responder: Send + Sync {
    /// `image` is the question's image on disk, when it could be found.
    fn respond(
        &self,
        question: &ConcreteQuestion,
        image: Option<&Path>,
    ) -> Result<String, ResponderError>;
}

impl<F> Responder for F
where
    F: Fn(&ConcreteQuestion) -> Result<String, ResponderError> + Send + Sync,
{
    fn respond(
        &self,
        question: &ConcreteQuestion,
        _image: Option<&Path>,
    ) -> Result<String, ResponderError> {
        self(question)
    }
}

#[derive(Clone, Debug)]
pub struct CollectOptions {
    pub max_concurrent: usize,
    /// Retries after the first attempt.
    pub retry_budget: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            max_concurrent: 4,
            retry_budget: 3,
            base_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl CollectOptions {
    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_backoff
            .saturating_mul(factor)
            .min(self.max_backoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRecord {
    pub question_id: String,
    pub phi: Orientation,
    pub attempts: u32,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CollectSummary {
    /// Items that had no response when the run started.
    pub pending: usize,
    /// Items already answered by an earlier run.
    pub skipped: usize,
    pub written: usize,
    /// HTTP-level attempts, retries included.
    pub requests: usize,
    pub failures: Vec<FailureRecord>,
}

#[derive(Serialize)]
struct LogEntry<'a> {
    question_id: &'a str,
    phi: Orientation,
    attempt: u32,
    elapsed_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn append_line(file: &Mutex<File>, line: &str, path: &Path) -> Result<(), PipelineError> {
    let mut f = file.lock().expect("writer lock");
    writeln!(f, "{line}")
        .and_then(|_| f.flush())
        .map_err(io_err(path))
}

/// Answers every question not already present in `existing`, appending each
/// answer to `responses_path` as soon as it arrives.
///
/// At most `max_concurrent` requests are in flight. Items that still fail
/// after the retry budget are reported, not fatal.
pub fn collect(
    questions: &[ConcreteQuestion],
    image_root: &Path,
    existing: &ResponseSet,
    responder: &dyn Responder,
    opts: &CollectOptions,
    responses_path: &Path,
    log_path: Option<&Path>,
) -> Result<CollectSummary, PipelineError> {
    let mut seen = HashSet::new();
    let mut pending: Vec<&ConcreteQuestion> = Vec::new();
    let mut summary = CollectSummary::default();
    for q in questions {
        if !seen.insert((q.source_id.as_str(), q.phi)) {
            continue;
        }
        if existing.contains(&q.source_id, q.phi) {
            summary.skipped += 1;
        } else {
            pending.push(q);
        }
    }
    pending.sort_by(|a, b| (&a.source_id, a.phi).cmp(&(&b.source_id, b.phi)));
    summary.pending = pending.len();
    if pending.is_empty() {
        return Ok(summary);
    }

    let open_append = |path: &Path| {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map(Mutex::new)
            .map_err(io_err(path))
    };
    let out = open_append(responses_path)?;
    let log = log_path.map(open_append).transpose()?;

    let next = AtomicUsize::new(0);
    let requests = AtomicUsize::new(0);
    let written = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    let first_error: Mutex<Option<PipelineError>> = Mutex::new(None);
    let workers = opts.max_concurrent.max(1).min(pending.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if first_error.lock().expect("error lock").is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(q) = pending.get(i) else {
                    return;
                };
                let image = Some(image_root.join(&q.image_ref)).filter(|p| p.is_file());
                let result = answer_one(q, image.as_deref(), responder, opts, &requests, |entry| {
                    if let (Some(log), Some(path)) = (&log, log_path) {
                        let line = serde_json::to_string(entry).expect("log entry serializes");
                        append_line(log, &line, path)?;
                    }
                    Ok(())
                });
                let outcome = result.and_then(|answer| match answer {
                    Ok(text) => {
                        let record = ResponseRecord::new(q.source_id.clone(), q.phi, text);
                        let line = serde_json::to_string(&record).expect("record serializes");
                        append_line(&out, &line, responses_path)?;
                        written.fetch_add(1, Ordering::SeqCst);
                        Ok(())
                    }
                    Err(failure) => {
                        log::warn!(
                            "{} at {} failed after {} attempt(s): {}",
                            failure.question_id,
                            failure.phi,
                            failure.attempts,
                            failure.error
                        );
                        failures.lock().expect("failure lock").push(failure);
                        Ok(())
                    }
                });
                if let Err(e) = outcome {
                    first_error.lock().expect("error lock").get_or_insert(e);
                    return;
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    summary.requests = requests.into_inner();
    summary.written = written.into_inner();
    let mut failures = failures.into_inner().expect("failure lock");
    failures.sort_by(|a, b| (&a.question_id, a.phi).cmp(&(&b.question_id, b.phi)));
    summary.failures = failures;
    Ok(summary)
}

fn answer_one(
    q: &ConcreteQuestion,
    image: Option<&Path>,
    responder: &dyn Responder,
    opts: &CollectOptions,
    requests: &AtomicUsize,
    mut log: impl FnMut(&LogEntry<'_>) -> Result<(), PipelineError>,
) -> Result<Result<String, FailureRecord>, PipelineError> {
    let mut attempt = 0;
    loop {
        requests.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();
        let result = responder.respond(q, image);
        let elapsed_ms = started.elapsed().as_millis();
        log(&LogEntry {
            question_id: &q.source_id,
            phi: q.phi,
            attempt,
            elapsed_ms,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        })?;
        match result {
            Ok(text) => return Ok(Ok(text)),
            Err(ResponderError::Transient(_)) if attempt < opts.retry_budget => {
                std::thread::sleep(opts.backoff(attempt));
                attempt += 1;
            }
            Err(e) => {
                return Ok(Err(FailureRecord {
                    question_id: q.source_id.clone(),
                    phi: q.phi,
                    attempts: attempt + 1,
                    error: e.to_string(),
                }))
            }
        }
    }
}

/// Loads earlier answers for resuming. A final line cut off by an
/// interruption is dropped and the file is trimmed to the last full record.
fn load_existing(path: &Path) -> Result<ResponseSet, PipelineError> {
    if !path.exists() {
        return Ok(ResponseSet::new());
    }
    let mut text = std::fs::read_to_string(path).map_err(io_err(path))?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        log::warn!(
            "dropping a truncated record at the end of {}",
            path.display()
        );
        text.truncate(keep);
        std::fs::write(path, &text).map_err(io_err(path))?;
    }
    Ok(parse_responses(&text)?)
}

/// Collects answers for the realized questions in the output directory from
/// the configured endpoint, or from `responder` when given.
///
/// Writes `responses.jsonl` (sorted once the run ends), `request_log.jsonl`
/// and `failures.json`.
pub fn cmd_collect(
    cfg: &RunConfig,
    responder: Option<&dyn Responder>,
) -> Result<CollectSummary, PipelineError> {
    let endpoint = match cfg.response_source()? {
        ResponseSource::Endpoint(e) => e,
        ResponseSource::File(_) => {
            return Err(PipelineError::Config(
                "collect needs an `endpoint`; `responses` points at answers that already exist"
                    .into(),
            ))
        }
    };
    let mut questions = Vec::new();
    for phi in Orientation::ALL {
        let (_, qs) = load_realized(&cfg.out(&files::realized(phi)))?;
        questions.extend(qs);
    }
    let responses_path = cfg.out(files::RESPONSES);
    let existing = load_existing(&responses_path)?;

    let http;
    let responder = match responder {
        Some(r) => r,
        None => {
            http = HttpResponder::from_descriptor(endpoint)?;
            &http as &dyn Responder
        }
    };
    let opts = CollectOptions {
        max_concurrent: endpoint.max_concurrent,
        retry_budget: endpoint.retry_budget,
        base_backoff: Duration::from_millis(endpoint.backoff_ms),
        ..CollectOptions::default()
    };
    let log_path: PathBuf = cfg.out(files::REQUEST_LOG);
    let summary = collect(
        &questions,
        &cfg.output_dir,
        &existing,
        responder,
        &opts,
        &responses_path,
        Some(&log_path),
    )?;

    // rewrite in (question, orientation) order so reruns give identical files
    let all = load_existing(&responses_path)?;
    let mut records: Vec<ResponseRecord> = all.iter().cloned().collect();
    records.sort_by(|a, b| (&a.question_id, a.phi).cmp(&(&b.question_id, b.phi)));
    let mut sorted = ResponseSet::new();
    for r in records {
        sorted.insert(r)?;
    }
    sorted.write(&responses_path)?;

    let failures_path = cfg.out(files::FAILURES);
    let json = serde_json::to_string_pretty(&summary.failures).expect("failures serialize");
    std::fs::write(&failures_path, json + "\n").map_err(io_err(&failures_path))?;
    cfg.write_run_record()?;
    Ok(summary)
}
