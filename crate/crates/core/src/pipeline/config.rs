use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{files, io_err, PipelineError};
use crate::aggregation::Averaging;
use crate::reliability::{Selection, SolveOptions};
use crate::scoring::{BoxFormat, ScoringOptions};

/// A hosted chat-completion endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointDescriptor {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    /// Retries after the first attempt.
    #[serde(default = "default_retries")]
    pub retry_budget: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_concurrency() -> usize {
    4
}

fn default_retries() -> u32 {
    3
}

fn default_timeout() -> u64 {
    60
}

fn default_backoff() -> u64 {
    500
}

impl EndpointDescriptor {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointDescriptor {
            base_url: base_url.into(),
            model: model.into(),
            auth_env: None,
            max_concurrent: default_concurrency(),
            retry_budget: default_retries(),
            timeout_secs: default_timeout(),
            backoff_ms: default_backoff(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointDescriptor>,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the canvas size declared by the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canvas: Option<f64>,
    #[serde(default)]
    pub box_format: BoxFormat,
    #[serde(default)]
    pub reconcile: bool,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

pub enum ResponseSource<'a> {
    File(&'a Path),
    Endpoint(&'a EndpointDescriptor),
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            manifest: manifest.into(),
            responses: None,
            endpoint: None,
            seed: 0,
            canvas: None,
            box_format: BoxFormat::default(),
            reconcile: false,
            averaging: Averaging::default(),
            selection: Selection::default(),
            output_dir: output_dir.into(),
        }
    }

    /// Reads a TOML config. Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.manifest);
        rebase(&mut cfg.output_dir);
        if let Some(r) = cfg.responses.as_mut() {
            rebase(r);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Exactly one of `responses` and `endpoint` must be set.
    pub fn response_source(&self) -> Result<ResponseSource<'_>, PipelineError> {
        match (&self.responses, &self.endpoint) {
            (Some(p), None) => Ok(ResponseSource::File(p)),
            (None, Some(e)) => Ok(ResponseSource::Endpoint(e)),
            (Some(_), Some(_)) => Err(PipelineError::Config(
                "set either `responses` or `endpoint`, not both".into(),
            )),
            (None, None) => Err(PipelineError::Config(
                "one of `responses` or `endpoint` is required".into(),
            )),
        }
    }

    /// Where scoring reads answers: the configured file, or the file
    /// `collect` writes into the output directory.
    pub fn responses_path(&self) -> Result<PathBuf, PipelineError> {
        Ok(match self.response_source()? {
            ResponseSource::File(p) => p.to_path_buf(),
            ResponseSource::Endpoint(_) => self.out(files::RESPONSES),
        })
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn solve_options(&self) -> SolveOptions {
        if self.reconcile {
            SolveOptions::reconcile()
        } else {
            SolveOptions::default()
        }
    }

    pub fn scoring_options(&self, manifest_canvas: f64) -> ScoringOptions {
        ScoringOptions {
            box_format: self.box_format,
            canvas: self.canvas.unwrap_or(manifest_canvas),
        }
    }

    pub(crate) fn ensure_output_dir(&self) -> Result<(), PipelineError> {
        std::fs::create_dir_all(&self.output_dir).map_err(io_err(&self.output_dir))
    }

    /// Records the effective configuration, seed included, next to the outputs.
    pub(crate) fn write_run_record(&self) -> Result<(), PipelineError> {
        self.ensure_output_dir()?;
        let path = self.out(files::RUN);
        std::fs::write(&path, self.to_toml()).map_err(io_err(&path))
    }
}
