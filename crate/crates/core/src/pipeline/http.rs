use std::path::Path;

use base64::Engine;
use serde_json::{json, Value};

use super::collect::{Responder, ResponderError};
use super::{EndpointDescriptor, PipelineError};
use crate::dataset::TaskKind;
use crate::rotation::ConcreteQuestion;

const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

/// The text sent alongside the image.
pub fn format_prompt(q: &ConcreteQuestion) -> String {
    match q.task_kind {
        TaskKind::Mcq => {
            let mut s = q.rendered_text.clone();
            s.push_str("\nOptions:");
            for (letter, choice) in LETTERS.iter().zip(&q.rendered_choices) {
                s.push_str(&format!("\n{letter}. {choice}"));
            }
            s.push_str("\nAnswer with the option's letter from the given choices directly.");
            s
        }
        TaskKind::Vg => format!(
            "{}\nAnswer with the bounding box as [x_min, y_min, x_max, y_max] in pixels.",
            q.rendered_text
        ),
    }
}

fn mime_for(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "image/png",
    }
}

/// Chat-completion request body. Sampling temperature is always zero.
pub fn request_body(model: &str, q: &ConcreteQuestion, image: Option<(&str, &[u8])>) -> Value {
    let mut content = Vec::new();
    if let Some((mime, bytes)) = image {
        let data = base64::engine::general_purpose::STANDARD.encode(bytes);
        content.push(json!({
            "type": "image_url",
            "image_url": { "url": format!("data:{mime};base64,{data}") }
        }));
    }
    content.push(json!({ "type": "text", "text": format_prompt(q) }));
    json!({
        "model": model,
        "temperature": 0,
        "messages": [{ "role": "user", "content": content }]
    })
}

/// Blocking client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpResponder {
    agent: ureq::Agent,
    url: String,
    model: String,
    token: Option<String>,
}

impl HttpResponder {
    pub fn from_descriptor(d: &EndpointDescriptor) -> Result<Self, PipelineError> {
        let token = match &d.auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                PipelineError::Config(format!(
                    "environment variable `{var}` named by auth_env is not set"
                ))
            })?),
            None => None,
        };
        let base = d.base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(d.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpResponder {
            agent,
            url,
            model: d.model.clone(),
            token,
        })
    }
}

impl Responder for HttpResponder {
    fn respond(
        &self,
        q: &ConcreteQuestion,
        image: Option<&Path>,
    ) -> Result<String, ResponderError> {
        let bytes = match image {
            Some(p) => Some(
                std::fs::read(p)
                    .map_err(|e| ResponderError::Permanent(format!("{}: {e}", p.display())))?,
            ),
            None => None,
        };
        let mime = image.map(mime_for).unwrap_or("image/png");
        let body = request_body(&self.model, q, bytes.as_deref().map(|b| (mime, b)));

        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| ResponderError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ResponderError::Transient(e.to_string()))?;
        match status {
            200..=299 => {}
            408 | 429 | 500..=599 => {
                return Err(ResponderError::Transient(format!("HTTP {status}: {text}")))
            }
            _ => return Err(ResponderError::Permanent(format!("HTTP {status}: {text}"))),
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| ResponderError::Permanent(format!("bad JSON: {e}")))?;
        extract_content(&value)
            .ok_or_else(|| ResponderError::Permanent(format!("no message content in {text}")))
    }
}

/// `choices[0].message.content`, either a string or a list of text parts.
fn extract_content(v: &Value) -> Option<String> {
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}
