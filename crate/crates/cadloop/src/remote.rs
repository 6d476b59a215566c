//! An editor served over HTTP.
//!
//! Each call POSTs one JSON request and expects `{"program": "..."}` back.
//! The overlay travels as a base64 PNG and the discrepancy cloud as base64
//! of its binary encoding.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use cadloop_core::refine::{DecodeMode, Editor, EditorError, EditorRequest};
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::formats::overlay_png;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub target_id: String,
    pub step: usize,
    pub index: usize,
    pub modality: String,
    pub mode: DecodeMode,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay_png_base64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_base64: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteResponse {
    pub program: String,
}

impl RemoteRequest {
    pub fn from_editor_request(r: &EditorRequest<'_>) -> Result<Self, EditorError> {
        let ev = r.evidence;
        let overlay = ev
            .overlay
            .as_ref()
            .map(|o| overlay_png(o).map(|png| STANDARD.encode(png)))
            .transpose()
            .map_err(|e| EditorError::Transport(e.to_string()))?;
        Ok(Self {
            target_id: r.target_id.into(),
            step: r.step,
            index: r.index,
            modality: ev.modality.as_str().into(),
            mode: r.mode,
            seed: r.seed,
            prev_program: ev.prev_program.clone(),
            overlay_png_base64: overlay,
            cloud_base64: ev.cloud.as_ref().map(|c| STANDARD.encode(c.to_bytes())),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RemoteEditor {
    endpoint: String,
    retries: u32,
    agent: Agent,
}

impl RemoteEditor {
    /// `retries` extra attempts follow a timed-out or unreachable call.
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: u32) -> Self {
        let agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            retries,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post_once(&self, body: &RemoteRequest) -> Result<String, EditorError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(body)
            .map_err(transport_error)?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EditorError::BadResponse(format!(
                "HTTP {}",
                status.as_u16()
            )));
        }
        let parsed: RemoteResponse = resp.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => EditorError::Timeout(e.to_string()),
            other => EditorError::BadResponse(other.to_string()),
        })?;
        Ok(parsed.program)
    }
}

/// Unreachable or silent endpoints are timeouts; other transport problems
/// keep their message.
fn transport_error(e: ureq::Error) -> EditorError {
    match e {
        ureq::Error::Timeout(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::Io(_) => EditorError::Timeout(e.to_string()),
        ureq::Error::Json(_) => EditorError::BadResponse(e.to_string()),
        other => EditorError::Transport(other.to_string()),
    }
}

impl Editor for RemoteEditor {
    fn propose(&self, request: &EditorRequest<'_>) -> Result<String, EditorError> {
        let body = RemoteRequest::from_editor_request(request)?;
        let mut attempt = 0;
        loop {
            match self.post_once(&body) {
                Err(EditorError::Timeout(_)) if attempt < self.retries => attempt += 1,
                other => return other,
            }
        }
    }

    /// Any HTTP answer counts as reachable.
    fn check(&self) -> Result<(), EditorError> {
        self.agent
            .get(&self.endpoint)
            .call()
            .map(|_| ())
            .map_err(transport_error)
    }
}
