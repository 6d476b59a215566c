//! The refinement loop: evidence assembly, the editor contract, greedy and
//! stochastic beam search with best-so-far tracking, and the scan track.
//!
//! A step asks the editor for a program given evidence about the target and
//! a previous candidate, compiles and renders it, and scores the render
//! against the evaluation target by Chamfer distance. Failures at any stage
//! make the candidate invalid; the loop keeps going.

mod editor;
mod evidence;
mod render;
mod search;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MetricConfig, MetricReport, MetricsError};
use crate::view::ViewConfig;

pub use editor::{
    DecodeMode, Editor, EditorError, EditorRequest, NoisyOracleEditor, OracleEditor, ScriptEntry,
    ScriptedEditor, NOISE_DECAY,
};
pub use evidence::{build_evidence, Evidence, EvidenceBuilder, EvidenceError, Modality};
pub use render::{CountingRenderer, DslRenderer, RenderError, Renderer};
pub use search::{
    evaluate_candidate, greedy_loop, report_against, run_loop, run_scan_track, stochastic_beam,
    Evaluation, LoopOutcome, LoopTarget,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Which program and render a greedy step shows the editor as context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextPolicy {
    /// The previous step's candidate, even when it scored worse.
    #[default]
    Latest,
    /// The best-so-far candidate.
    BestSoFar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Greedy,
    Beam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Beam width `N`; ignored by the greedy loop.
    pub width: usize,
    /// Step budget `s`.
    pub steps: usize,
    /// Greedy early stop when the best-so-far improves by less than this.
    pub stop_threshold: f64,
    pub modality: Modality,
    pub context: ContextPolicy,
    pub seed: u64,
    pub view: ViewConfig,
    pub metric: MetricConfig,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            width: 5,
            steps: 5,
            stop_threshold: 0.0,
            modality: Modality::Image,
            context: ContextPolicy::Latest,
            seed: 0,
            view: ViewConfig::default(),
            metric: MetricConfig::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        if self.width == 0 {
            return Err(LoopError::InvalidConfig("width must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(LoopError::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.stop_threshold >= 0.0) {
            return Err(LoopError::InvalidConfig(
                "stop_threshold must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Editor,
    Compile,
    Render,
    Score,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

/// Position of a candidate in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateRef {
    pub step: usize,
    pub index: usize,
}

/// A scored program. Valid candidates were rendered exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub program: String,
    pub report: MetricReport,
    pub step_born: usize,
    pub index: usize,
    /// The candidate whose program and render the editor saw.
    pub parent: Option<CandidateRef>,
    pub failure: Option<Failure>,
}

impl Candidate {
    pub fn reference(&self) -> CandidateRef {
        CandidateRef {
            step: self.step_born,
            index: self.index,
        }
    }

    pub fn discrepancy(&self) -> Option<f64> {
        self.report.discrepancy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub candidates: Vec<Candidate>,
    /// Candidate indices kept for the next step, best first.
    pub survivors: Vec<usize>,
    /// No valid survivor was left from the previous step; this step
    /// expanded a single fallback parent.
    pub degraded: bool,
    pub best_so_far: Option<CandidateRef>,
    pub best_discrepancy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub target_id: String,
    pub mode: SearchMode,
    pub steps: Vec<StepRecord>,
    pub best_so_far: Option<Candidate>,
    /// Renderer invocations; programs that fail to compile are not rendered.
    pub render_count: usize,
    pub compile_failures: usize,
    pub stopped_early: bool,
}

impl Trace {
    /// Best-so-far discrepancy after each executed step.
    pub fn best_curve(&self) -> Vec<Option<f64>> {
        self.steps.iter().map(|s| s.best_discrepancy).collect()
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.steps.iter().flat_map(|s| s.candidates.iter())
    }

    pub fn candidate_count(&self) -> usize {
        self.steps.iter().map(|s| s.candidates.len()).sum()
    }

    /// Share of invalid candidates, in percent.
    pub fn invalid_rate_percent(&self) -> f64 {
        let n = self.candidate_count();
        if n == 0 {
            return 0.0;
        }
        let bad = self.candidates().filter(|c| !c.report.valid).count();
        100.0 * bad as f64 / n as f64
    }
}
