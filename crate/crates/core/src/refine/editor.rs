use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Evidence;
use crate::dsl::{parse, perturb_program, print, Ast, DslError};
use crate::math::{self, mix_seed};

/// Per-step decay of the noisy oracle's perturbation magnitude.
pub const NOISE_DECAY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// One editor call.
#[derive(Debug, Clone, Copy)]
pub struct EditorRequest<'a> {
    pub target_id: &'a str,
    /// 1-based step.
    pub step: usize,
    /// Candidate index within the step.
    pub index: usize,
    pub evidence: &'a Evidence,
    pub mode: DecodeMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditorError {
    #[error("editor timed out: {0}")]
    Timeout(String),
    #[error("bad editor response: {0}")]
    BadResponse(String),
    #[error("no scripted response for target {target_id}, step {step}, index {index}")]
    MissingKey {
        target_id: String,
        step: usize,
        index: usize,
    },
    #[error("editor transport failure: {0}")]
    Transport(String),
}

/// The program editor: maps evidence to program text, which may or may not
/// be a valid program.
pub trait Editor: Sync {
    fn propose(&self, request: &EditorRequest<'_>) -> Result<String, EditorError>;

    /// Checks that the editor can be reached before a run starts.
    fn check(&self) -> Result<(), EditorError> {
        Ok(())
    }
}

/// Returns the ground-truth program whatever the evidence.
#[derive(Debug, Clone)]
pub struct OracleEditor {
    program: String,
}

impl OracleEditor {
    pub fn new(program: impl Into<String>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl Editor for OracleEditor {
    fn propose(&self, _: &EditorRequest<'_>) -> Result<String, EditorError> {
        Ok(self.program.clone())
    }
}

/// The ground truth perturbed with magnitude `magnitude * 0.5^t` at step
/// `t`. Greedy calls use the perturbation seed `seed ^ t`; sampled calls
/// also mix in the request seed so sibling candidates differ.
#[derive(Debug, Clone)]
pub struct NoisyOracleEditor {
    text: String,
    ast: Ast,
    magnitude: f64,
    seed: u64,
}

impl NoisyOracleEditor {
    pub fn new(program: &str, magnitude: f64, seed: u64) -> Result<Self, DslError> {
        Ok(Self {
            text: program.into(),
            ast: parse(program)?,
            magnitude,
            seed,
        })
    }

    pub fn magnitude_at(&self, step: usize) -> f64 {
        self.magnitude * math::powi(NOISE_DECAY, step as i32)
    }
}

impl Editor for NoisyOracleEditor {
    fn propose(&self, request: &EditorRequest<'_>) -> Result<String, EditorError> {
        let m = self.magnitude_at(request.step);
        if !(m > 0.0) {
            return Ok(self.text.clone());
        }
        let seed = self.seed ^ request.step as u64;
        let seed = match request.mode {
            DecodeMode::Greedy => seed,
            DecodeMode::Sample => mix_seed(&[seed, request.seed]),
        };
        Ok(print(&perturb_program(&self.ast, m, seed)))
    }
}

/// One recorded editor response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub target_id: String,
    pub step: usize,
    pub index: usize,
    pub program: String,
}

/// Replays recorded responses keyed by target, step and candidate index.
#[derive(Debug, Clone, Default)]
pub struct ScriptedEditor {
    responses: BTreeMap<(String, usize, usize), String>,
}

impl ScriptedEditor {
    pub fn new<I: IntoIterator<Item = ScriptEntry>>(entries: I) -> Self {
        let responses = entries
            .into_iter()
            .map(|e| ((e.target_id, e.step, e.index), e.program))
            .collect();
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Editor for ScriptedEditor {
    fn propose(&self, r: &EditorRequest<'_>) -> Result<String, EditorError> {
        self.responses
            .get(&(String::from(r.target_id), r.step, r.index))
            .cloned()
            .ok_or_else(|| EditorError::MissingKey {
                target_id: r.target_id.into(),
                step: r.step,
                index: r.index,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::Modality;

    fn evidence() -> Evidence {
        Evidence {
            overlay: None,
            cloud: None,
            prev_program: None,
            modality: Modality::Image,
        }
    }

    fn request<'a>(
        e: &'a Evidence,
        target_id: &'a str,
        step: usize,
        mode: DecodeMode,
        seed: u64,
    ) -> EditorRequest<'a> {
        EditorRequest {
            target_id,
            step,
            index: 0,
            evidence: e,
            mode,
            seed,
        }
    }

    const GT: &str = "extrude plane=XY z0=-20 h=40 op=new {\n  add rect 0 0 40 40\n}\n";

    #[test]
    fn oracle_ignores_target() {
        let e = evidence();
        let o = OracleEditor::new(GT);
        let a = o
            .propose(&request(&e, "a", 1, DecodeMode::Greedy, 0))
            .unwrap();
        let b = o
            .propose(&request(&e, "b", 3, DecodeMode::Sample, 9))
            .unwrap();
        assert_eq!((a.as_str(), b.as_str()), (GT, GT));
    }

    #[test]
    fn noisy_with_zero_magnitude_is_the_oracle() {
        let e = evidence();
        let n = NoisyOracleEditor::new(GT, 0.0, 3).unwrap();
        assert_eq!(
            n.propose(&request(&e, "a", 1, DecodeMode::Greedy, 0))
                .unwrap(),
            GT
        );
    }

    #[test]
    fn noisy_decays_and_is_deterministic() {
        let e = evidence();
        let n = NoisyOracleEditor::new(GT, 0.3, 3).unwrap();
        assert_eq!(n.magnitude_at(1), 0.15);
        assert_eq!(n.magnitude_at(3), 0.0375);
        let a = n
            .propose(&request(&e, "a", 2, DecodeMode::Greedy, 1))
            .unwrap();
        let b = n
            .propose(&request(&e, "a", 2, DecodeMode::Greedy, 2))
            .unwrap();
        assert_eq!(a, b);
        let c = n
            .propose(&request(&e, "a", 2, DecodeMode::Sample, 1))
            .unwrap();
        let d = n
            .propose(&request(&e, "a", 2, DecodeMode::Sample, 2))
            .unwrap();
        assert_ne!(c, d);
        assert!(parse(&a).is_ok());
    }

    #[test]
    fn scripted_replay_and_missing_key() {
        let e = evidence();
        let s = ScriptedEditor::new([ScriptEntry {
            target_id: "t".into(),
            step: 1,
            index: 0,
            program: GT.into(),
        }]);
        assert_eq!(
            s.propose(&request(&e, "t", 1, DecodeMode::Greedy, 0))
                .unwrap(),
            GT
        );
        assert!(matches!(
            s.propose(&request(&e, "t", 2, DecodeMode::Greedy, 0)),
            Err(EditorError::MissingKey { step: 2, .. })
        ));
    }
}
