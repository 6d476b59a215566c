//! Curriculum data: disjoint corpus splits, on-policy rollouts and the
//! Stage A/B/C training samples built from them.
//!
//! Every sample supervises the ground-truth program. Stage A covers the
//! first step only; Stage B adds second-step samples conditioned on a
//! one-step rollout; Stage C adds third-step samples from two-step rollouts.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{self, mix_seed, rng_from_seed};
use crate::mesh::TriangleMesh;
use crate::refine::{
    DecodeMode, Editor, EditorRequest, Evidence, EvidenceBuilder, EvidenceError, Modality, Renderer,
};
use crate::view::ViewConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RolloutError {
    #[error("split {0} is empty")]
    EmptySplit(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("no ground truth for target {0}")]
    MissingGroundTruth(String),
    #[error("target {id} has no rollout of depth {depth}")]
    MissingRollout { id: String, depth: usize },
    #[error("rollout depth {0} outside [1, 2]")]
    InvalidDepth(usize),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    A,
    B,
    C,
}

impl Stage {
    /// Largest step a record of this stage may carry.
    pub fn max_step(self) -> usize {
        match self {
            Stage::A => 1,
            Stage::B => 2,
            Stage::C => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            fractions: [0.4, 0.3, 0.3],
            seed: 0,
        }
    }
}

/// Seeded shuffle, then a contiguous partition. Sizes follow the fractions
/// with largest-remainder rounding, so they always sum to the input size.
pub fn split_corpus(ids: &[String], cfg: &SplitConfig) -> Result<[Vec<String>; 3], RolloutError> {
    let f = cfg.fractions;
    if f.iter().any(|&x| !(x > 0.0)) || !(math::abs(f.iter().sum::<f64>() - 1.0) < 1e-9) {
        return Err(RolloutError::InvalidSplit(
            "fractions must be positive and sum to 1".into(),
        ));
    }
    let mut sorted = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != ids.len() {
        return Err(RolloutError::InvalidSplit("ids are not unique".into()));
    }
    let n = ids.len();
    let exact = f.map(|x| x * n as f64);
    let mut sizes = exact.map(|x| math::floor(x) as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(RolloutError::EmptySplit(i + 1));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut rng_from_seed(cfg.seed));
    let d3 = shuffled.split_off(sizes[0] + sizes[1]);
    let d2 = shuffled.split_off(sizes[0]);
    Ok([shuffled, d2, d3])
}

/// A corpus entry: ground-truth program and its surface in program-domain
/// coordinates.
#[derive(Debug, Clone, Copy)]
pub struct RolloutTarget<'a> {
    pub id: &'a str,
    pub program: &'a str,
    pub mesh: &'a TriangleMesh,
}

/// One rollout step. `mesh` is absent when the program did not render.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub program: String,
    pub mesh: Option<TriangleMesh>,
    pub failure: Option<String>,
}

pub type Rollouts = BTreeMap<String, Vec<RolloutStep>>;

#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceSettings {
    pub modality: Modality,
    pub view: ViewConfig,
    pub seed: u64,
}

impl Default for EvidenceSettings {
    fn default() -> Self {
        Self {
            modality: Modality::CrossModal,
            view: ViewConfig::default(),
            seed: 0,
        }
    }
}

/// 64-bit FNV-1a of a target id, used to derive per-target seeds.
pub fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn builder(t: &RolloutTarget<'_>, s: &EvidenceSettings) -> Result<EvidenceBuilder, RolloutError> {
    Ok(EvidenceBuilder::new(
        t.mesh,
        s.modality,
        &s.view,
        mix_seed(&[s.seed, id_hash(t.id)]),
    )?)
}

fn evidence_seed(s: &EvidenceSettings, id: &str, step: usize) -> u64 {
    mix_seed(&[s.seed, id_hash(id), step as u64])
}

/// Runs `depth` greedy editor steps on one target, each conditioned on the
/// previous step's program and render.
pub fn rollout_target(
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    target: &RolloutTarget<'_>,
    depth: usize,
    settings: &EvidenceSettings,
) -> Result<Vec<RolloutStep>, RolloutError> {
    if !(1..=2).contains(&depth) {
        return Err(RolloutError::InvalidDepth(depth));
    }
    let b = builder(target, settings)?;
    let mut steps: Vec<RolloutStep> = Vec::with_capacity(depth);
    for t in 1..=depth {
        let prev = steps.last().map(|s| (s.program.as_str(), s.mesh.as_ref()));
        let evidence = b.build(prev, evidence_seed(settings, target.id, t))?;
        let request = EditorRequest {
            target_id: target.id,
            step: t,
            index: 0,
            evidence: &evidence,
            mode: DecodeMode::Greedy,
            seed: evidence_seed(settings, target.id, t),
        };
        let step = match editor.propose(&request) {
            Ok(program) => match renderer
                .compile(&program)
                .and_then(|_| renderer.render(&program))
            {
                Ok(mesh) => RolloutStep {
                    program,
                    mesh: Some(mesh),
                    failure: None,
                },
                Err(e) => RolloutStep {
                    program,
                    mesh: None,
                    failure: Some(e.to_string()),
                },
            },
            Err(e) => RolloutStep {
                program: String::new(),
                mesh: None,
                failure: Some(e.to_string()),
            },
        };
        steps.push(step);
    }
    Ok(steps)
}

/// Rollouts for every target; a failing target is reported on its own and
/// does not affect the others.
pub fn rollout(
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    targets: &[RolloutTarget<'_>],
    depth: usize,
    settings: &EvidenceSettings,
) -> BTreeMap<String, Result<Vec<RolloutStep>, RolloutError>> {
    let run = |t: &RolloutTarget<'_>| {
        (
            t.id.to_string(),
            rollout_target(editor, renderer, t, depth, settings),
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        targets
            .par_iter()
            .map(run)
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        targets.iter().map(run).collect()
    }
}

/// A training sample before its evidence is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub target_id: String,
    pub t: usize,
    pub stage: Stage,
    pub evidence: Evidence,
    pub prev_program: Option<String>,
    pub target_program: String,
}

/// First-step samples `E(T, ∅) -> C*` for every target.
pub fn stage_a_samples(
    targets: &[RolloutTarget<'_>],
    settings: &EvidenceSettings,
) -> Result<Vec<Sample>, RolloutError> {
    targets
        .iter()
        .map(|t| {
            Ok(Sample {
                target_id: t.id.into(),
                t: 1,
                stage: Stage::A,
                evidence: builder(t, settings)?.build(None, evidence_seed(settings, t.id, 1))?,
                prev_program: None,
                target_program: t.program.into(),
            })
        })
        .collect()
}

/// Stage B (steps 1 and 2) or Stage C (steps 1 to 3) samples over the
/// targets of one split, in a seeded shuffled emission order. Step `t > 1`
/// is conditioned on rollout step `t - 1`; an unrenderable rollout program
/// gets the null-prediction evidence with its text as context.
pub fn stage_mix_samples(
    stage: Stage,
    targets: &[RolloutTarget<'_>],
    rollouts: &Rollouts,
    settings: &EvidenceSettings,
    seed: u64,
) -> Result<Vec<Sample>, RolloutError> {
    let depth = match stage {
        Stage::A => return stage_a_samples(targets, settings),
        Stage::B => 1,
        Stage::C => 2,
    };
    let mut out = Vec::with_capacity(targets.len() * (depth + 1));
    for target in targets {
        let steps = rollouts
            .get(target.id)
            .filter(|s| s.len() >= depth)
            .ok_or_else(|| RolloutError::MissingRollout {
                id: target.id.into(),
                depth,
            })?;
        let b = builder(target, settings)?;
        for t in 1..=depth + 1 {
            let prev = (t > 1).then(|| &steps[t - 2]);
            out.push(Sample {
                target_id: target.id.into(),
                t,
                stage,
                evidence: b.build(
                    prev.map(|s| (s.program.as_str(), s.mesh.as_ref())),
                    evidence_seed(settings, target.id, t),
                )?,
                prev_program: prev.map(|s| s.program.clone()),
                target_program: target.program.into(),
            });
        }
    }
    let mut slots: Vec<Option<Sample>> = out.into_iter().map(Some).collect();
    Ok(emission_order(slots.len(), seed)
        .into_iter()
        .filter_map(|i| slots[i].take())
        .collect())
}

/// A seeded, uniformly random permutation of `0..n`: position `k` of the
/// output emits record `order[k]`.
pub fn emission_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:04}")).collect()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let cfg = SplitConfig {
            fractions: [0.5, 0.3, 0.2],
            seed: 4,
        };
        let [a, b, c] = split_corpus(&ids(10), &cfg).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (5, 3, 2));
        let mut all: Vec<String> = a.iter().chain(&b).chain(&c).cloned().collect();
        all.sort();
        assert_eq!(all, ids(10));
        assert_eq!(split_corpus(&ids(10), &cfg).unwrap(), [a, b, c]);
    }

    #[test]
    fn split_rejects_bad_input() {
        let cfg = SplitConfig {
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
        };
        assert_eq!(
            split_corpus(&ids(4), &cfg),
            Err(RolloutError::EmptySplit(3))
        );
        let cfg = SplitConfig {
            fractions: [0.5, 0.5, 0.5],
            seed: 0,
        };
        assert!(matches!(
            split_corpus(&ids(4), &cfg),
            Err(RolloutError::InvalidSplit(_))
        ));
        let dup = [String::from("a"), String::from("a"), String::from("b")];
        assert!(matches!(
            split_corpus(&dup, &SplitConfig::default()),
            Err(RolloutError::InvalidSplit(_))
        ));
    }
}
