//! Curriculum datasets on disk.
//!
//! ```text
//! <dir>/stage_a.jsonl, stage_b.jsonl, stage_c.jsonl   SampleRecord lines
//! <dir>/evidence/<sha256>.png                         overlay images
//! <dir>/evidence/<sha256>.dcld                        discrepancy clouds
//! <dir>/rollout_b.jsonl, rollout_c.jsonl              RolloutRecord lines
//! <dir>/rollout_meshes/<id>_<depth>_t<t>.ply          rendered rollout steps
//! ```
//!
//! Evidence files are content addressed, so identical evidence is stored
//! once.

use std::path::{Path, PathBuf};

use cadloop_core::pointcloud::DiscrepancyCloud;
use cadloop_core::refine::Modality;
use cadloop_core::rollout::{RolloutStep, Rollouts, Sample, Stage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{overlay_png, read_jsonl, sha256_hex, write_jsonl, FormatError};
use crate::meshio::{load_mesh, save_mesh, MeshIoError};

pub const SAMPLE_SCHEMA: &str = "rollout_v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid record for target {target_id}: {reason}")]
    InvalidRecord { target_id: String, reason: String },
    #[error("missing evidence file {}", .0.display())]
    MissingEvidence(PathBuf),
    #[error(transparent)]
    Mesh(#[from] MeshIoError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRefs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<String>,
}

/// One training sample; the evidence lives in separate files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub schema: String,
    pub target_id: String,
    pub t: usize,
    pub stage: Stage,
    pub modality: Modality,
    pub evidence_refs: EvidenceRefs,
    pub prev_program: Option<String>,
    pub target_program: String,
}

impl SampleRecord {
    /// Structural checks that need no files.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |reason: String| {
            Err(DatasetError::InvalidRecord {
                target_id: self.target_id.clone(),
                reason,
            })
        };
        if self.schema != SAMPLE_SCHEMA {
            return fail(format!("schema `{}`", self.schema));
        }
        if self.t == 0 || self.t > self.stage.max_step() {
            return fail(format!(
                "step {} outside [1, {}] for stage {:?}",
                self.t,
                self.stage.max_step(),
                self.stage
            ));
        }
        if (self.t == 1) != self.prev_program.is_none() {
            return fail("previous program must be absent exactly at step 1".into());
        }
        if self.modality.uses_image() != self.evidence_refs.overlay.is_some()
            || self.modality.uses_cloud() != self.evidence_refs.cloud.is_some()
        {
            return fail(format!(
                "evidence does not match modality {}",
                self.modality.as_str()
            ));
        }
        if self.target_program.trim().is_empty() {
            return fail("empty target program".into());
        }
        Ok(())
    }
}

fn store(dir: &Path, bytes: &[u8], ext: &str) -> Result<String, DatasetError> {
    let rel = format!("evidence/{}.{ext}", sha256_hex(bytes));
    let path = dir.join(&rel);
    if !path.exists() {
        std::fs::create_dir_all(dir.join("evidence"))?;
        std::fs::write(path, bytes)?;
    }
    Ok(rel)
}

pub fn stage_file(stage: Stage) -> &'static str {
    match stage {
        Stage::A => "stage_a.jsonl",
        Stage::B => "stage_b.jsonl",
        Stage::C => "stage_c.jsonl",
    }
}

/// Writes the evidence files and the stage's JSON lines, in sample order.
pub fn write_samples(
    dir: &Path,
    stage: Stage,
    samples: &[Sample],
) -> Result<Vec<SampleRecord>, DatasetError> {
    std::fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(samples.len());
    for s in samples {
        let overlay = s
            .evidence
            .overlay
            .as_ref()
            .map(|o| -> Result<_, DatasetError> { store(dir, &overlay_png(o)?, "png") })
            .transpose()?;
        let cloud = s
            .evidence
            .cloud
            .as_ref()
            .map(|c| store(dir, &c.to_bytes(), "dcld"))
            .transpose()?;
        let record = SampleRecord {
            schema: SAMPLE_SCHEMA.into(),
            target_id: s.target_id.clone(),
            t: s.t,
            stage: s.stage,
            modality: s.evidence.modality,
            evidence_refs: EvidenceRefs { overlay, cloud },
            prev_program: s.prev_program.clone(),
            target_program: s.target_program.clone(),
        };
        record.validate()?;
        records.push(record);
    }
    write_jsonl(&records, &dir.join(stage_file(stage)))?;
    Ok(records)
}

/// Reads and validates a stage file, checking that every evidence file
/// exists and clouds decode.
pub fn read_samples(dir: &Path, stage: Stage) -> Result<Vec<SampleRecord>, DatasetError> {
    let records: Vec<SampleRecord> = read_jsonl(&dir.join(stage_file(stage)))?;
    for r in &records {
        r.validate()?;
        if r.stage != stage {
            return Err(DatasetError::InvalidRecord {
                target_id: r.target_id.clone(),
                reason: format!("stage {:?} in the {:?} file", r.stage, stage),
            });
        }
        for rel in r.evidence_refs.overlay.iter().chain(&r.evidence_refs.cloud) {
            let path = dir.join(rel);
            if !path.is_file() {
                return Err(DatasetError::MissingEvidence(path));
            }
        }
        if let Some(rel) = &r.evidence_refs.cloud {
            DiscrepancyCloud::from_bytes(&std::fs::read(dir.join(rel))?)
                .map_err(FormatError::from)?;
        }
    }
    Ok(records)
}

/// One step of an on-policy rollout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub target_id: String,
    pub t: usize,
    pub program: String,
    /// Relative path of the rendered mesh, absent when rendering failed.
    pub mesh: Option<String>,
    pub failure: Option<String>,
}

pub fn rollout_file(depth: usize) -> String {
    match depth {
        1 => "rollout_b.jsonl".into(),
        2 => "rollout_c.jsonl".into(),
        d => format!("rollout_d{d}.jsonl"),
    }
}

pub fn write_rollouts(dir: &Path, depth: usize, rollouts: &Rollouts) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir.join("rollout_meshes"))?;
    let mut records = Vec::new();
    for (id, steps) in rollouts {
        for (i, s) in steps.iter().enumerate() {
            let t = i + 1;
            let mesh = match &s.mesh {
                Some(m) => {
                    let rel = format!("rollout_meshes/{id}_{depth}_t{t}.ply");
                    save_mesh(m, &dir.join(&rel))?;
                    Some(rel)
                }
                None => None,
            };
            records.push(RolloutRecord {
                target_id: id.clone(),
                t,
                program: s.program.clone(),
                mesh,
                failure: s.failure.clone(),
            });
        }
    }
    write_jsonl(&records, &dir.join(rollout_file(depth)))?;
    Ok(())
}

pub fn read_rollouts(dir: &Path, depth: usize) -> Result<Rollouts, DatasetError> {
    let records: Vec<RolloutRecord> = read_jsonl(&dir.join(rollout_file(depth)))?;
    let mut out = Rollouts::new();
    for r in records {
        let steps = out.entry(r.target_id.clone()).or_default();
        if r.t != steps.len() + 1 {
            return Err(DatasetError::InvalidRecord {
                target_id: r.target_id,
                reason: format!("rollout step {} out of order", r.t),
            });
        }
        let mesh = r
            .mesh
            .as_ref()
            .map(|rel| load_mesh(&dir.join(rel)))
            .transpose()?;
        steps.push(RolloutStep {
            program: r.program,
            mesh,
            failure: r.failure,
        });
    }
    Ok(out)
}
