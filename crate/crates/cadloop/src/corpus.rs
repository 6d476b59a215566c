//! On-disk program corpora.
//!
//! ```text
//! <dir>/manifest.jsonl      one CorpusEntry per line
//! <dir>/programs/<id>.cadl  program text
//! <dir>/meshes/<id>.obj     rendered surface
//! ```

use std::path::{Path, PathBuf};

use cadloop_core::dsl::{print, random_program, render_mesh, DslError};
use cadloop_core::math::mix_seed;
use cadloop_core::TriangleMesh;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{read_jsonl, sha256_hex, write_jsonl, FormatError};
use crate::meshio::{load_mesh, save_mesh, MeshIoError};

pub const MANIFEST: &str = "manifest.jsonl";
/// Largest extrusion count the generator accepts.
pub const MAX_COMPLEXITY: usize = 8;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("program generation failed for item {index}: {source}")]
    Generate { index: usize, source: DslError },
    #[error("hash mismatch for {}", .0.display())]
    HashMismatch(PathBuf),
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("invalid corpus request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Mesh(#[from] MeshIoError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub complexity: usize,
    pub seed: u64,
    /// Paths relative to the corpus directory.
    pub program: String,
    pub mesh: String,
    pub program_sha256: String,
    pub mesh_sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    pub count: usize,
    pub seed: u64,
    /// Item `i` has `1 + i % max_complexity` extrusions.
    pub max_complexity: usize,
    pub resolution: usize,
}

/// Writes a generated corpus and returns its manifest.
pub fn gen_corpus(dir: &Path, spec: &CorpusSpec) -> Result<Vec<CorpusEntry>, CorpusError> {
    if spec.count == 0 {
        return Err(CorpusError::InvalidRequest(
            "count must be at least 1".into(),
        ));
    }
    if !(1..=MAX_COMPLEXITY).contains(&spec.max_complexity) {
        return Err(CorpusError::InvalidRequest(format!(
            "complexity must lie in [1, {MAX_COMPLEXITY}]"
        )));
    }
    std::fs::create_dir_all(dir.join("programs"))?;
    std::fs::create_dir_all(dir.join("meshes"))?;
    let width = spec.count.saturating_sub(1).to_string().len().max(4);
    let mut entries = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let id = format!("p{i:0width$}");
        let complexity = 1 + i % spec.max_complexity;
        let seed = mix_seed(&[spec.seed, i as u64]);
        let generate = |e| CorpusError::Generate {
            index: i,
            source: e,
        };
        let ast = random_program(seed, complexity).map_err(generate)?;
        let text = print(&ast);
        let mesh = render_mesh(&ast, spec.resolution).map_err(generate)?;
        let program = format!("programs/{id}.cadl");
        let mesh_rel = format!("meshes/{id}.obj");
        std::fs::write(dir.join(&program), &text)?;
        save_mesh(&mesh, &dir.join(&mesh_rel))?;
        entries.push(CorpusEntry {
            program_sha256: sha256_hex(text.as_bytes()),
            mesh_sha256: sha256_hex(&std::fs::read(dir.join(&mesh_rel))?),
            id,
            complexity,
            seed,
            program,
            mesh: mesh_rel,
        });
    }
    write_jsonl(&entries, &dir.join(MANIFEST))?;
    Ok(entries)
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let manifest = dir.join(MANIFEST);
        if !manifest.is_file() {
            return Err(MeshIoError::FileNotFound(manifest).into());
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: read_jsonl(&manifest)?,
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn entry(&self, id: &str) -> Result<&CorpusEntry, CorpusError> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| CorpusError::UnknownTarget(id.into()))
    }

    pub fn program(&self, e: &CorpusEntry) -> Result<String, CorpusError> {
        Ok(std::fs::read_to_string(self.dir.join(&e.program))?)
    }

    pub fn mesh(&self, e: &CorpusEntry) -> Result<TriangleMesh, CorpusError> {
        Ok(load_mesh(&self.dir.join(&e.mesh))?)
    }

    /// Checks every file against its manifest hash.
    pub fn verify(&self) -> Result<(), CorpusError> {
        for e in &self.entries {
            for (rel, hash) in [(&e.program, &e.program_sha256), (&e.mesh, &e.mesh_sha256)] {
                let path = self.dir.join(rel);
                if &sha256_hex(&std::fs::read(&path)?) != hash {
                    return Err(CorpusError::HashMismatch(path));
                }
            }
        }
        Ok(())
    }
}
