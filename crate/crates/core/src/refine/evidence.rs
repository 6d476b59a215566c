use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::TriangleMesh;
use crate::pointcloud::{CloudTarget, DiscrepancyCloud, PcError};
use crate::view::{compose_overlay, encode_views, DepthImage, OverlayImage, ViewConfig, ViewError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Image,
    #[serde(rename = "pointcloud")]
    PointCloud,
    CrossModal,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::PointCloud => "pointcloud",
            Modality::CrossModal => "cross_modal",
        }
    }

    pub fn uses_image(self) -> bool {
        self != Modality::PointCloud
    }

    pub fn uses_cloud(self) -> bool {
        self != Modality::Image
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvidenceError {
    #[error(transparent)]
    View(#[from] ViewError),
    #[error(transparent)]
    Cloud(#[from] PcError),
}

/// What the editor sees at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub overlay: Option<OverlayImage>,
    pub cloud: Option<DiscrepancyCloud>,
    /// Absent exactly at the first step.
    pub prev_program: Option<String>,
    pub modality: Modality,
}

/// Builds evidence against one target, caching the target's depth grid and
/// dense cloud samples.
#[derive(Debug, Clone)]
pub struct EvidenceBuilder {
    modality: Modality,
    view: ViewConfig,
    target_grid: Option<DepthImage>,
    cloud_target: Option<CloudTarget>,
}

impl EvidenceBuilder {
    /// `target` in program-domain coordinates.
    pub fn new(
        target: &TriangleMesh,
        modality: Modality,
        view: &ViewConfig,
        seed: u64,
    ) -> Result<Self, EvidenceError> {
        let target_grid = if modality.uses_image() {
            Some(encode_views(target, view)?)
        } else {
            None
        };
        let cloud_target = if modality.uses_cloud() {
            Some(CloudTarget::new(target, seed)?)
        } else {
            None
        };
        Ok(Self {
            modality,
            view: view.clone(),
            target_grid,
            cloud_target,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    /// Evidence for a previous program and its render. `prev` is absent at
    /// the first step; a previous program that failed to render has no mesh
    /// and gets the same null-prediction encoding as the first step.
    pub fn build(
        &self,
        prev: Option<(&str, Option<&TriangleMesh>)>,
        seed: u64,
    ) -> Result<Evidence, EvidenceError> {
        let render = prev.and_then(|(_, m)| m);
        let overlay = match &self.target_grid {
            Some(grid) => {
                let pred = render.map(|m| encode_views(m, &self.view)).transpose()?;
                Some(compose_overlay(grid, pred.as_ref())?)
            }
            None => None,
        };
        let cloud = match &self.cloud_target {
            Some(ct) => Some(match render {
                Some(m) => ct.cloud(m, seed)?,
                None => ct.init_cloud(seed)?,
            }),
            None => None,
        };
        Ok(Evidence {
            overlay,
            cloud,
            prev_program: prev.map(|(p, _)| String::from(p)),
            modality: self.modality,
        })
    }
}

/// One-shot evidence for `target` and an optional previous program and render.
pub fn build_evidence(
    target: &TriangleMesh,
    prev: Option<(&str, Option<&TriangleMesh>)>,
    modality: Modality,
    view: &ViewConfig,
    seed: u64,
) -> Result<Evidence, EvidenceError> {
    EvidenceBuilder::new(target, modality, view, seed)?.build(prev, seed)
}
