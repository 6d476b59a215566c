//! Run configuration: flat `section.key = value` text merged as
//! defaults < file < command-line overrides.
//!
//! ```text
//! # comments run to end of line
//! seed = 7
//! loop.steps = 5
//! [scan]          # prefixes the keys that follow
//! enabled = true
//! n_points = 50000
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use cadloop_core::metrics::MetricConfig;
use cadloop_core::refine::{ContextPolicy, LoopConfig, Modality, SearchMode};
use cadloop_core::rollout::SplitConfig;
use cadloop_core::scan::ScanConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read config {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditorKind {
    Oracle,
    Noisy,
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorSettings {
    pub kind: EditorKind,
    /// Noisy oracle magnitude at step 0; decays by half per step.
    pub magnitude: f64,
    pub seed: u64,
    pub script: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub render_resolution: usize,
    /// Command replacing the DSL renderer: `cmd <program> <out.ply>`.
    pub render_external: Option<String>,
    pub metric: MetricConfig,
    pub mode: SearchMode,
    pub width: usize,
    pub steps: usize,
    pub stop_threshold: f64,
    pub modality: Modality,
    pub context: ContextPolicy,
    pub editor: EditorSettings,
    pub scan_enabled: bool,
    pub scan: ScanConfig,
    /// Command replacing the built-in reconstruction: `cmd <in.ply> <out.ply>`.
    pub scan_external: Option<String>,
    pub split: SplitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            render_resolution: cadloop_core::dsl::DEFAULT_RESOLUTION,
            render_external: None,
            metric: MetricConfig::default(),
            mode: SearchMode::Greedy,
            width: 5,
            steps: 5,
            stop_threshold: 0.0,
            modality: Modality::Image,
            context: ContextPolicy::Latest,
            editor: EditorSettings {
                kind: EditorKind::Oracle,
                magnitude: 0.3,
                seed: 0,
                script: None,
                endpoint: None,
                timeout_ms: 30_000,
                retries: 1,
            },
            scan_enabled: false,
            scan: ScanConfig::default(),
            scan_external: None,
            split: SplitConfig::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_enum<T>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError>
where
    T: Copy,
{
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
                reason: format!("expected one of {}", names.join(", ")),
            }
        })
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

const MODALITIES: [(&str, Modality); 3] = [
    ("image", Modality::Image),
    ("pointcloud", Modality::PointCloud),
    ("cross_modal", Modality::CrossModal),
];
const MODES: [(&str, SearchMode); 2] = [("greedy", SearchMode::Greedy), ("beam", SearchMode::Beam)];
const CONTEXTS: [(&str, ContextPolicy); 2] = [
    ("latest", ContextPolicy::Latest),
    ("best_so_far", ContextPolicy::BestSoFar),
];
const EDITORS: [(&str, EditorKind); 4] = [
    ("oracle", EditorKind::Oracle),
    ("noisy", EditorKind::Noisy),
    ("scripted", EditorKind::Scripted),
    ("remote", EditorKind::Remote),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options
        .iter()
        .find(|(_, x)| *x == v)
        .map(|(n, _)| *n)
        .expect("every variant is listed")
}

impl RunConfig {
    /// Sets one key. Keys are `section.name` or bare top-level names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let k = key.trim();
        match k {
            "seed" => self.seed = parse_value(k, v)?,
            "workers" => self.workers = parse_value(k, v)?,
            "render.resolution" => self.render_resolution = parse_value(k, v)?,
            "render.external" => self.render_external = optional(v),
            "metric.cd_points" => self.metric.cd_points = parse_value(k, v)?,
            "metric.iou_resolution" => self.metric.iou_resolution = parse_value(k, v)?,
            "metric.seed" => self.metric.seed = parse_value(k, v)?,
            "loop.mode" => self.mode = parse_enum(k, v, &MODES)?,
            "loop.width" => self.width = parse_value(k, v)?,
            "loop.steps" => self.steps = parse_value(k, v)?,
            "loop.stop_threshold" => self.stop_threshold = parse_value(k, v)?,
            "loop.modality" => self.modality = parse_enum(k, v, &MODALITIES)?,
            "loop.context" => self.context = parse_enum(k, v, &CONTEXTS)?,
            "editor.kind" => self.editor.kind = parse_enum(k, v, &EDITORS)?,
            "editor.magnitude" => self.editor.magnitude = parse_value(k, v)?,
            "editor.seed" => self.editor.seed = parse_value(k, v)?,
            "editor.script" => self.editor.script = optional(v).map(PathBuf::from),
            "editor.endpoint" => self.editor.endpoint = optional(v),
            "editor.timeout_ms" => self.editor.timeout_ms = parse_value(k, v)?,
            "editor.retries" => self.editor.retries = parse_value(k, v)?,
            "scan.enabled" => self.scan_enabled = parse_value(k, v)?,
            "scan.n_points" => self.scan.n_points = parse_value(k, v)?,
            "scan.n_views" => self.scan.n_views = parse_value(k, v)?,
            "scan.radius_factor" => self.scan.radius_factor = parse_value(k, v)?,
            "scan.hole_count_min" => self.scan.hole_count.0 = parse_value(k, v)?,
            "scan.hole_count_max" => self.scan.hole_count.1 = parse_value(k, v)?,
            "scan.hole_radius_min" => self.scan.hole_radius.0 = parse_value(k, v)?,
            "scan.hole_radius_max" => self.scan.hole_radius.1 = parse_value(k, v)?,
            "scan.recon_resolution" => self.scan.recon_resolution = parse_value(k, v)?,
            "scan.hpr_gamma" => self.scan.hpr_gamma = parse_value(k, v)?,
            "scan.seed" => self.scan.seed = parse_value(k, v)?,
            "scan.external" => self.scan_external = optional(v),
            "split.d1" => self.split.fractions[0] = parse_value(k, v)?,
            "split.d2" => self.split.fractions[1] = parse_value(k, v)?,
            "split.d3" => self.split.fractions[2] = parse_value(k, v)?,
            "split.seed" => self.split.seed = parse_value(k, v)?,
            _ => return Err(ConfigError::UnknownKey(k.into())),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        vec![
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
            ("render.resolution", self.render_resolution.to_string()),
            ("render.external", opt(&self.render_external)),
            ("metric.cd_points", self.metric.cd_points.to_string()),
            (
                "metric.iou_resolution",
                self.metric.iou_resolution.to_string(),
            ),
            ("metric.seed", self.metric.seed.to_string()),
            ("loop.mode", name_of(&MODES, self.mode).into()),
            ("loop.width", self.width.to_string()),
            ("loop.steps", self.steps.to_string()),
            ("loop.stop_threshold", format!("{:?}", self.stop_threshold)),
            ("loop.modality", name_of(&MODALITIES, self.modality).into()),
            ("loop.context", name_of(&CONTEXTS, self.context).into()),
            ("editor.kind", name_of(&EDITORS, self.editor.kind).into()),
            ("editor.magnitude", format!("{:?}", self.editor.magnitude)),
            ("editor.seed", self.editor.seed.to_string()),
            (
                "editor.script",
                self.editor
                    .script
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
            ("editor.endpoint", opt(&self.editor.endpoint)),
            ("editor.timeout_ms", self.editor.timeout_ms.to_string()),
            ("editor.retries", self.editor.retries.to_string()),
            ("scan.enabled", self.scan_enabled.to_string()),
            ("scan.n_points", self.scan.n_points.to_string()),
            ("scan.n_views", self.scan.n_views.to_string()),
            (
                "scan.radius_factor",
                format!("{:?}", self.scan.radius_factor),
            ),
            ("scan.hole_count_min", self.scan.hole_count.0.to_string()),
            ("scan.hole_count_max", self.scan.hole_count.1.to_string()),
            (
                "scan.hole_radius_min",
                format!("{:?}", self.scan.hole_radius.0),
            ),
            (
                "scan.hole_radius_max",
                format!("{:?}", self.scan.hole_radius.1),
            ),
            (
                "scan.recon_resolution",
                self.scan.recon_resolution.to_string(),
            ),
            ("scan.hpr_gamma", format!("{:?}", self.scan.hpr_gamma)),
            ("scan.seed", self.scan.seed.to_string()),
            ("scan.external", opt(&self.scan_external)),
            ("split.d1", format!("{:?}", self.split.fractions[0])),
            ("split.d2", format!("{:?}", self.split.fractions[1])),
            ("split.d3", format!("{:?}", self.split.fractions[2])),
            ("split.seed", self.split.seed.to_string()),
        ]
    }

    /// The resolved configuration in the file format; parsing it back
    /// reproduces `self`.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Applies a config text on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            self.set(&key, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.merge_text(&text)
    }

    /// Applies `key=value` overrides.
    pub fn merge_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| ConfigError::BadValue {
                    key: o.as_ref().into(),
                    value: String::new(),
                    reason: "expected key=value".into(),
                })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            width: self.width,
            steps: self.steps,
            stop_threshold: self.stop_threshold,
            modality: self.modality,
            context: self.context,
            seed: self.seed,
            metric: self.metric,
            ..LoopConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::default();
        c.merge_text("seed = 9\n[loop]\nsteps = 3 # short\nmodality = cross_modal\n[editor]\nendpoint = http://x:1/e\n")
            .unwrap();
        assert_eq!((c.seed, c.steps, c.modality), (9, 3, Modality::CrossModal));
        let mut d = RunConfig::default();
        d.merge_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn overrides_win_and_errors_are_reported() {
        let mut c = RunConfig::default();
        c.merge_text("loop.width = 3").unwrap();
        c.merge_overrides(&["loop.width=4"]).unwrap();
        assert_eq!(c.width, 4);
        assert!(matches!(
            c.merge_text("nope = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            c.merge_text("loop.width = x"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            c.merge_text("loop.mode = sideways"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            c.merge_text("just words"),
            Err(ConfigError::Syntax { line: 1 })
        ));
    }
}
