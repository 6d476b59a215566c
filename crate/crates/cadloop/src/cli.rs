//! The `cadloop` command line: argument parsing, configuration resolution
//! and the subcommands.
//!
//! Every command writes the resolved configuration (`config.txt`) and a
//! `manifest.json` listing its outputs into its output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cadloop_core::dsl::DslError;
use cadloop_core::math::mix_seed;
use cadloop_core::mesh::{fit_to_program_domain, MeshError};
use cadloop_core::metrics::{aggregate, MetricReport, MetricTarget, MetricsError};
use cadloop_core::refine::{
    evaluate_candidate, report_against, run_loop, run_scan_track, DslRenderer, Editor, EditorError,
    EditorRequest, EvidenceBuilder, EvidenceError, LoopError, LoopOutcome, LoopTarget, Modality,
    NoisyOracleEditor, OracleEditor, Renderer, ScriptEntry, ScriptedEditor, SearchMode, Trace,
};
use cadloop_core::rollout::{
    rollout, split_corpus, stage_a_samples, stage_mix_samples, EvidenceSettings, RolloutError,
    RolloutTarget, Rollouts, Stage,
};
use cadloop_core::scan::{
    simulate_scan_with, ImplicitReconstructor, ScanError, SurfaceReconstructor,
};
use cadloop_core::{Frame, NormalizationTransform, TriangleMesh, Vec3};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, EditorKind, RunConfig};
use crate::corpus::{gen_corpus, Corpus, CorpusError, CorpusSpec};
use crate::dataset::{read_rollouts, write_rollouts, write_samples, DatasetError};
use crate::external::{ExternalReconstructor, ExternalRenderer};
use crate::formats::{overlay_png, read_jsonl, write_json, FormatError};
use crate::meshio::{load_mesh, save_mesh, MeshIoError};
use crate::remote::RemoteEditor;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Editor(#[from] EditorError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CommandError {
    /// 2 for usage and input problems, 3 for failures inside a pipeline.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_)
            | CommandError::Config(_)
            | CommandError::Input(_)
            | CommandError::ManifestMismatch(_) => 2,
            _ => 3,
        }
    }
}

/// Errors reading a named input become input errors.
fn input<E: std::fmt::Display>(e: E) -> CommandError {
    CommandError::Input(e.to_string())
}

fn mesh_input(e: MeshIoError) -> CommandError {
    match e {
        MeshIoError::Io(e) => CommandError::Io(e),
        e => input(e),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cadloop",
    version,
    about = "Closed-loop CAD program recovery harness"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Config override, repeatable; applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed (`seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (`workers`); outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    A,
    RolloutB,
    B,
    RolloutC,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    D1,
    D2,
    D3,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random programs, their meshes and a manifest.
    GenCorpus {
        /// Number of programs.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Largest number of extrusions per program.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=8))]
        complexity: u64,
        /// Corpus directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a scan of a mesh.
    Scan {
        /// Mesh file (OBJ, STL or PLY).
        #[arg(long)]
        mesh: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score programs against the corpus they reconstruct.
    Eval {
        /// Corpus directory with the target meshes.
        #[arg(long)]
        targets: PathBuf,
        /// Directory of `<id>.cadl` programs, one per target.
        #[arg(long)]
        programs: PathBuf,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the refinement loop on one target.
    Loop(LoopArgs),
    /// Emit curriculum data for one stage.
    Rollouts {
        /// Corpus directory.
        #[arg(long)]
        corpus: PathBuf,
        /// Rollout pass or training stage to emit.
        #[arg(long, value_enum)]
        stage: StageArg,
        /// Corpus part to use; defaults to d1 for stage A, d2 for Stage B
        /// and d3 for Stage C.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Editor kind (`editor.kind`).
        #[arg(long)]
        editor: Option<String>,
        /// Dataset directory, shared by all stages.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct LoopArgs {
    /// Corpus holding the target; use with --target.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Corpus entry id.
    #[arg(long)]
    pub target: Option<String>,
    /// A mesh file to reconstruct instead of a corpus entry.
    #[arg(long, conflicts_with_all = ["corpus", "target"])]
    pub mesh: Option<PathBuf>,
    /// Ground-truth program for oracle editors with --mesh.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// `oracle`, `noisy`, `scripted` or `remote` (`editor.kind`).
    #[arg(long)]
    pub editor: Option<String>,
    /// `greedy` or `beam` (`loop.mode`).
    #[arg(long)]
    pub mode: Option<String>,
    /// `image`, `pointcloud` or `cross_modal` (`loop.modality`).
    #[arg(long)]
    pub modality: Option<String>,
    /// Beam width N (`loop.width`).
    #[arg(long)]
    pub width: Option<usize>,
    /// Step budget s (`loop.steps`).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Run on a simulated scan of the target (`scan.enabled`).
    #[arg(long)]
    pub scan: bool,
    /// Remote editor URL (`editor.endpoint`).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn push(o: &mut Vec<String>, key: &str, v: Option<impl ToString>) {
    if let Some(v) = v {
        o.push(format!("{key}={}", v.to_string()));
    }
}

/// Resolves defaults < file < `--set` < dedicated flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CommandError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.global.config {
        cfg.merge_file(path)?;
    }
    cfg.merge_overrides(&cli.global.overrides)?;
    let mut o = Vec::new();
    push(&mut o, "seed", cli.global.seed);
    push(&mut o, "workers", cli.global.workers);
    match &cli.command {
        Command::Loop(a) => {
            push(&mut o, "editor.kind", a.editor.as_ref());
            push(&mut o, "loop.mode", a.mode.as_ref());
            push(&mut o, "loop.modality", a.modality.as_ref());
            push(&mut o, "loop.width", a.width);
            push(&mut o, "loop.steps", a.steps);
            push(&mut o, "scan.enabled", a.scan.then_some(true));
            push(&mut o, "editor.endpoint", a.endpoint.as_ref());
        }
        Command::Rollouts { editor, .. } => push(&mut o, "editor.kind", editor.as_ref()),
        _ => {}
    }
    cfg.merge_overrides(&o)?;
    Ok(cfg)
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: String,
    outputs: Vec<String>,
}

/// Writes `config<suffix>.txt` and `manifest<suffix>.json`.
fn finish_run(
    out: &Path,
    suffix: &str,
    command: &str,
    cfg: &RunConfig,
    outputs: Vec<String>,
) -> Result<(), CommandError> {
    std::fs::create_dir_all(out)?;
    let config = format!("config{suffix}.txt");
    std::fs::write(out.join(&config), cfg.to_text())?;
    write_json(
        &RunManifest {
            command,
            config,
            outputs,
        },
        &out.join(format!("manifest{suffix}.json")),
    )?;
    Ok(())
}

fn renderer(cfg: &RunConfig) -> Box<dyn Renderer> {
    match &cfg.render_external {
        Some(command) => Box::new(ExternalRenderer {
            command: command.clone(),
        }),
        None => Box::new(DslRenderer {
            resolution: cfg.render_resolution,
        }),
    }
}

fn reconstructor(cfg: &RunConfig) -> Box<dyn SurfaceReconstructor> {
    match &cfg.scan_external {
        Some(command) => Box::new(ExternalReconstructor {
            command: command.clone(),
        }),
        None => Box::new(ImplicitReconstructor),
    }
}

/// Dispatches each request to the editor registered for its target.
#[derive(Default)]
pub struct PerTargetEditor {
    editors: BTreeMap<String, Box<dyn Editor>>,
}

impl PerTargetEditor {
    pub fn insert(&mut self, id: impl Into<String>, editor: Box<dyn Editor>) {
        self.editors.insert(id.into(), editor);
    }
}

impl Editor for PerTargetEditor {
    fn propose(&self, request: &EditorRequest<'_>) -> Result<String, EditorError> {
        match self.editors.get(request.target_id) {
            Some(e) => e.propose(request),
            None => Err(EditorError::MissingKey {
                target_id: request.target_id.into(),
                step: request.step,
                index: request.index,
            }),
        }
    }

    fn check(&self) -> Result<(), EditorError> {
        self.editors.values().try_for_each(|e| e.check())
    }
}

/// The configured editor. Oracle kinds need `ground_truth`, a list of
/// `(target id, program)`.
pub fn build_editor(
    cfg: &RunConfig,
    ground_truth: &[(String, String)],
) -> Result<Box<dyn Editor>, CommandError> {
    let e = &cfg.editor;
    Ok(match e.kind {
        EditorKind::Oracle | EditorKind::Noisy => {
            if ground_truth.is_empty() {
                return Err(CommandError::Usage(
                    "oracle editors need a ground-truth program".into(),
                ));
            }
            let mut per = PerTargetEditor::default();
            for (id, program) in ground_truth {
                let editor: Box<dyn Editor> = if e.kind == EditorKind::Oracle {
                    Box::new(OracleEditor::new(program.clone()))
                } else {
                    Box::new(
                        NoisyOracleEditor::new(
                            program,
                            e.magnitude,
                            mix_seed(&[e.seed, crate::id_seed(id)]),
                        )
                        .map_err(|err: DslError| input(format!("ground truth of {id}: {err}")))?,
                    )
                };
                per.insert(id.clone(), editor);
            }
            Box::new(per)
        }
        EditorKind::Scripted => {
            let path = e
                .script
                .as_ref()
                .ok_or_else(|| CommandError::Usage("editor.script is not set".into()))?;
            let entries: Vec<ScriptEntry> = read_jsonl(path).map_err(input)?;
            Box::new(ScriptedEditor::new(entries))
        }
        EditorKind::Remote => {
            let url = e
                .endpoint
                .as_ref()
                .ok_or_else(|| CommandError::Usage("editor.endpoint is not set".into()))?;
            Box::new(RemoteEditor::new(
                url.clone(),
                Duration::from_millis(e.timeout_ms),
                e.retries,
            ))
        }
    })
}

pub fn run(cli: &Cli) -> Result<(), CommandError> {
    let cfg = resolve_config(cli)?;
    #[cfg(feature = "parallel")]
    if cfg.workers > 0 {
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }
    match &cli.command {
        Command::GenCorpus {
            count,
            complexity,
            out,
        } => cmd_gen_corpus(&cfg, *count as usize, *complexity as usize, out),
        Command::Scan { mesh, out } => cmd_scan(&cfg, mesh, out),
        Command::Eval {
            targets,
            programs,
            out,
        } => cmd_eval(&cfg, targets, programs, out.as_deref()).map(|_| ()),
        Command::Loop(args) => cmd_loop(&cfg, args),
        Command::Rollouts {
            corpus,
            stage,
            split,
            out,
            ..
        } => cmd_rollouts(&cfg, corpus, *stage, *split, out),
    }
}

pub fn cmd_gen_corpus(
    cfg: &RunConfig,
    count: usize,
    complexity: usize,
    out: &Path,
) -> Result<(), CommandError> {
    let spec = CorpusSpec {
        count,
        seed: cfg.seed,
        max_complexity: complexity,
        resolution: cfg.render_resolution,
    };
    let entries = gen_corpus(out, &spec)?;
    println!("wrote {} programs to {}", entries.len(), out.display());
    finish_run(
        out,
        "",
        "gen-corpus",
        cfg,
        vec![
            crate::corpus::MANIFEST.into(),
            "programs".into(),
            "meshes".into(),
        ],
    )
}

#[derive(Debug, Serialize)]
struct ScanSummary {
    merged_points: usize,
    per_view_counts: Vec<usize>,
    holes: usize,
    boundary_edges: usize,
    clean_vs_scan: MetricReport,
}

pub fn cmd_scan(cfg: &RunConfig, mesh_path: &Path, out: &Path) -> Result<(), CommandError> {
    let mesh = load_mesh(mesh_path).map_err(mesh_input)?;
    let recon = reconstructor(cfg);
    let result = simulate_scan_with(&mesh, &cfg.scan, recon.as_ref())?;
    std::fs::create_dir_all(out)?;
    save_mesh(&result.scan_mesh, &out.join("scan.obj")).map_err(mesh_input)?;
    let summary = ScanSummary {
        merged_points: result.merged_points.len(),
        per_view_counts: result.per_view_counts.clone(),
        holes: result.holes,
        boundary_edges: result.scan_mesh.boundary_edge_count(),
        clean_vs_scan: MetricTarget::new(&mesh, cfg.metric)?.score(&result.scan_mesh),
    };
    write_json(&summary, &out.join("scan.json"))?;
    println!(
        "scan: {} points, {} holes",
        summary.merged_points, summary.holes
    );
    finish_run(
        out,
        "",
        "scan",
        cfg,
        vec!["scan.obj".into(), "scan.json".into()],
    )
}

#[derive(Debug, Serialize)]
pub struct EvalRow {
    pub target_id: String,
    pub report: MetricReport,
    pub failure: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub aggregate: cadloop_core::metrics::AggregateReport,
    pub rows: Vec<EvalRow>,
}

pub fn cmd_eval(
    cfg: &RunConfig,
    targets: &Path,
    programs: &Path,
    out: Option<&Path>,
) -> Result<EvalReport, CommandError> {
    let corpus = Corpus::load(targets).map_err(input)?;
    if corpus.entries.is_empty() {
        return Err(input(format!("{} lists no targets", targets.display())));
    }
    let listed: Vec<String> = std::fs::read_dir(programs)
        .map_err(|e| input(format!("{}: {e}", programs.display())))?
        .filter_map(|d| d.ok())
        .filter_map(|d| {
            let p = d.path();
            (p.extension().is_some_and(|x| x == "cadl"))
                .then(|| p.file_stem()?.to_str().map(String::from))
                .flatten()
        })
        .collect();
    let ids = corpus.ids();
    if let Some(extra) = listed.iter().find(|id| !ids.contains(id)) {
        return Err(CommandError::ManifestMismatch(format!(
            "program {extra} has no target"
        )));
    }
    let r = renderer(cfg);
    let mut rows = Vec::with_capacity(ids.len());
    for e in &corpus.entries {
        let path = programs.join(format!("{}.cadl", e.id));
        let program = std::fs::read_to_string(&path).map_err(|_| {
            CommandError::ManifestMismatch(format!("target {} has no program", e.id))
        })?;
        let target = MetricTarget::new(&corpus.mesh(e).map_err(input)?, cfg.metric)?;
        let ev = evaluate_candidate(&program, r.as_ref(), &target);
        rows.push(EvalRow {
            target_id: e.id.clone(),
            report: ev.report,
            failure: ev.failure.map(|f| f.message),
        });
    }
    let reports: Vec<MetricReport> = rows.iter().map(|r| r.report).collect();
    let report = EvalReport {
        aggregate: aggregate(&reports)?,
        rows,
    };
    print!("{}", report.aggregate.table());
    if let Some(out) = out {
        std::fs::create_dir_all(out)?;
        write_json(&report, &out.join("report.json"))?;
        std::fs::write(out.join("report.txt"), report.aggregate.table())?;
        finish_run(
            out,
            "",
            "eval",
            cfg,
            vec!["report.json".into(), "report.txt".into()],
        )?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct LoopReport<'a> {
    target_id: &'a str,
    mode: SearchMode,
    scan: bool,
    aggregate: cadloop_core::metrics::AggregateReport,
    best_program: Option<&'a str>,
    best_curve: Vec<Option<f64>>,
    render_count: usize,
    compile_failures: usize,
    stopped_early: bool,
}

/// Overlay of each step's lowest-discrepancy candidate against `target`;
/// a step without a valid candidate gets the null prediction.
fn write_step_overlays(
    trace: &Trace,
    target: &TriangleMesh,
    renderer: &dyn Renderer,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<Vec<String>, CommandError> {
    std::fs::create_dir_all(dir.join("overlays"))?;
    let view = cadloop_core::view::ViewConfig::default();
    let builder = EvidenceBuilder::new(target, Modality::Image, &view, cfg.seed)?;
    let mut written = Vec::new();
    for step in &trace.steps {
        let best = step
            .candidates
            .iter()
            .filter_map(|c| c.discrepancy().map(|d| (d, c)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index)))
            .map(|(_, c)| c);
        let mesh = best.and_then(|c| renderer.render(&c.program).ok());
        let ev = builder.build(best.map(|c| (c.program.as_str(), mesh.as_ref())), cfg.seed)?;
        if let Some(o) = &ev.overlay {
            let rel = format!("overlays/step_{}.png", step.step);
            std::fs::write(dir.join(&rel), overlay_png(o)?)?;
            written.push(rel);
        }
    }
    Ok(written)
}

/// Share of the program domain an external mesh is fitted into; the rest
/// leaves room for scan artifacts.
pub const FIT_MARGIN: f64 = 0.9;

/// Meshes already inside the program domain are kept as they are; others
/// are fitted into it with [`FIT_MARGIN`].
pub fn into_program_domain(mesh: TriangleMesh) -> Result<TriangleMesh, CommandError> {
    let limit = cadloop_core::dsl::DOMAIN_HALF_EXTENT;
    let b = mesh.aabb();
    if b.min
        .to_array()
        .iter()
        .chain(&b.max.to_array())
        .all(|v| v.abs() <= FIT_MARGIN * limit)
    {
        return Ok(mesh);
    }
    let fitted = fit_to_program_domain(&mesh).map_err(input)?;
    let shrink = NormalizationTransform {
        scale: FIT_MARGIN,
        translation: Vec3::ZERO,
        frame: Frame::SignedCube11,
    };
    Ok(fitted.transformed(&shrink))
}

pub fn cmd_loop(cfg: &RunConfig, args: &LoopArgs) -> Result<(), CommandError> {
    let (id, clean, gt) = match (&args.corpus, &args.target, &args.mesh) {
        (Some(dir), Some(id), None) => {
            let corpus = Corpus::load(dir).map_err(input)?;
            let e = corpus.entry(id).map_err(input)?;
            (
                id.clone(),
                corpus.mesh(e).map_err(input)?,
                Some(corpus.program(e).map_err(input)?),
            )
        }
        (None, None, Some(path)) => {
            let mesh = into_program_domain(load_mesh(path).map_err(mesh_input)?)?;
            let gt = args
                .program
                .as_ref()
                .map(|p| {
                    std::fs::read_to_string(p).map_err(|e| input(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("target")
                .to_string();
            (id, mesh, gt)
        }
        _ => {
            return Err(CommandError::Usage(
                "give --corpus with --target, or --mesh".into(),
            ))
        }
    };
    let truth: Vec<(String, String)> = gt.iter().map(|p| (id.clone(), p.clone())).collect();
    let editor = build_editor(cfg, &truth)?;
    editor.check()?;
    let r = renderer(cfg);
    let lcfg = cfg.loop_config();
    let out = &args.out;
    std::fs::create_dir_all(out)?;
    let mut outputs = vec![
        "trace.json".to_string(),
        "report.json".into(),
        "report.txt".into(),
    ];
    let (outcome, aggregate, evidence_target): (LoopOutcome, _, TriangleMesh) = if cfg.scan_enabled
    {
        let recon = reconstructor(cfg);
        let scan = simulate_scan_with(&clean, &cfg.scan, recon.as_ref())?.scan_mesh;
        save_mesh(&scan, &out.join("scan.obj")).map_err(mesh_input)?;
        outputs.push("scan.obj".into());
        let (outcome, report) = run_scan_track(
            &clean,
            &scan,
            &id,
            cfg.mode,
            editor.as_ref(),
            r.as_ref(),
            &lcfg,
        )?;
        (outcome, report, scan)
    } else {
        let target = LoopTarget::new(id.clone(), &clean, &lcfg)?;
        let outcome = run_loop(cfg.mode, &target, editor.as_ref(), r.as_ref(), &lcfg)?;
        let report = report_against(&clean, &outcome, &cfg.metric)?;
        (outcome, report, clean.clone())
    };
    let trace = &outcome.trace;
    write_json(trace, &out.join("trace.json"))?;
    let report = LoopReport {
        target_id: &id,
        mode: cfg.mode,
        scan: cfg.scan_enabled,
        aggregate,
        best_program: trace.best_so_far.as_ref().map(|c| c.program.as_str()),
        best_curve: trace.best_curve(),
        render_count: trace.render_count,
        compile_failures: trace.compile_failures,
        stopped_early: trace.stopped_early,
    };
    write_json(&report, &out.join("report.json"))?;
    std::fs::write(out.join("report.txt"), aggregate.table())?;
    if let (Some(best), Some(mesh)) = (&trace.best_so_far, &outcome.best_mesh) {
        std::fs::write(out.join("best.cadl"), &best.program)?;
        save_mesh(mesh, &out.join("best.obj")).map_err(mesh_input)?;
        outputs.extend(["best.cadl".into(), "best.obj".into()]);
    }
    outputs.extend(write_step_overlays(
        trace,
        &evidence_target,
        r.as_ref(),
        cfg,
        out,
    )?);
    print!("{}", aggregate.table());
    println!("renders: {}", trace.render_count);
    finish_run(out, "", "loop", cfg, outputs)
}

struct LoadedTarget {
    id: String,
    program: String,
    mesh: TriangleMesh,
}

fn load_split(corpus: &Corpus, ids: &[String]) -> Result<Vec<LoadedTarget>, CommandError> {
    ids.iter()
        .map(|id| {
            let e = corpus.entry(id).map_err(input)?;
            Ok(LoadedTarget {
                id: id.clone(),
                program: corpus.program(e).map_err(input)?,
                mesh: corpus.mesh(e).map_err(input)?,
            })
        })
        .collect()
}

pub fn cmd_rollouts(
    cfg: &RunConfig,
    corpus_dir: &Path,
    stage: StageArg,
    split: Option<SplitArg>,
    out: &Path,
) -> Result<(), CommandError> {
    let corpus = Corpus::load(corpus_dir).map_err(input)?;
    let split = split.unwrap_or(match stage {
        StageArg::A => SplitArg::D1,
        StageArg::RolloutB | StageArg::B => SplitArg::D2,
        StageArg::RolloutC | StageArg::C => SplitArg::D3,
    });
    let ids = match split {
        SplitArg::All => corpus.ids(),
        part => {
            let [d1, d2, d3] = split_corpus(&corpus.ids(), &cfg.split).map_err(input)?;
            match part {
                SplitArg::D1 => d1,
                SplitArg::D2 => d2,
                _ => d3,
            }
        }
    };
    let loaded = load_split(&corpus, &ids)?;
    let targets: Vec<RolloutTarget<'_>> = loaded
        .iter()
        .map(|t| RolloutTarget {
            id: &t.id,
            program: &t.program,
            mesh: &t.mesh,
        })
        .collect();
    let settings = EvidenceSettings {
        modality: cfg.modality,
        seed: cfg.seed,
        ..EvidenceSettings::default()
    };
    std::fs::create_dir_all(out)?;
    let (suffix, outputs) = match stage {
        StageArg::RolloutB | StageArg::RolloutC => {
            let depth = if stage == StageArg::RolloutB { 1 } else { 2 };
            let truth: Vec<(String, String)> = loaded
                .iter()
                .map(|t| (t.id.clone(), t.program.clone()))
                .collect();
            let editor = build_editor(cfg, &truth)?;
            editor.check()?;
            let r = renderer(cfg);
            let mut rollouts = Rollouts::new();
            for (id, steps) in rollout(editor.as_ref(), r.as_ref(), &targets, depth, &settings) {
                rollouts.insert(id, steps?);
            }
            write_rollouts(out, depth, &rollouts)?;
            println!("rolled out {} targets to depth {depth}", rollouts.len());
            let file = crate::dataset::rollout_file(depth);
            (
                format!("_rollout{depth}"),
                vec![file, "rollout_meshes".into()],
            )
        }
        StageArg::A | StageArg::B | StageArg::C => {
            let (st, samples) = match stage {
                StageArg::A => (Stage::A, stage_a_samples(&targets, &settings)?),
                _ => {
                    let (st, depth) = if stage == StageArg::B {
                        (Stage::B, 1)
                    } else {
                        (Stage::C, 2)
                    };
                    let rollouts = match read_rollouts(out, depth) {
                        Ok(r) => r,
                        Err(DatasetError::Format(FormatError::Io(e)))
                            if e.kind() == std::io::ErrorKind::NotFound =>
                        {
                            Rollouts::new()
                        }
                        Err(e) => return Err(e.into()),
                    };
                    let seed = mix_seed(&[cfg.seed, st as u64 + 1]);
                    (
                        st,
                        stage_mix_samples(st, &targets, &rollouts, &settings, seed)?,
                    )
                }
            };
            let records = write_samples(out, st, &samples)?;
            println!("wrote {} stage {st:?} records", records.len());
            (
                format!("_stage_{}", format!("{st:?}").to_lowercase()),
                vec![crate::dataset::stage_file(st).into(), "evidence".into()],
            )
        }
    };
    finish_run(out, &suffix, "rollouts", cfg, outputs)
}
