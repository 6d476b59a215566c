use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{
    Candidate, CandidateRef, ContextPolicy, DecodeMode, Editor, EditorRequest, Evidence,
    EvidenceBuilder, Failure, FailureKind, LoopConfig, LoopError, RenderError, Renderer,
    SearchMode, StepRecord, Trace,
};
use crate::math::mix_seed;
use crate::mesh::TriangleMesh;
use crate::metrics::{aggregate, AggregateReport, MetricConfig, MetricReport, MetricTarget};

/// The evaluation target of a loop with its cached scoring and evidence
/// state. Everything the loop knows about the target goes through here.
#[derive(Debug, Clone)]
pub struct LoopTarget {
    id: String,
    metric: MetricTarget,
    evidence: EvidenceBuilder,
}

impl LoopTarget {
    /// `mesh` in program-domain coordinates.
    pub fn new(
        id: impl Into<String>,
        mesh: &TriangleMesh,
        cfg: &LoopConfig,
    ) -> Result<Self, LoopError> {
        cfg.validate()?;
        Ok(Self {
            id: id.into(),
            metric: MetricTarget::new(mesh, cfg.metric)?,
            evidence: EvidenceBuilder::new(mesh, cfg.modality, &cfg.view, cfg.seed)?,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn metric(&self) -> &MetricTarget {
        &self.metric
    }

    pub fn evidence(&self) -> &EvidenceBuilder {
        &self.evidence
    }
}

/// Result of compiling, rendering and scoring one program.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub mesh: Option<TriangleMesh>,
    pub rendered: bool,
    pub failure: Option<Failure>,
}

impl Evaluation {
    fn failed(kind: FailureKind, message: String, rendered: bool) -> Self {
        Self {
            report: MetricReport::invalid(),
            mesh: None,
            rendered,
            failure: Some(Failure { kind, message }),
        }
    }
}

pub fn evaluate_candidate(
    program: &str,
    renderer: &dyn Renderer,
    metric: &MetricTarget,
) -> Evaluation {
    if let Err(e) = renderer.compile(program) {
        return Evaluation::failed(FailureKind::Compile, e.to_string(), false);
    }
    let mesh = match renderer.render(program) {
        Ok(m) => m,
        Err(e @ RenderError::Compile(_)) => {
            return Evaluation::failed(FailureKind::Compile, e.to_string(), true)
        }
        Err(e) => return Evaluation::failed(FailureKind::Render, e.to_string(), true),
    };
    let report = metric.score(&mesh);
    if !report.valid {
        return Evaluation::failed(
            FailureKind::Score,
            "candidate could not be scored".into(),
            true,
        );
    }
    Evaluation {
        report,
        mesh: Some(mesh),
        rendered: true,
        failure: None,
    }
}

/// A finished loop: the trace and the render of its best-so-far program.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub trace: Trace,
    pub best_mesh: Option<TriangleMesh>,
}

struct Job<'a> {
    index: usize,
    parent: Option<CandidateRef>,
    evidence: &'a Evidence,
}

struct Scored {
    candidate: Candidate,
    mesh: Option<TriangleMesh>,
    rendered: bool,
}

struct Ctx<'a> {
    target: &'a LoopTarget,
    editor: &'a dyn Editor,
    renderer: &'a dyn Renderer,
    cfg: &'a LoopConfig,
    mode: DecodeMode,
}

impl Ctx<'_> {
    fn evidence(
        &self,
        step: usize,
        parent: Option<(&str, Option<&TriangleMesh>)>,
        slot: usize,
    ) -> Result<Evidence, LoopError> {
        Ok(self.target.evidence.build(
            parent,
            mix_seed(&[self.cfg.seed, 1, step as u64, slot as u64]),
        )?)
    }

    fn run_job(&self, step: usize, job: &Job<'_>) -> Scored {
        let request = EditorRequest {
            target_id: &self.target.id,
            step,
            index: job.index,
            evidence: job.evidence,
            mode: self.mode,
            seed: mix_seed(&[self.cfg.seed, 2, step as u64, job.index as u64]),
        };
        let (program, eval) = match self.editor.propose(&request) {
            Ok(p) => {
                let eval = evaluate_candidate(&p, self.renderer, &self.target.metric);
                (p, eval)
            }
            Err(e) => (
                String::new(),
                Evaluation::failed(FailureKind::Editor, e.to_string(), false),
            ),
        };
        Scored {
            candidate: Candidate {
                program,
                report: eval.report,
                step_born: step,
                index: job.index,
                parent: job.parent,
                failure: eval.failure,
            },
            mesh: eval.mesh,
            rendered: eval.rendered,
        }
    }

    /// Runs the jobs of one step; results are in job order whatever the
    /// execution order.
    fn run_step(&self, step: usize, jobs: &[Job<'_>]) -> Vec<Scored> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            jobs.par_iter().map(|j| self.run_job(step, j)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            jobs.iter().map(|j| self.run_job(step, j)).collect()
        }
    }
}

struct Best {
    candidate: Candidate,
    mesh: TriangleMesh,
}

struct State {
    trace: Trace,
    best: Option<Best>,
}

impl State {
    fn new(target: &LoopTarget, mode: SearchMode) -> Self {
        Self {
            trace: Trace {
                target_id: target.id.clone(),
                mode,
                steps: Vec::new(),
                best_so_far: None,
                render_count: 0,
                compile_failures: 0,
                stopped_early: false,
            },
            best: None,
        }
    }

    fn best_discrepancy(&self) -> Option<f64> {
        self.best.as_ref().and_then(|b| b.candidate.discrepancy())
    }

    /// Folds a step into the trace and returns the survivor indices, best
    /// first. Ranking is by discrepancy, then candidate index; candidates of
    /// earlier steps win ties for best-so-far.
    fn record(
        &mut self,
        step: usize,
        scored: Vec<Scored>,
        width: usize,
        degraded: bool,
    ) -> (Vec<usize>, Vec<Option<TriangleMesh>>) {
        let mut ranked: Vec<(f64, usize)> = scored
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.candidate.discrepancy().map(|d| (d, i)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.truncate(width);
        let survivors: Vec<usize> = ranked
            .iter()
            .map(|&(_, i)| scored[i].candidate.index)
            .collect();
        if let Some(&(d, i)) = ranked.first() {
            if self.best_discrepancy().is_none_or(|b| d < b) {
                self.best = Some(Best {
                    candidate: scored[i].candidate.clone(),
                    mesh: scored[i]
                        .mesh
                        .clone()
                        .expect("valid candidates carry a mesh"),
                });
            }
        }
        let mut candidates = Vec::with_capacity(scored.len());
        let mut meshes = Vec::with_capacity(scored.len());
        for s in scored {
            self.trace.render_count += s.rendered as usize;
            self.trace.compile_failures += matches!(&s.candidate.failure, Some(f) if f.kind == FailureKind::Compile && !s.rendered)
                as usize;
            candidates.push(s.candidate);
            meshes.push(s.mesh);
        }
        self.trace.steps.push(StepRecord {
            step,
            candidates,
            survivors: survivors.clone(),
            degraded,
            best_so_far: self.best.as_ref().map(|b| b.candidate.reference()),
            best_discrepancy: self.best_discrepancy(),
        });
        (survivors, meshes)
    }

    fn finish(mut self) -> LoopOutcome {
        self.trace.best_so_far = self.best.as_ref().map(|b| b.candidate.clone());
        LoopOutcome {
            trace: self.trace,
            best_mesh: self.best.map(|b| b.mesh),
        }
    }
}

/// Single-path refinement: one deterministic editor call per step. Stops
/// early once the best-so-far improves by less than `stop_threshold`.
pub fn greedy_loop(
    target: &LoopTarget,
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    cfg: &LoopConfig,
) -> Result<LoopOutcome, LoopError> {
    cfg.validate()?;
    let ctx = Ctx {
        target,
        editor,
        renderer,
        cfg,
        mode: DecodeMode::Greedy,
    };
    let mut state = State::new(target, SearchMode::Greedy);
    let mut prev: Option<(CandidateRef, String, Option<TriangleMesh>)> = None;
    for step in 1..=cfg.steps {
        let evidence = ctx.evidence(
            step,
            prev.as_ref().map(|(_, p, m)| (p.as_str(), m.as_ref())),
            0,
        )?;
        let job = Job {
            index: 0,
            parent: prev.as_ref().map(|(r, _, _)| *r),
            evidence: &evidence,
        };
        let scored = ctx.run_step(step, &[job]);
        let before = state.best_discrepancy();
        let (_, mut meshes) = state.record(step, scored, 1, false);
        let latest = &state.trace.steps[step - 1].candidates[0];
        prev = Some(match (cfg.context, &state.best) {
            (ContextPolicy::BestSoFar, Some(b)) => (
                b.candidate.reference(),
                b.candidate.program.clone(),
                Some(b.mesh.clone()),
            ),
            _ => (
                latest.reference(),
                latest.program.clone(),
                meshes.pop().flatten(),
            ),
        });
        if step >= 2 {
            if let (Some(b), Some(a)) = (before, state.best_discrepancy()) {
                if b - a < cfg.stop_threshold {
                    state.trace.stopped_early = step < cfg.steps;
                    break;
                }
            }
        }
    }
    Ok(state.finish())
}

/// Stochastic beam: `N` samples at the first step, then `N` children per
/// survivor, keeping the `N` best valid children each step. A step with no
/// valid survivor continues from the best-so-far program alone.
pub fn stochastic_beam(
    target: &LoopTarget,
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    cfg: &LoopConfig,
) -> Result<LoopOutcome, LoopError> {
    cfg.validate()?;
    let n = cfg.width;
    let ctx = Ctx {
        target,
        editor,
        renderer,
        cfg,
        mode: DecodeMode::Sample,
    };
    let mut state = State::new(target, SearchMode::Beam);
    let mut parents: Vec<(CandidateRef, String, Option<TriangleMesh>)> = Vec::new();
    for step in 1..=cfg.steps {
        let mut degraded = false;
        if step > 1 && parents.is_empty() {
            degraded = true;
            parents.push(match &state.best {
                Some(b) => (
                    b.candidate.reference(),
                    b.candidate.program.clone(),
                    Some(b.mesh.clone()),
                ),
                None => {
                    let first = &state.trace.steps[step - 2].candidates[0];
                    (first.reference(), first.program.clone(), None)
                }
            });
        }
        let evidences: Vec<(Option<CandidateRef>, Evidence)> = if step == 1 {
            alloc::vec![(None, ctx.evidence(step, None, 0)?)]
        } else {
            parents
                .iter()
                .enumerate()
                .map(|(slot, (r, p, m))| {
                    Ok((Some(*r), ctx.evidence(step, Some((p, m.as_ref())), slot)?))
                })
                .collect::<Result<_, LoopError>>()?
        };
        let jobs: Vec<Job<'_>> = evidences
            .iter()
            .enumerate()
            .flat_map(|(slot, (parent, evidence))| {
                (0..n).map(move |c| Job {
                    index: slot * n + c,
                    parent: *parent,
                    evidence,
                })
            })
            .collect();
        let scored = ctx.run_step(step, &jobs);
        let (survivors, mut meshes) = state.record(step, scored, n, degraded);
        let candidates = &state.trace.steps[step - 1].candidates;
        parents = survivors
            .iter()
            .map(|&i| {
                (
                    candidates[i].reference(),
                    candidates[i].program.clone(),
                    meshes[i].take(),
                )
            })
            .collect();
    }
    Ok(state.finish())
}

pub fn run_loop(
    mode: SearchMode,
    target: &LoopTarget,
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    cfg: &LoopConfig,
) -> Result<LoopOutcome, LoopError> {
    match mode {
        SearchMode::Greedy => greedy_loop(target, editor, renderer, cfg),
        SearchMode::Beam => stochastic_beam(target, editor, renderer, cfg),
    }
}

/// Scores a finished loop's best-so-far render against a reference surface.
pub fn report_against(
    reference: &TriangleMesh,
    outcome: &LoopOutcome,
    metric: &MetricConfig,
) -> Result<AggregateReport, LoopError> {
    let report = match &outcome.best_mesh {
        Some(m) => MetricTarget::new(reference, *metric)?.score(m),
        None => MetricReport::invalid(),
    };
    Ok(aggregate(&[report])?)
}

/// Runs the loop against the scan and reports against the clean surface.
/// Selection only ever sees the scan; the clean mesh is first touched when
/// the finished trace is scored.
pub fn run_scan_track(
    clean: &TriangleMesh,
    scan: &TriangleMesh,
    target_id: &str,
    mode: SearchMode,
    editor: &dyn Editor,
    renderer: &dyn Renderer,
    cfg: &LoopConfig,
) -> Result<(LoopOutcome, AggregateReport), LoopError> {
    let target = LoopTarget::new(target_id, scan, cfg)?;
    let outcome = run_loop(mode, &target, editor, renderer, cfg)?;
    let report = report_against(clean, &outcome, &cfg.metric)?;
    Ok((outcome, report))
}
