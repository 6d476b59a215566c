use cadloop_core::dsl::{parse, print, random_program, render_mesh};
use cadloop_core::metrics::MetricConfig;
use cadloop_core::refine::*;
use cadloop_core::TriangleMesh;

const RES: usize = 64;

fn fast_cfg(width: usize, steps: usize) -> LoopConfig {
    LoopConfig {
        width,
        steps,
        metric: MetricConfig {
            cd_points: 2048,
            ..MetricConfig::default()
        },
        ..LoopConfig::default()
    }
}

fn program(seed: u64, complexity: usize) -> (String, TriangleMesh) {
    let ast = random_program(seed, complexity).unwrap();
    let mesh = render_mesh(&ast, RES).unwrap();
    (print(&ast), mesh)
}

struct Garbage;

impl Editor for Garbage {
    fn propose(&self, _: &EditorRequest<'_>) -> Result<String, EditorError> {
        Ok("extrude plane=QQ {".into())
    }
}

struct Failing;

impl Editor for Failing {
    fn propose(&self, _: &EditorRequest<'_>) -> Result<String, EditorError> {
        Err(EditorError::Timeout("no answer".into()))
    }
}

#[test]
fn oracle_greedy_converges_at_first_step() {
    let (gt, mesh) = program(7, 3);
    let cfg = fast_cfg(1, 4);
    let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
    let out = greedy_loop(
        &target,
        &OracleEditor::new(gt.clone()),
        &DslRenderer { resolution: RES },
        &cfg,
    )
    .unwrap();
    let curve = out.trace.best_curve();
    assert_eq!(curve.len(), 4);
    assert!(curve[0].unwrap() <= 0.5);
    assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(out.trace.best_so_far.as_ref().unwrap().program, gt);
    assert_eq!(out.trace.render_count, 4);
    assert_eq!(out.trace.invalid_rate_percent(), 0.0);
}

#[test]
fn unparsable_editor_never_renders() {
    let (_, mesh) = program(2, 2);
    let cfg = fast_cfg(1, 3);
    let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
    let renderer = CountingRenderer::new(DslRenderer { resolution: RES });
    let out = greedy_loop(&target, &Garbage, &renderer, &cfg).unwrap();
    assert!(out.trace.best_so_far.is_none() && out.best_mesh.is_none());
    assert_eq!((out.trace.render_count, renderer.renders()), (0, 0));
    assert_eq!(out.trace.compile_failures, 3);
    assert_eq!(out.trace.invalid_rate_percent(), 100.0);
    // Every step after the first still sees the previous program as context.
    assert_eq!(
        out.trace.steps[2].candidates[0].parent,
        Some(CandidateRef { step: 2, index: 0 })
    );
}

#[test]
fn editor_errors_are_invalid_candidates() {
    let (_, mesh) = program(2, 2);
    let cfg = fast_cfg(2, 2);
    let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
    let out = stochastic_beam(&target, &Failing, &DslRenderer { resolution: RES }, &cfg).unwrap();
    assert_eq!(out.trace.candidate_count(), 4);
    assert!(out.trace.steps[1].degraded);
    let f = out.trace.steps[0].candidates[0].failure.as_ref().unwrap();
    assert_eq!(f.kind, FailureKind::Editor);
}

#[test]
fn huge_threshold_stops_at_second_step() {
    let (gt, mesh) = program(4, 2);
    let cfg = LoopConfig {
        stop_threshold: 1e300,
        ..fast_cfg(1, 5)
    };
    let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
    let editor = NoisyOracleEditor::new(&gt, 0.3, 1).unwrap();
    let out = greedy_loop(&target, &editor, &DslRenderer { resolution: RES }, &cfg).unwrap();
    assert_eq!(out.trace.steps.len(), 2);
    assert!(out.trace.stopped_early);
}

#[test]
fn beam_render_budget() {
    let (gt, mesh) = program(5, 2);
    let editor = NoisyOracleEditor::new(&gt, 0.2, 3).unwrap();
    for (n, s, expected) in [(3, 3, 3 + 2 * 9), (1, 4, 4)] {
        let cfg = fast_cfg(n, s);
        let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
        let renderer = CountingRenderer::new(DslRenderer { resolution: 32 });
        let out = stochastic_beam(&target, &editor, &renderer, &cfg).unwrap();
        assert_eq!(out.trace.render_count, expected);
        assert_eq!(renderer.renders(), expected);
        for step in &out.trace.steps {
            assert!(step.survivors.len() <= n);
            let mut ds: Vec<f64> = step
                .survivors
                .iter()
                .map(|&i| step.candidates[i].discrepancy().unwrap())
                .collect();
            let sorted = {
                let mut v = ds.clone();
                v.sort_by(f64::total_cmp);
                v
            };
            assert_eq!(ds, sorted);
            // Survivors are the lowest-discrepancy valid candidates.
            let mut all: Vec<f64> = step
                .candidates
                .iter()
                .filter_map(|c| c.discrepancy())
                .collect();
            all.sort_by(f64::total_cmp);
            ds.truncate(n);
            assert_eq!(ds, all[..ds.len()]);
        }
        let curve = out.trace.best_curve();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn beam_children_see_their_parent() {
    let (gt, mesh) = program(6, 2);
    let cfg = fast_cfg(2, 2);
    let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
    let editor = NoisyOracleEditor::new(&gt, 0.2, 3).unwrap();
    let out = stochastic_beam(&target, &editor, &DslRenderer { resolution: 32 }, &cfg).unwrap();
    let first = &out.trace.steps[0];
    for c in &out.trace.steps[1].candidates {
        let parent = first.survivors[c.index / 2];
        assert_eq!(
            c.parent,
            Some(CandidateRef {
                step: 1,
                index: parent
            })
        );
    }
}

#[test]
fn loops_are_deterministic() {
    let (gt, mesh) = program(8, 3);
    let cfg = LoopConfig {
        modality: Modality::CrossModal,
        ..fast_cfg(2, 2)
    };
    let editor = NoisyOracleEditor::new(&gt, 0.3, 9).unwrap();
    let run = || {
        let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
        stochastic_beam(&target, &editor, &DslRenderer { resolution: 32 }, &cfg)
            .unwrap()
            .trace
    };
    assert_eq!(run(), run());
}

#[test]
fn best_so_far_context_policy() {
    let cube = "extrude plane=XY z0=-20 h=40 op=new {\n  add rect 0 0 40 40\n}\n";
    let far = "extrude plane=XY z0=-20 h=40 op=new {\n  add rect 30 0 20 20\n}\n";
    let mesh = render_mesh(&parse(cube).unwrap(), RES).unwrap();
    let script = |step: usize, program: &str| ScriptEntry {
        target_id: "t".into(),
        step,
        index: 0,
        program: program.into(),
    };
    let editor = ScriptedEditor::new([script(1, cube), script(2, far), script(3, far)]);
    for (policy, want) in [(ContextPolicy::Latest, 2), (ContextPolicy::BestSoFar, 1)] {
        let cfg = LoopConfig {
            context: policy,
            ..fast_cfg(1, 3)
        };
        let target = LoopTarget::new("t", &mesh, &cfg).unwrap();
        let out = greedy_loop(&target, &editor, &DslRenderer { resolution: RES }, &cfg).unwrap();
        let parent = out.trace.steps[2].candidates[0].parent.unwrap();
        assert_eq!(parent.step, want);
        assert_eq!(out.trace.best_so_far.unwrap().step_born, 1);
    }
}

#[test]
fn scan_track_selects_on_scan_and_reports_on_clean() {
    let a = "extrude plane=XY z0=-30 h=60 op=new {\n  add rect 0 0 60 60\n}\n";
    let b = "extrude plane=XY z0=-20 h=40 op=new {\n  add circle 0 0 20\n}\n";
    let scan = render_mesh(&parse(a).unwrap(), RES).unwrap();
    let clean = render_mesh(&parse(b).unwrap(), RES).unwrap();
    let entries = [(0, b), (1, a)].map(|(index, p)| ScriptEntry {
        target_id: "t".into(),
        step: 1,
        index,
        program: p.into(),
    });
    let editor = ScriptedEditor::new(entries);
    let cfg = fast_cfg(2, 1);
    let renderer = DslRenderer { resolution: RES };
    let (out, report) = run_scan_track(
        &clean,
        &scan,
        "t",
        SearchMode::Beam,
        &editor,
        &renderer,
        &cfg,
    )
    .unwrap();
    assert_eq!(out.trace.best_so_far.as_ref().unwrap().program, a);
    let clean_of_a = report_against(&clean, &out, &cfg.metric).unwrap();
    assert_eq!(report, clean_of_a);
    assert!(report.median_cd.unwrap() > 1.0);

    // A sentinel clean surface changes the report but not the selection.
    let sentinel = TriangleMesh::cuboid(
        cadloop_core::Vec3::splat(-90.0),
        cadloop_core::Vec3::new(-80.0, -85.0, -70.0),
    );
    let (out2, report2) = run_scan_track(
        &sentinel,
        &scan,
        "t",
        SearchMode::Beam,
        &editor,
        &renderer,
        &cfg,
    )
    .unwrap();
    assert_eq!(out.trace, out2.trace);
    assert_ne!(report, report2);
}

#[test]
fn invalid_config_rejected() {
    let (_, mesh) = program(1, 1);
    for cfg in [
        fast_cfg(0, 1),
        fast_cfg(1, 0),
        LoopConfig {
            stop_threshold: -1.0,
            ..fast_cfg(1, 1)
        },
    ] {
        assert!(matches!(
            LoopTarget::new("t", &mesh, &cfg),
            Err(LoopError::InvalidConfig(_))
        ));
    }
}
