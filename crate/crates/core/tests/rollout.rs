use cadloop_core::dsl::{print, random_program, render_mesh};
use cadloop_core::metrics::{MetricConfig, MetricTarget};
use cadloop_core::refine::{
    DslRenderer, Modality, NoisyOracleEditor, OracleEditor, ScriptEntry, ScriptedEditor,
};
use cadloop_core::rollout::{
    emission_order, rollout, rollout_target, stage_a_samples, stage_mix_samples, EvidenceSettings,
    RolloutError, RolloutTarget, Rollouts, Stage,
};
use cadloop_core::TriangleMesh;

struct Item {
    id: String,
    program: String,
    mesh: TriangleMesh,
}

fn corpus(n: usize, seed: u64) -> Vec<Item> {
    (0..n)
        .map(|i| {
            let ast = random_program(seed + i as u64, 1 + i % 3).unwrap();
            Item {
                id: format!("t{i:02}"),
                program: print(&ast),
                mesh: render_mesh(&ast, 64).unwrap(),
            }
        })
        .collect()
}

fn targets(items: &[Item]) -> Vec<RolloutTarget<'_>> {
    items
        .iter()
        .map(|t| RolloutTarget {
            id: &t.id,
            program: &t.program,
            mesh: &t.mesh,
        })
        .collect()
}

fn image() -> EvidenceSettings {
    EvidenceSettings {
        modality: Modality::Image,
        ..EvidenceSettings::default()
    }
}

/// Replies "broken" at step 1 for every target, so rollouts carry an
/// unrenderable program.
fn broken_first_step(items: &[Item]) -> ScriptedEditor {
    ScriptedEditor::new(items.iter().flat_map(|t| {
        [
            ScriptEntry {
                target_id: t.id.clone(),
                step: 1,
                index: 0,
                program: "broken".into(),
            },
            ScriptEntry {
                target_id: t.id.clone(),
                step: 2,
                index: 0,
                program: t.program.clone(),
            },
        ]
    }))
}

#[test]
fn stage_a_has_one_first_step_record_per_target() {
    let items = corpus(3, 10);
    let samples = stage_a_samples(&targets(&items), &image()).unwrap();
    assert_eq!(samples.len(), 3);
    for (s, t) in samples.iter().zip(&items) {
        assert_eq!(
            (s.t, s.stage, s.prev_program.as_deref()),
            (1, Stage::A, None)
        );
        assert_eq!(s.target_program, t.program);
        assert!(s.evidence.overlay.is_some() && s.evidence.cloud.is_none());
    }
}

#[test]
fn stage_b_contexts_are_the_rollout_outputs() {
    let items = corpus(4, 20);
    let ts = targets(&items);
    let renderer = DslRenderer { resolution: 48 };
    let editor = broken_first_step(&items);
    let mut rollouts = Rollouts::new();
    for (id, r) in rollout(&editor, &renderer, &ts, 1, &image()) {
        rollouts.insert(id, r.unwrap());
    }
    let samples = stage_mix_samples(Stage::B, &ts, &rollouts, &image(), 5).unwrap();
    assert_eq!(samples.len(), 2 * items.len());
    for t in &items {
        let mine: Vec<_> = samples.iter().filter(|s| s.target_id == t.id).collect();
        assert_eq!(mine.len(), 2);
        let second = mine.iter().find(|s| s.t == 2).unwrap();
        assert_eq!(
            second.prev_program.as_deref(),
            Some(rollouts[&t.id][0].program.as_str())
        );
        assert_eq!(second.prev_program.as_deref(), Some("broken"));
        // An unrenderable context leaves the prediction channel empty.
        let overlay = second.evidence.overlay.as_ref().unwrap();
        assert!(overlay.pixels.iter().all(|p| p[0] == 0.0));
        assert!(mine
            .iter()
            .all(|s| s.target_program == t.program && s.t <= Stage::B.max_step()));
    }
}

#[test]
fn stage_c_needs_two_step_rollouts() {
    let items = corpus(2, 30);
    let ts = targets(&items);
    let renderer = DslRenderer { resolution: 48 };
    let editor = OracleEditor::new(items[0].program.clone());
    let mut rollouts = Rollouts::new();
    for (id, r) in rollout(&editor, &renderer, &ts, 1, &image()) {
        rollouts.insert(id, r.unwrap());
    }
    let err = stage_mix_samples(Stage::C, &ts, &rollouts, &image(), 0).unwrap_err();
    assert!(matches!(err, RolloutError::MissingRollout { depth: 2, .. }));
    for (id, r) in rollout(&editor, &renderer, &ts, 2, &image()) {
        rollouts.insert(id, r.unwrap());
    }
    let samples = stage_mix_samples(Stage::C, &ts, &rollouts, &image(), 0).unwrap();
    assert_eq!(samples.len(), 6);
    let third = samples
        .iter()
        .find(|s| s.target_id == "t01" && s.t == 3)
        .unwrap();
    assert_eq!(
        third.prev_program.as_deref(),
        Some(rollouts["t01"][1].program.as_str())
    );
}

#[test]
fn rollout_depth_is_checked() {
    let items = corpus(1, 40);
    let editor = OracleEditor::new(items[0].program.clone());
    let err = rollout_target(
        &editor,
        &DslRenderer::default(),
        &targets(&items)[0],
        3,
        &image(),
    )
    .unwrap_err();
    assert_eq!(err, RolloutError::InvalidDepth(3));
}

#[test]
fn samples_are_deterministic() {
    let items = corpus(3, 50);
    let ts = targets(&items);
    let editor = broken_first_step(&items);
    let renderer = DslRenderer { resolution: 48 };
    let run = || {
        let mut r = Rollouts::new();
        for (id, steps) in rollout(&editor, &renderer, &ts, 1, &image()) {
            r.insert(id, steps.unwrap());
        }
        stage_mix_samples(Stage::B, &ts, &r, &image(), 9).unwrap()
    };
    assert_eq!(run(), run());
}

/// Chi-square test of independence between an item's source bucket and
/// its emitted bucket over 3000 records; 10x10 buckets give 81 degrees of
/// freedom, whose 0.999 quantile is about 124.8.
#[test]
fn emission_order_is_uniform() {
    let n = 3000;
    let order = emission_order(n, 2024);
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    let mut table = [[0usize; 10]; 10];
    for (pos, &src) in order.iter().enumerate() {
        table[src * 10 / n][pos * 10 / n] += 1;
    }
    let expected = n as f64 / 100.0;
    let chi2: f64 = table
        .iter()
        .flatten()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 124.8, "chi-square {chi2}");
    assert_ne!(emission_order(n, 1), emission_order(n, 2));
}

#[test]
fn noisy_rollouts_improve_on_some_target() {
    let items = corpus(6, 60);
    let renderer = DslRenderer { resolution: 64 };
    let metric = MetricConfig {
        cd_points: 2048,
        ..MetricConfig::default()
    };
    let mut improved = 0;
    for (k, t) in items.iter().enumerate() {
        let editor = NoisyOracleEditor::new(&t.program, 0.3, k as u64).unwrap();
        let steps = rollout_target(&editor, &renderer, &targets(&items)[k], 2, &image()).unwrap();
        let score = MetricTarget::new(&t.mesh, metric).unwrap();
        let cd = |i: usize| {
            steps[i]
                .mesh
                .as_ref()
                .and_then(|m| score.score(m).discrepancy())
        };
        if let (Some(a), Some(b)) = (cd(0), cd(1)) {
            if a > b {
                improved += 1;
            }
        }
    }
    assert!(improved >= 1);
}
