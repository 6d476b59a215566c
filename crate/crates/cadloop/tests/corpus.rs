use cadloop::corpus::{gen_corpus, Corpus, CorpusError, CorpusSpec, MANIFEST};
use cadloop::dataset::{
    read_rollouts, read_samples, write_rollouts, write_samples, DatasetError, SampleRecord,
};
use cadloop_core::dsl::parse;
use cadloop_core::refine::{DslRenderer, Modality, OracleEditor};
use cadloop_core::rollout::{
    rollout, stage_a_samples, stage_mix_samples, EvidenceSettings, RolloutTarget, Rollouts, Stage,
};

fn spec(count: usize, seed: u64) -> CorpusSpec {
    CorpusSpec {
        count,
        seed,
        max_complexity: 3,
        resolution: 48,
    }
}

#[test]
fn generated_corpus_layout_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let entries = gen_corpus(a.path(), &spec(10, 5)).unwrap();
    assert_eq!(entries.len(), 10);
    assert_eq!(
        std::fs::read_dir(a.path().join("programs"))
            .unwrap()
            .count(),
        10
    );
    assert_eq!(
        std::fs::read_dir(a.path().join("meshes")).unwrap().count(),
        10
    );
    let manifest = std::fs::read_to_string(a.path().join(MANIFEST)).unwrap();
    assert_eq!(manifest.lines().count(), 10);
    gen_corpus(b.path(), &spec(10, 5)).unwrap();
    assert_eq!(
        manifest,
        std::fs::read_to_string(b.path().join(MANIFEST)).unwrap()
    );
    let corpus = Corpus::load(a.path()).unwrap();
    corpus.verify().unwrap();
    for (i, e) in corpus.entries.iter().enumerate() {
        assert_eq!(e.complexity, 1 + i % 3);
        assert_eq!(
            parse(&corpus.program(e).unwrap()).unwrap().steps.len(),
            e.complexity
        );
    }
}

#[test]
fn tampering_and_bad_requests_are_caught() {
    let dir = tempfile::tempdir().unwrap();
    gen_corpus(dir.path(), &spec(2, 1)).unwrap();
    let corpus = Corpus::load(dir.path()).unwrap();
    std::fs::write(dir.path().join(&corpus.entries[1].program), "changed").unwrap();
    assert!(matches!(corpus.verify(), Err(CorpusError::HashMismatch(_))));
    assert!(matches!(
        corpus.entry("zzz"),
        Err(CorpusError::UnknownTarget(_))
    ));
    assert!(matches!(
        gen_corpus(
            dir.path(),
            &CorpusSpec {
                max_complexity: 9,
                ..spec(1, 0)
            }
        ),
        Err(CorpusError::InvalidRequest(_))
    ));
    assert!(matches!(
        gen_corpus(dir.path(), &spec(0, 0)),
        Err(CorpusError::InvalidRequest(_))
    ));
    assert!(Corpus::load(&dir.path().join("missing")).is_err());
}

#[test]
fn dataset_files_round_trip_and_validate() {
    let corpus_dir = tempfile::tempdir().unwrap();
    gen_corpus(corpus_dir.path(), &spec(3, 2)).unwrap();
    let corpus = Corpus::load(corpus_dir.path()).unwrap();
    let loaded: Vec<(String, String, _)> = corpus
        .entries
        .iter()
        .map(|e| {
            (
                e.id.clone(),
                corpus.program(e).unwrap(),
                corpus.mesh(e).unwrap(),
            )
        })
        .collect();
    let targets: Vec<RolloutTarget<'_>> = loaded
        .iter()
        .map(|(id, p, m)| RolloutTarget {
            id,
            program: p,
            mesh: m,
        })
        .collect();
    let settings = EvidenceSettings {
        modality: Modality::CrossModal,
        ..EvidenceSettings::default()
    };
    let out = tempfile::tempdir().unwrap();

    let a = write_samples(
        out.path(),
        Stage::A,
        &stage_a_samples(&targets, &settings).unwrap(),
    )
    .unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(read_samples(out.path(), Stage::A).unwrap(), a);

    let editor = OracleEditor::new(loaded[0].1.clone());
    let mut rollouts = Rollouts::new();
    for (id, steps) in rollout(
        &editor,
        &DslRenderer { resolution: 48 },
        &targets,
        1,
        &settings,
    ) {
        rollouts.insert(id, steps.unwrap());
    }
    write_rollouts(out.path(), 1, &rollouts).unwrap();
    let back = read_rollouts(out.path(), 1).unwrap();
    assert_eq!(back, rollouts);

    let b = stage_mix_samples(Stage::B, &targets, &back, &settings, 3).unwrap();
    let records = write_samples(out.path(), Stage::B, &b).unwrap();
    assert_eq!(records.len(), 6);
    for r in &records {
        if r.t == 2 {
            assert_eq!(
                r.prev_program.as_deref(),
                Some(rollouts[&r.target_id][0].program.as_str())
            );
        }
    }
    // Identical evidence is stored once.
    let files = std::fs::read_dir(out.path().join("evidence"))
        .unwrap()
        .count();
    let refs: std::collections::BTreeSet<_> = a
        .iter()
        .chain(&records)
        .flat_map(|r| {
            r.evidence_refs
                .overlay
                .iter()
                .chain(&r.evidence_refs.cloud)
                .cloned()
        })
        .collect();
    assert_eq!(files, refs.len());

    // A file from the wrong stage is rejected.
    std::fs::copy(
        out.path().join("stage_b.jsonl"),
        out.path().join("stage_c.jsonl"),
    )
    .unwrap();
    assert!(matches!(
        read_samples(out.path(), Stage::C),
        Err(DatasetError::InvalidRecord { .. })
    ));
    // Missing evidence is detected.
    std::fs::remove_file(
        out.path()
            .join(records[0].evidence_refs.overlay.as_ref().unwrap()),
    )
    .unwrap();
    assert!(matches!(
        read_samples(out.path(), Stage::B),
        Err(DatasetError::MissingEvidence(_))
    ));
}

#[test]
fn record_invariants() {
    let ok = SampleRecord {
        schema: "rollout_v1".into(),
        target_id: "t".into(),
        t: 2,
        stage: Stage::B,
        modality: Modality::Image,
        evidence_refs: cadloop::dataset::EvidenceRefs {
            overlay: Some("evidence/x.png".into()),
            cloud: None,
        },
        prev_program: Some("p".into()),
        target_program: "q".into(),
    };
    ok.validate().unwrap();
    let broken = [
        SampleRecord {
            schema: "v0".into(),
            ..ok.clone()
        },
        SampleRecord { t: 3, ..ok.clone() },
        SampleRecord { t: 0, ..ok.clone() },
        SampleRecord {
            prev_program: None,
            ..ok.clone()
        },
        SampleRecord { t: 1, ..ok.clone() },
        SampleRecord {
            modality: Modality::CrossModal,
            ..ok.clone()
        },
        SampleRecord {
            target_program: " ".into(),
            ..ok.clone()
        },
    ];
    for r in broken {
        assert!(
            matches!(r.validate(), Err(DatasetError::InvalidRecord { .. })),
            "{r:?}"
        );
    }
}
