use std::sync::Arc;

use scenerag::answer::TemplateAnswerer;
use scenerag::eval::evaluate;
use scenerag::knowledge_db::{KnowledgeDatabase, SharedDatabase, Snapshot};
use scenerag::qa_corpus::{
    build_training_samples, generate_questions, read_jsonl, split_train_test, write_jsonl,
    CorpusConfig, QuestionRecord, SampleConfig,
};
use scenerag::scene::{generate_synthetic_scene, load_scene, save_scene, vocab, UserPose};
use scenerag::two_tower::{
    cosine_sim, load_model, save_model, train, Label, TrainConfig, TrainingSample, TwoTowerModel,
};

fn mean_sim(model: &TwoTowerModel, xs: &[TrainingSample], label: Label) -> f64 {
    let sims: Vec<f64> = xs
        .iter()
        .filter(|x| x.label == label)
        .map(|x| {
            cosine_sim(
                &model.forward_question(&x.question),
                &model.forward_information(&x.category, &x.instance),
            )
            .unwrap()
        })
        .collect();
    sims.iter().sum::<f64>() / sims.len() as f64
}

#[test]
fn files_round_trip_through_the_whole_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_synthetic_scene("viking", 4, 10, 30, vocab::VIKING).unwrap();
    save_scene(&scene, dir.path().join("scene.json")).unwrap();
    let scene = load_scene(dir.path().join("scene.json")).unwrap();

    let corpus = generate_questions(
        &scene,
        &UserPose::default(),
        4,
        &CorpusConfig::reference_total(300),
    )
    .unwrap();
    write_jsonl(&corpus, dir.path().join("corpus.jsonl")).unwrap();
    let corpus: Vec<QuestionRecord> = read_jsonl(dir.path().join("corpus.jsonl")).unwrap();
    let (train_q, test_q) = split_train_test(&corpus, 100, 4);

    let samples = build_training_samples(&train_q, &scene, &SampleConfig::default(), 4).unwrap();
    write_jsonl(&samples, dir.path().join("samples.jsonl")).unwrap();
    let samples: Vec<TrainingSample> = read_jsonl(dir.path().join("samples.jsonl")).unwrap();

    let cfg = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let trained = train(&TwoTowerModel::with_defaults(4), &samples, &cfg)
        .unwrap()
        .model;
    save_model(&trained, dir.path().join("model.json")).unwrap();
    let loaded = load_model(dir.path().join("model.json")).unwrap();
    assert_eq!(loaded.fingerprint(), trained.fingerprint());

    let db = KnowledgeDatabase::new(&scene, Arc::new(loaded)).unwrap();
    db.snapshot()
        .save(dir.path().join("snapshot.json"))
        .unwrap();
    let db = KnowledgeDatabase::from_snapshot(
        &Snapshot::load(dir.path().join("snapshot.json")).unwrap(),
        Arc::new(trained),
    )
    .unwrap();
    let report = evaluate(
        &SharedDatabase::new(db),
        &TemplateAnswerer,
        &test_q,
        6,
        &UserPose::default(),
    )
    .unwrap();
    assert_eq!(report.rows.len(), test_q.len());
    assert!(report.overall.mean_recall > 0.0);
}

#[test]
fn training_pulls_positives_up_and_hard_negatives_down() {
    let scene = generate_synthetic_scene("office", 2, 18, 34, vocab::OFFICE).unwrap();
    let pool = generate_questions(&scene, &UserPose::default(), 0, &CorpusConfig::All).unwrap();
    let (train_q, _) = split_train_test(&pool, 294, 0);
    let samples = build_training_samples(&train_q, &scene, &SampleConfig::default(), 0).unwrap();
    let model = TwoTowerModel::with_defaults(0);
    let outcome = train(&model, &samples, &TrainConfig::default()).unwrap();
    assert!(outcome.loss_history.last() < outcome.loss_history.first());
    assert!(
        mean_sim(&outcome.model, &samples, Label::Pos) > mean_sim(&model, &samples, Label::Pos)
    );
    assert!(
        mean_sim(&outcome.model, &samples, Label::Hneg) < mean_sim(&model, &samples, Label::Hneg)
    );
}

#[test]
fn perfect_retrieval_reproduces_ground_truth_under_a_rotated_pose() {
    let mut scene = generate_synthetic_scene("office", 12, 18, 34, vocab::OFFICE).unwrap();
    scene.objects[0].visible = false;
    scene.objects[7].visible = false;
    let user = UserPose::new(
        [2.0, -1.0, 0.0],
        scenerag::scene::Quaternion::new(0.0, 0.0, 0.3826834323650898, 0.9238795325112867),
    );
    let corpus = generate_questions(&scene, &user, 12, &CorpusConfig::All).unwrap();
    let db = KnowledgeDatabase::new(&scene, Arc::new(TwoTowerModel::with_defaults(12))).unwrap();
    let k = db.index_len();
    let report = evaluate(
        &SharedDatabase::new(db),
        &TemplateAnswerer,
        &corpus,
        k,
        &user,
    )
    .unwrap();
    let wrong: Vec<_> = report.rows.iter().filter(|r| !r.correct).take(3).collect();
    assert!(wrong.is_empty(), "{wrong:#?}");
}
