//! Template question generation with programmatic ground truths, and
//! construction of positive / negative / hard-negative training pairs.

pub mod templates;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ObjectRecord, Scene, UserPose};
use crate::spatial::{direction_sentence, relative_position};
use crate::two_tower::{Label, TrainingSample};

pub use templates::{parse_question, pluralize, Subject, Topic, TopicGroup};

/// Single- to multi-knowledge ratio of the reference dataset (5106 : 573).
pub const REFERENCE_SINGLE: usize = 5106;
pub const REFERENCE_MULTI: usize = 573;

/// Training-set size used for the one-scene training preset.
pub const TRAIN_PRESET_QUESTIONS: usize = 294;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    SingleKnowledge,
    MultiKnowledge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuestionRecord {
    #[serde(rename = "question")]
    pub text: String,
    pub kind: QuestionKind,
    pub topic: Topic,
    pub relevant: Vec<String>,
    pub ground_truth: String,
}

/// How many questions of each kind to draw from the distinct templated pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusConfig {
    /// The largest sample whose single:multi split is close to 5106:573.
    #[default]
    ReferenceRatio,
    /// Every distinct question.
    All,
    Counts {
        single: usize,
        multi: usize,
    },
}

impl CorpusConfig {
    /// `total` questions split in the reference single:multi ratio.
    pub fn reference_total(total: usize) -> Self {
        let multi = (total * REFERENCE_MULTI + (REFERENCE_SINGLE + REFERENCE_MULTI) / 2)
            / (REFERENCE_SINGLE + REFERENCE_MULTI);
        CorpusConfig::Counts {
            single: total - multi,
            multi,
        }
    }

    /// `(single, multi)` counts to keep out of the available pool sizes.
    pub fn resolve(&self, single_pool: usize, multi_pool: usize) -> (usize, usize) {
        match *self {
            CorpusConfig::All => (single_pool, multi_pool),
            CorpusConfig::Counts { single, multi } => {
                (single.min(single_pool), multi.min(multi_pool))
            }
            CorpusConfig::ReferenceRatio => {
                let single_for =
                    |m: usize| (m * REFERENCE_SINGLE + REFERENCE_MULTI / 2) / REFERENCE_MULTI;
                if single_for(multi_pool) <= single_pool {
                    (single_for(multi_pool), multi_pool)
                } else {
                    let multi = ((single_pool * REFERENCE_MULTI + REFERENCE_SINGLE / 2)
                        / REFERENCE_SINGLE)
                        .clamp(1.min(multi_pool), multi_pool);
                    (single_pool, multi)
                }
            }
        }
    }
}

/// Lowercased, trimmed, whitespace-collapsed, trailing period removed.
pub fn canonical(answer: &str) -> String {
    let joined = answer.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.trim_end_matches('.').to_lowercase()
}

/// Two-decimal rendering with negative zero folded to zero.
pub fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

pub fn format_position(p: &[f64; 3]) -> String {
    format!("({}, {}, {})", fmt2(p[0]), fmt2(p[1]), fmt2(p[2]))
}

pub fn interactivity_text(interactive: bool) -> &'static str {
    if interactive {
        "interactive"
    } else {
        "not interactive"
    }
}

/// Canonical answer to a single-knowledge topic about one record.
pub fn attribute_answer(topic: Topic, record: &ObjectRecord, user: &UserPose) -> Result<String> {
    let text = match topic {
        Topic::Material => record.material.clone(),
        Topic::Color => record.color.clone(),
        Topic::Interactivity => interactivity_text(record.interactive).to_string(),
        Topic::Position => format_position(&record.position),
        Topic::Direction => {
            let rel = relative_position(&record.position, user)?;
            direction_sentence(&record.instance, &rel.qualitative)
        }
        Topic::Distance => fmt2(relative_position(&record.position, user)?.distance),
        Topic::Count => {
            return Err(Error::InvalidParameter(
                "count is not a single-record topic".into(),
            ))
        }
    };
    Ok(canonical(&text))
}

/// Every distinct templated question for the scene's visible objects, in a
/// fixed enumeration order.
fn enumerate_questions(
    scene: &Scene,
    user: &UserPose,
) -> Result<(Vec<QuestionRecord>, Vec<QuestionRecord>)> {
    let mut visible_by_cat: BTreeMap<&str, Vec<&ObjectRecord>> = BTreeMap::new();
    for obj in scene.objects.iter().filter(|o| o.visible) {
        visible_by_cat
            .entry(obj.category.as_str())
            .or_default()
            .push(obj);
    }
    let all_by_cat = scene.categories();

    let mut single = Vec::new();
    for obj in scene.objects.iter().filter(|o| o.visible) {
        let mut subjects = vec![Subject::Instance(obj.instance.clone())];
        // "the clock" is only unambiguous when the scene holds one clock.
        if all_by_cat.get(obj.category.as_str()).map(Vec::len) == Some(1) {
            subjects.push(Subject::Category(obj.category.clone()));
        }
        for topic in Topic::SINGLE {
            let ground_truth = attribute_answer(topic, obj, user)?;
            for subject in &subjects {
                let slot = templates::subject_text(subject);
                for phrasing in topic.phrasings() {
                    single.push(QuestionRecord {
                        text: templates::fill(phrasing, &slot),
                        kind: QuestionKind::SingleKnowledge,
                        topic,
                        relevant: vec![obj.instance.clone()],
                        ground_truth: ground_truth.clone(),
                    });
                }
            }
        }
    }

    let mut multi = Vec::new();
    for (category, objs) in &visible_by_cat {
        let plural = pluralize(category);
        let mut relevant: Vec<String> = objs.iter().map(|o| o.instance.clone()).collect();
        relevant.sort();
        for phrasing in Topic::Count.phrasings() {
            multi.push(QuestionRecord {
                text: templates::fill(phrasing, &plural),
                kind: QuestionKind::MultiKnowledge,
                topic: Topic::Count,
                relevant: relevant.clone(),
                ground_truth: objs.len().to_string(),
            });
        }
    }
    Ok((single, multi))
}

/// Seeded sample of templated questions with ground truths.
pub fn generate_questions(
    scene: &Scene,
    user: &UserPose,
    seed: u64,
    config: &CorpusConfig,
) -> Result<Vec<QuestionRecord>> {
    if scene.objects.iter().all(|o| !o.visible) {
        return Err(Error::InvalidParameter(
            "scene has no visible objects".into(),
        ));
    }
    let user = user.normalized()?;
    let (mut single, mut multi) = enumerate_questions(scene, &user)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    single.shuffle(&mut rng);
    multi.shuffle(&mut rng);
    let (n_single, n_multi) = config.resolve(single.len(), multi.len());
    single.truncate(n_single);
    multi.truncate(n_multi);
    let mut all = single;
    all.append(&mut multi);
    all.shuffle(&mut rng);
    Ok(all)
}

/// Recomputes a question's canonical answer from the scene and user pose.
pub fn ground_truth(scene: &Scene, user: &UserPose, question: &QuestionRecord) -> Result<String> {
    let first = question
        .relevant
        .first()
        .ok_or_else(|| Error::InvalidParameter("question has no relevant instances".into()))?;
    let record = scene
        .get(first)
        .ok_or_else(|| Error::DanglingInstance(first.clone()))?;
    match question.topic {
        Topic::Count => {
            let n = scene
                .objects
                .iter()
                .filter(|o| o.visible && o.category == record.category)
                .count();
            Ok(n.to_string())
        }
        topic => attribute_answer(topic, record, &user.normalized()?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Negative pairs per question.
    pub negatives: usize,
    /// Hard-negative pairs per single-knowledge question.
    pub hard_negatives: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            negatives: 1,
            hard_negatives: 1,
        }
    }
}

/// Labels question/information pairs: every relevant instance is positive,
/// other categories give negatives, and same-category siblings of a
/// single-knowledge target give hard negatives.
pub fn build_training_samples(
    questions: &[QuestionRecord],
    scene: &Scene,
    config: &SampleConfig,
    seed: u64,
) -> Result<Vec<TrainingSample>> {
    let by_cat = scene.categories();
    if by_cat.len() < 2 && config.negatives > 0 {
        return Err(Error::InsufficientScene(
            "negative sampling needs at least two categories".into(),
        ));
    }
    if config.hard_negatives > 0 && by_cat.values().all(|v| v.len() < 2) {
        return Err(Error::InsufficientScene(
            "hard negatives need a category with at least two instances".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for q in questions {
        let mut relevant_cats = BTreeSet::new();
        for id in &q.relevant {
            let rec = scene
                .get(id)
                .ok_or_else(|| Error::DanglingInstance(id.clone()))?;
            relevant_cats.insert(rec.category.as_str());
            out.push(TrainingSample::new(
                &q.text,
                &rec.category,
                &rec.instance,
                Label::Pos,
            ));
        }

        let others: Vec<&ObjectRecord> = scene
            .objects
            .iter()
            .filter(|o| !relevant_cats.contains(o.category.as_str()))
            .collect();
        for rec in choose_distinct(&others, config.negatives, &mut rng) {
            out.push(TrainingSample::new(
                &q.text,
                &rec.category,
                &rec.instance,
                Label::Neg,
            ));
        }

        if q.kind == QuestionKind::SingleKnowledge {
            let relevant: HashSet<&str> = q.relevant.iter().map(String::as_str).collect();
            let siblings: Vec<&ObjectRecord> = relevant_cats
                .iter()
                .flat_map(|c| by_cat[c].iter().copied())
                .filter(|o| !relevant.contains(o.instance.as_str()))
                .collect();
            for rec in choose_distinct(&siblings, config.hard_negatives, &mut rng) {
                out.push(TrainingSample::new(
                    &q.text,
                    &rec.category,
                    &rec.instance,
                    Label::Hneg,
                ));
            }
        }
    }
    Ok(out)
}

fn choose_distinct<'a, R: rand::Rng>(
    pool: &[&'a ObjectRecord],
    n: usize,
    rng: &mut R,
) -> Vec<&'a ObjectRecord> {
    if n >= pool.len() {
        return pool.to_vec();
    }
    if n == 1 {
        return pool.choose(rng).into_iter().copied().collect();
    }
    pool.choose_multiple(rng, n).copied().collect()
}

/// Seeded split into `n_train` training questions and the rest, disjoint by
/// question text (repeated texts are kept once).
pub fn split_train_test(
    questions: &[QuestionRecord],
    n_train: usize,
    seed: u64,
) -> (Vec<QuestionRecord>, Vec<QuestionRecord>) {
    let mut seen = HashSet::new();
    let mut unique: Vec<QuestionRecord> = questions
        .iter()
        .filter(|q| seen.insert(q.text.clone()))
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique.shuffle(&mut rng);
    let test = unique.split_off(n_train.min(unique.len()));
    (unique, test)
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_synthetic_scene, vocab, Quaternion};

    fn obj(category: &str, serial: u32, pos: [f64; 3]) -> ObjectRecord {
        ObjectRecord {
            scene_name: "s".into(),
            category: category.into(),
            instance: format!("{category}_{serial}"),
            position: pos,
            orientation: Quaternion::IDENTITY,
            interactive: serial % 2 == 1,
            color: "Gray".into(),
            material: "alloy".into(),
            visible: true,
        }
    }

    fn office_like() -> Scene {
        Scene::new(
            "office",
            vec![
                obj("printer", 1, [1.0, 1.0, 0.0]),
                obj("printer", 2, [2.0, -1.0, 0.0]),
                obj("clock", 1, [3.0, 4.0, 0.0]),
                obj("tray", 1, [0.5, 0.5, 0.0]),
                obj("tray", 2, [-1.0, -1.0, 0.0]),
                obj("chair", 1, [0.0, 2.0, 0.0]),
                obj("chair", 2, [0.0, -2.0, 0.0]),
                obj("table", 1, [5.0, 0.0, 0.0]),
            ],
        )
        .unwrap()
    }

    fn find<'a>(qs: &'a [QuestionRecord], text: &str) -> &'a QuestionRecord {
        qs.iter()
            .find(|q| q.text == text)
            .unwrap_or_else(|| panic!("missing `{text}`"))
    }

    #[test]
    fn reference_examples() {
        let scene = office_like();
        let user = UserPose::default();
        let qs = generate_questions(&scene, &user, 0, &CorpusConfig::All).unwrap();

        let count = find(&qs, "How many printers can be found?");
        assert_eq!(count.ground_truth, "2");
        assert_eq!(count.kind, QuestionKind::MultiKnowledge);
        assert_eq!(count.relevant, ["printer_1", "printer_2"]);

        let clock = find(&qs, "What is the material of the clock?");
        assert_eq!(clock.ground_truth, canonical("Alloy"));
        assert_eq!(clock.relevant, ["clock_1"]);

        let tray = find(&qs, "Where is tray_2 in relation to the player's position?");
        assert_eq!(
            tray.ground_truth,
            "tray_2 is at the back left of the player"
        );

        let dist = find(&qs, "How far is clock_1 from the player?");
        assert_eq!(dist.ground_truth, "5.00");
        assert_eq!(find(&qs, "What color is chair_2?").ground_truth, "gray");
        assert_eq!(
            find(&qs, "Is chair_1 interactive?").ground_truth,
            "interactive"
        );
        assert_eq!(
            find(&qs, "Is chair_2 interactive?").ground_truth,
            "not interactive"
        );
        assert_eq!(
            find(&qs, "Where is clock_1?").ground_truth,
            "(3.00, 4.00, 0.00)"
        );
        // Ambiguous category form is never generated.
        assert!(qs.iter().all(|q| q.text != "Where is the chair?"));
    }

    #[test]
    fn kind_invariants_and_parse_round_trip() {
        let scene = generate_synthetic_scene("office", 2, 18, 34, vocab::OFFICE).unwrap();
        let qs = generate_questions(&scene, &UserPose::default(), 1, &CorpusConfig::All).unwrap();
        let texts: HashSet<&str> = qs.iter().map(|q| q.text.as_str()).collect();
        assert_eq!(texts.len(), qs.len(), "question texts are distinct");
        for q in &qs {
            match q.kind {
                QuestionKind::SingleKnowledge => assert_eq!(q.relevant.len(), 1),
                QuestionKind::MultiKnowledge => {
                    assert!(!q.relevant.is_empty());
                    let cats: HashSet<&str> = q
                        .relevant
                        .iter()
                        .map(|id| scene.get(id).unwrap().category.as_str())
                        .collect();
                    assert_eq!(cats.len(), 1);
                }
            }
            let (topic, _) = parse_question(&q.text).expect("parsable");
            assert_eq!(topic, q.topic, "{}", q.text);
        }
    }

    #[test]
    fn generation_is_deterministic_and_sized() {
        let scene = office_like();
        let cfg = CorpusConfig::Counts {
            single: 40,
            multi: 5,
        };
        let a = generate_questions(&scene, &UserPose::default(), 3, &cfg).unwrap();
        let b = generate_questions(&scene, &UserPose::default(), 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 45);
        assert_eq!(
            a.iter()
                .filter(|q| q.kind == QuestionKind::MultiKnowledge)
                .count(),
            5
        );
        let c = generate_questions(&scene, &UserPose::default(), 4, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reference_ratio_split() {
        assert_eq!(
            CorpusConfig::reference_total(5679),
            CorpusConfig::Counts {
                single: 5106,
                multi: 573
            }
        );
        let (s, m) = CorpusConfig::ReferenceRatio.resolve(10_000, 252);
        assert_eq!(m, 252);
        assert!((s as f64 / m as f64 - 5106.0 / 573.0).abs() < 0.01);
        let (s, m) = CorpusConfig::ReferenceRatio.resolve(100, 252);
        assert_eq!((s, m), (100, 11));
    }

    #[test]
    fn ground_truth_tracks_visibility() {
        let mut scene = office_like();
        let user = UserPose::default();
        let qs = generate_questions(&scene, &user, 0, &CorpusConfig::All).unwrap();
        let count = find(&qs, "How many printers can be found?").clone();
        assert_eq!(ground_truth(&scene, &user, &count).unwrap(), "2");
        scene
            .objects
            .iter_mut()
            .find(|o| o.instance == "printer_2")
            .unwrap()
            .visible = false;
        assert_eq!(ground_truth(&scene, &user, &count).unwrap(), "1");

        let mut dangling = count.clone();
        dangling.relevant = vec!["sofa_9".into()];
        assert!(matches!(
            ground_truth(&scene, &user, &dangling),
            Err(Error::DanglingInstance(_))
        ));
    }

    #[test]
    fn ground_truth_agrees_with_generation() {
        let scene = generate_synthetic_scene("villa", 5, 20, 30, vocab::VILLA).unwrap();
        let user = UserPose::new([1.0, -2.0, 0.5], Quaternion::new(0.1, 0.2, 0.3, 0.9));
        let qs = generate_questions(&scene, &user, 0, &CorpusConfig::All).unwrap();
        for q in &qs {
            assert_eq!(ground_truth(&scene, &user, q).unwrap(), q.ground_truth);
        }
    }

    #[test]
    fn training_sample_examples() {
        let scene = office_like();
        let q = QuestionRecord {
            text: "Where is chair_1?".into(),
            kind: QuestionKind::SingleKnowledge,
            topic: Topic::Position,
            relevant: vec!["chair_1".into()],
            ground_truth: "(0.00, 2.00, 0.00)".into(),
        };
        let xs = build_training_samples(&[q], &scene, &SampleConfig::default(), 0).unwrap();
        assert!(xs.contains(&TrainingSample::new(
            "Where is chair_1?",
            "chair",
            "chair_1",
            Label::Pos
        )));
        assert!(xs.contains(&TrainingSample::new(
            "Where is chair_1?",
            "chair",
            "chair_2",
            Label::Hneg
        )));
        let neg: Vec<_> = xs.iter().filter(|x| x.label == Label::Neg).collect();
        assert_eq!(neg.len(), 1);
        assert_ne!(neg[0].category, "chair");

        let count = QuestionRecord {
            text: "How many chairs are in the VR scene?".into(),
            kind: QuestionKind::MultiKnowledge,
            topic: Topic::Count,
            relevant: vec!["chair_1".into(), "chair_2".into()],
            ground_truth: "2".into(),
        };
        let xs = build_training_samples(&[count], &scene, &SampleConfig::default(), 0).unwrap();
        let pos: Vec<_> = xs
            .iter()
            .filter(|x| x.label == Label::Pos)
            .map(|x| x.instance.as_str())
            .collect();
        assert_eq!(pos, ["chair_1", "chair_2"]);
        assert!(xs.iter().all(|x| x.label != Label::Hneg));
    }

    #[test]
    fn label_soundness_and_determinism() {
        let scene = generate_synthetic_scene("office", 2, 18, 34, vocab::OFFICE).unwrap();
        let qs = generate_questions(
            &scene,
            &UserPose::default(),
            0,
            &CorpusConfig::Counts {
                single: 200,
                multi: 30,
            },
        )
        .unwrap();
        let cfg = SampleConfig {
            negatives: 2,
            hard_negatives: 1,
        };
        let xs = build_training_samples(&qs, &scene, &cfg, 9).unwrap();
        assert_eq!(xs, build_training_samples(&qs, &scene, &cfg, 9).unwrap());
        let by_text: BTreeMap<&str, &QuestionRecord> =
            qs.iter().map(|q| (q.text.as_str(), q)).collect();
        for x in &xs {
            let q = by_text[x.question.as_str()];
            let rel_cats: HashSet<&str> = q
                .relevant
                .iter()
                .map(|id| scene.get(id).unwrap().category.as_str())
                .collect();
            let in_relevant = q.relevant.contains(&x.instance);
            match x.label {
                Label::Pos => assert!(in_relevant),
                Label::Hneg => {
                    assert!(!in_relevant && rel_cats.contains(x.category.as_str()));
                    assert_eq!(q.kind, QuestionKind::SingleKnowledge);
                }
                Label::Neg => assert!(!in_relevant && !rel_cats.contains(x.category.as_str())),
            }
        }
    }

    #[test]
    fn insufficient_scene_for_hard_negatives() {
        let scene = Scene::new(
            "s",
            vec![obj("chair", 1, [0.0; 3]), obj("table", 1, [1.0; 3])],
        )
        .unwrap();
        let qs = generate_questions(&scene, &UserPose::default(), 0, &CorpusConfig::All).unwrap();
        let err = build_training_samples(&qs, &scene, &SampleConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::InsufficientScene(_)));
        let cfg = SampleConfig {
            negatives: 1,
            hard_negatives: 0,
        };
        assert!(build_training_samples(&qs, &scene, &cfg, 0).is_ok());
    }

    #[test]
    fn split_is_disjoint() {
        let scene = office_like();
        let qs = generate_questions(&scene, &UserPose::default(), 0, &CorpusConfig::All).unwrap();
        let (train, test) = split_train_test(&qs, 50, 1);
        assert_eq!(train.len(), 50);
        assert_eq!(train.len() + test.len(), qs.len());
        let t: HashSet<&str> = train.iter().map(|q| q.text.as_str()).collect();
        assert!(test.iter().all(|q| !t.contains(q.text.as_str())));
    }

    #[test]
    fn jsonl_round_trip() {
        let scene = office_like();
        let qs = generate_questions(
            &scene,
            &UserPose::default(),
            0,
            &CorpusConfig::Counts {
                single: 10,
                multi: 2,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.jsonl");
        write_jsonl(&qs, &path).unwrap();
        let back: Vec<QuestionRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, qs);
        let line = fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        for key in ["question", "kind", "topic", "relevant", "ground_truth"] {
            assert!(first.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn canonical_form() {
        assert_eq!(
            canonical("  Tray_2 is at the  back right of the player. "),
            "tray_2 is at the back right of the player"
        );
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(5.0), "5.00");
    }
}
