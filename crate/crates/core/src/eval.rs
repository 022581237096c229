//! Accuracy and recall evaluation, k-sweeps and trained-vs-untrained
//! comparisons.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::answer::{render_prompt, Answerer};
use crate::error::{Error, Result};
use crate::knowledge_db::SharedDatabase;
use crate::qa_corpus::{canonical, QuestionKind, QuestionRecord, Topic};
use crate::scene::UserPose;

/// `|relevant ∩ retrieved| / |relevant|`; zero when nothing is relevant.
pub fn recall_of<S: AsRef<str>>(question: &QuestionRecord, retrieved: &[S]) -> f64 {
    if question.relevant.is_empty() {
        return 0.0;
    }
    let got: HashSet<&str> = retrieved.iter().map(AsRef::as_ref).collect();
    let hits = question
        .relevant
        .iter()
        .filter(|id| got.contains(id.as_str()))
        .count();
    hits as f64 / question.relevant.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub question: String,
    pub kind: QuestionKind,
    pub topic: Topic,
    pub relevant: Vec<String>,
    pub retrieved: Vec<String>,
    pub recall: f64,
    pub answer: String,
    pub ground_truth: String,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub questions: usize,
    pub accuracy: f64,
    pub mean_recall: f64,
}

impl Aggregate {
    pub fn of<'a>(rows: impl IntoIterator<Item = &'a EvalRow>) -> Self {
        let (mut n, mut correct, mut recall) = (0usize, 0usize, 0.0);
        for r in rows {
            n += 1;
            correct += usize::from(r.correct);
            recall += r.recall;
        }
        if n == 0 {
            return Self::default();
        }
        Self {
            questions: n,
            accuracy: correct as f64 / n as f64,
            mean_recall: recall / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    pub k: usize,
    pub model: String,
    pub answerer: String,
    pub seed: Option<u64>,
    pub overall: Aggregate,
    pub by_kind: BTreeMap<QuestionKind, Aggregate>,
    pub by_topic: BTreeMap<Topic, Aggregate>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    fn from_rows(
        scene: String,
        k: usize,
        model: String,
        answerer: String,
        rows: Vec<EvalRow>,
    ) -> Self {
        let mut kinds: BTreeMap<QuestionKind, Vec<&EvalRow>> = BTreeMap::new();
        let mut topics: BTreeMap<Topic, Vec<&EvalRow>> = BTreeMap::new();
        for r in &rows {
            kinds.entry(r.kind).or_default().push(r);
            topics.entry(r.topic).or_default().push(r);
        }
        let by_kind = kinds
            .into_iter()
            .map(|(k, v)| (k, Aggregate::of(v)))
            .collect();
        let by_topic = topics
            .into_iter()
            .map(|(k, v)| (k, Aggregate::of(v)))
            .collect();
        Self {
            scene,
            k,
            model,
            answerer,
            seed: None,
            overall: Aggregate::of(&rows),
            by_kind,
            by_topic,
            rows,
        }
    }

    pub fn kind(&self, kind: QuestionKind) -> Aggregate {
        self.by_kind.get(&kind).copied().unwrap_or_default()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "scene {}  k={}  model {}  answerer {}\n",
            self.scene, self.k, self.model, self.answerer
        );
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>9} {:>8}",
            "group", "n", "accuracy", "recall"
        );
        let mut line = |name: &str, a: &Aggregate| {
            let _ = writeln!(
                out,
                "{:<18} {:>6} {:>9.4} {:>8.4}",
                name, a.questions, a.accuracy, a.mean_recall
            );
        };
        line("all", &self.overall);
        for (kind, a) in &self.by_kind {
            line(kind_name(*kind), a);
        }
        for (topic, a) in &self.by_topic {
            line(&format!("  {}", topic_name(*topic)), a);
        }
        out
    }
}

fn kind_name(kind: QuestionKind) -> &'static str {
    match kind {
        QuestionKind::SingleKnowledge => "single_knowledge",
        QuestionKind::MultiKnowledge => "multi_knowledge",
    }
}

fn topic_name(topic: Topic) -> &'static str {
    match topic {
        Topic::Material => "material",
        Topic::Color => "color",
        Topic::Interactivity => "interactivity",
        Topic::Position => "position",
        Topic::Direction => "direction",
        Topic::Distance => "distance",
        Topic::Count => "count",
    }
}

fn check_corpus(db: &SharedDatabase, corpus: &[QuestionRecord]) -> Result<()> {
    let guard = db.read();
    for q in corpus {
        if q.relevant.is_empty() {
            return Err(Error::CorpusMismatch(format!(
                "`{}` has no relevant entries",
                q.text
            )));
        }
        if let Some(id) = q.relevant.iter().find(|id| guard.record(id).is_none()) {
            return Err(Error::CorpusMismatch(format!(
                "`{id}` is not in scene `{}`",
                guard.scene_name()
            )));
        }
    }
    Ok(())
}

/// Retrieves, answers and scores every question with the user at `user`.
pub fn evaluate(
    db: &SharedDatabase,
    answerer: &dyn Answerer,
    corpus: &[QuestionRecord],
    k: usize,
    user: &UserPose,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    check_corpus(db, corpus)?;
    let mut rows = Vec::with_capacity(corpus.len());
    for q in corpus {
        let (result, pose) = db.query(*user, &q.text, k)?;
        let bundle = render_prompt(&q.text, &result, &pose);
        let answer = canonical(&answerer.answer(&bundle)?);
        let retrieved: Vec<String> = result.ids().into_iter().map(String::from).collect();
        rows.push(EvalRow {
            question: q.text.clone(),
            kind: q.kind,
            topic: q.topic,
            relevant: q.relevant.clone(),
            recall: recall_of(q, &retrieved),
            retrieved,
            correct: answer == canonical(&q.ground_truth),
            answer,
            ground_truth: q.ground_truth.clone(),
        });
    }
    let (scene, model) = {
        let guard = db.read();
        (guard.scene_name().to_string(), guard.model().fingerprint())
    };
    Ok(EvalReport::from_rows(
        scene,
        k,
        model,
        answerer.name().to_string(),
        rows,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub overall: Aggregate,
    pub by_kind: BTreeMap<QuestionKind, Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweep {
    pub scene: String,
    pub model: String,
    pub points: Vec<SweepPoint>,
    /// Whether mean recall never drops as k grows.
    pub recall_monotone: bool,
}

impl KSweep {
    pub fn summary(&self) -> String {
        let mut out = format!("scene {}  model {}\n", self.scene, self.model);
        let _ = writeln!(out, "{:>4} {:>9} {:>8}", "k", "accuracy", "recall");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:>4} {:>9.4} {:>8.4}",
                p.k, p.overall.accuracy, p.overall.mean_recall
            );
        }
        let _ = writeln!(out, "recall monotone in k: {}", self.recall_monotone);
        out
    }
}

pub fn k_sweep(
    db: &SharedDatabase,
    answerer: &dyn Answerer,
    corpus: &[QuestionRecord],
    ks: &[usize],
    user: &UserPose,
) -> Result<KSweep> {
    if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "k values must be positive and strictly increasing".into(),
        ));
    }
    let mut points = Vec::with_capacity(ks.len());
    let mut scene = String::new();
    let mut model = String::new();
    for &k in ks {
        let report = evaluate(db, answerer, corpus, k, user)?;
        scene = report.scene;
        model = report.model;
        points.push(SweepPoint {
            k,
            overall: report.overall,
            by_kind: report.by_kind,
        });
    }
    let recall_monotone = points
        .windows(2)
        .all(|w| w[1].overall.mean_recall >= w[0].overall.mean_recall);
    Ok(KSweep {
        scene,
        model,
        points,
        recall_monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scene: String,
    pub k: usize,
    pub baseline_model: String,
    pub trained_model: String,
    pub baseline: BTreeMap<QuestionKind, Aggregate>,
    pub trained: BTreeMap<QuestionKind, Aggregate>,
    pub baseline_overall: Aggregate,
    pub trained_overall: Aggregate,
    /// Trained minus baseline, per kind.
    pub delta_recall: BTreeMap<QuestionKind, f64>,
    pub delta_accuracy: BTreeMap<QuestionKind, f64>,
}

impl Comparison {
    pub fn summary(&self) -> String {
        let mut out = format!(
            "scene {}  k={}  baseline {}  trained {}\n",
            self.scene, self.k, self.baseline_model, self.trained_model
        );
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "kind", "base acc", "train acc", "d acc", "base rec", "train rec", "d rec"
        );
        for (kind, t) in &self.trained {
            let b = self.baseline.get(kind).copied().unwrap_or_default();
            let _ = writeln!(
                out,
                "{:<18} {:>10.4} {:>10.4} {:>+10.4} {:>10.4} {:>10.4} {:>+10.4}",
                kind_name(*kind),
                b.accuracy,
                t.accuracy,
                t.accuracy - b.accuracy,
                b.mean_recall,
                t.mean_recall,
                t.mean_recall - b.mean_recall
            );
        }
        out
    }
}

/// Evaluates the same corpus against two databases that hold the same scene
/// and base embedder and differ only in tower weights.
pub fn compare_models(
    baseline: &SharedDatabase,
    trained: &SharedDatabase,
    answerer: &dyn Answerer,
    corpus: &[QuestionRecord],
    k: usize,
    user: &UserPose,
) -> Result<Comparison> {
    {
        let (b, t) = (baseline.read(), trained.read());
        if b.scene_name() != t.scene_name() {
            return Err(Error::ConfigMismatch(format!(
                "scenes differ: `{}` vs `{}`",
                b.scene_name(),
                t.scene_name()
            )));
        }
        if !b.records().eq(t.records()) {
            return Err(Error::ConfigMismatch("scene records differ".into()));
        }
        let (bm, tm) = (b.model(), t.model());
        if bm.embedder_config() != tm.embedder_config()
            || bm.output_dimension() != tm.output_dimension()
            || bm.parameter_count() != tm.parameter_count()
        {
            return Err(Error::ConfigMismatch(
                "models differ in embedder or architecture".into(),
            ));
        }
    }
    let b = evaluate(baseline, answerer, corpus, k, user)?;
    let t = evaluate(trained, answerer, corpus, k, user)?;
    let kinds: Vec<QuestionKind> = t.by_kind.keys().copied().collect();
    let delta = |f: fn(&Aggregate) -> f64| -> BTreeMap<QuestionKind, f64> {
        kinds
            .iter()
            .map(|kind| (*kind, f(&t.kind(*kind)) - f(&b.kind(*kind))))
            .collect()
    };
    Ok(Comparison {
        scene: t.scene.clone(),
        k,
        delta_recall: delta(|a| a.mean_recall),
        delta_accuracy: delta(|a| a.accuracy),
        baseline_model: b.model,
        trained_model: t.model.clone(),
        baseline: b.by_kind,
        trained: t.by_kind.clone(),
        baseline_overall: b.overall,
        trained_overall: t.overall,
    })
}
