//! Prompt assembly from retrieved knowledge, and answer backends.

use std::fmt::Write as _;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::knowledge_db::{RetrievalResult, RetrievedEntry};
use crate::qa_corpus::{
    canonical, fmt2, format_position, interactivity_text, parse_question, pluralize, Subject, Topic,
};
use crate::scene::UserPose;
use crate::spatial::direction_sentence;

/// Answer emitted when the retrieved knowledge cannot answer the question.
pub const NO_KNOWLEDGE: &str = "no relevant knowledge retrieved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub question: String,
    /// Rendered lines, one per retrieved entry, in rank order.
    pub knowledge_entries: Vec<String>,
    pub user_conditions: String,
    /// The structured entries the lines were rendered from.
    pub entries: Vec<RetrievedEntry>,
}

impl PromptBundle {
    /// Full text prompt for a chat model.
    pub fn to_prompt_text(&self) -> String {
        let mut out = String::from(
            "Answer the question about the VR scene using only the knowledge below. \
             Reply with the answer only.\n\nKnowledge:\n",
        );
        for line in &self.knowledge_entries {
            let _ = writeln!(out, "- {line}");
        }
        let _ = write!(
            out,
            "\nUser conditions: {}\n\nQuestion: {}",
            self.user_conditions, self.question
        );
        out
    }
}

fn render_entry(e: &RetrievedEntry) -> String {
    let r = &e.record;
    let q = r.orientation;
    format!(
        "instance: {}; category: {}; position: {}; orientation: ({}, {}, {}, {}); \
         interactive: {}; color: {}; material: {}; distance: {}; relative position: {}; \
         direction: {}",
        r.instance,
        r.category,
        format_position(&r.position),
        fmt2(q.x),
        fmt2(q.y),
        fmt2(q.z),
        fmt2(q.w),
        if r.interactive { "yes" } else { "no" },
        r.color,
        r.material,
        fmt2(e.spatial.distance),
        format_position(&e.spatial.quantitative),
        e.spatial.qualitative,
    )
}

pub fn render_user_conditions(pose: &UserPose) -> String {
    let q = pose.orientation;
    format!(
        "player position: {}; player orientation: ({}, {}, {}, {})",
        format_position(&pose.position),
        fmt2(q.x),
        fmt2(q.y),
        fmt2(q.z),
        fmt2(q.w)
    )
}

pub fn render_prompt(question: &str, result: &RetrievalResult, pose: &UserPose) -> PromptBundle {
    PromptBundle {
        question: question.to_string(),
        knowledge_entries: result.entries.iter().map(render_entry).collect(),
        user_conditions: render_user_conditions(pose),
        entries: result.entries.clone(),
    }
}

fn entry_answer(topic: Topic, e: &RetrievedEntry) -> String {
    let r = &e.record;
    let text = match topic {
        Topic::Material => r.material.clone(),
        Topic::Color => r.color.clone(),
        Topic::Interactivity => interactivity_text(r.interactive).to_string(),
        Topic::Position => format_position(&r.position),
        Topic::Direction => direction_sentence(&r.instance, &e.spatial.qualitative),
        Topic::Distance => fmt2(e.spatial.distance),
        Topic::Count => unreachable!("count is answered over all entries"),
    };
    canonical(&text)
}

/// Deterministic answer read off the retrieved entries. `topic` overrides the
/// topic inferred from the question text.
pub fn template_answer(bundle: &PromptBundle, topic: Option<Topic>) -> String {
    let Some((parsed, subject)) = parse_question(&bundle.question) else {
        return NO_KNOWLEDGE.to_string();
    };
    let topic = topic.unwrap_or(parsed);
    if topic == Topic::Count {
        let plural = match &subject {
            Subject::Plural(p) | Subject::Instance(p) | Subject::Category(p) => p.to_lowercase(),
        };
        let n = bundle
            .entries
            .iter()
            .filter(|e| pluralize(&e.record.category) == plural)
            .count();
        return if n == 0 {
            NO_KNOWLEDGE.to_string()
        } else {
            n.to_string()
        };
    }
    let hit = match &subject {
        Subject::Instance(id) => bundle
            .entries
            .iter()
            .find(|e| e.record.instance.eq_ignore_ascii_case(id)),
        Subject::Category(c) | Subject::Plural(c) => bundle
            .entries
            .iter()
            .find(|e| e.record.category.eq_ignore_ascii_case(c)),
    };
    hit.map_or_else(|| NO_KNOWLEDGE.to_string(), |e| entry_answer(topic, e))
}

pub trait Answerer: Send + Sync {
    fn answer(&self, bundle: &PromptBundle) -> Result<String>;

    fn name(&self) -> &str;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateAnswerer;

impl Answerer for TemplateAnswerer {
    fn answer(&self, bundle: &PromptBundle) -> Result<String> {
        Ok(template_answer(bundle, None))
    }

    fn name(&self) -> &str {
        "template"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Chat-completions URL, e.g. `http://localhost:8000/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "llama-3.1-8b-instruct".into(),
            api_key_env: Some("SCENERAG_API_KEY".into()),
            timeout_secs: 30,
            max_retries: 2,
        }
    }
}

/// Chat-completion backend over HTTP. Answers are not deterministic.
#[derive(Debug, Clone)]
pub struct ExternalAnswerer {
    config: ExternalConfig,
    agent: ureq::Agent,
}

impl ExternalAnswerer {
    pub fn new(config: ExternalConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn request_once(&self, body: &serde_json::Value, key: Option<&str>) -> Result<String> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::Backend(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::Backend(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::Backend("response has no message content".into()))
    }
}

impl Answerer for ExternalAnswerer {
    fn answer(&self, bundle: &PromptBundle) -> Result<String> {
        let key = match &self.config.api_key_env {
            Some(var) => match std::env::var(var) {
                Ok(k) => Some(k),
                Err(_) => {
                    return Err(Error::Backend(format!(
                        "environment variable {var} is not set"
                    )))
                }
            },
            None => None,
        };
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "user", "content": bundle.to_prompt_text()},
            ],
        });
        let mut last = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                thread::sleep(Duration::from_millis(200 << attempt.min(4)));
            }
            match self.request_once(&body, key.as_deref()) {
                Ok(answer) => return Ok(answer),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn name(&self) -> &str {
        "external"
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Arc;

    use super::*;
    use crate::knowledge_db::KnowledgeDatabase;
    use crate::scene::{ObjectRecord, Quaternion, Scene};
    use crate::two_tower::TwoTowerModel;

    fn obj(category: &str, serial: u32, pos: [f64; 3], material: &str) -> ObjectRecord {
        ObjectRecord {
            scene_name: String::new(),
            category: category.into(),
            instance: format!("{category}_{serial}"),
            position: pos,
            orientation: Quaternion::IDENTITY,
            interactive: true,
            color: "white".into(),
            material: material.into(),
            visible: true,
        }
    }

    fn db() -> KnowledgeDatabase {
        let scene = Scene::new(
            "office",
            vec![
                obj("clock", 1, [1.0, 1.0, 0.0], "alloy"),
                obj("printer", 1, [2.0, 0.0, 0.0], "plastic"),
                obj("printer", 2, [0.0, 3.0, 0.0], "plastic"),
                obj("tray", 2, [-1.0, -1.0, 0.0], "wooden"),
            ],
        )
        .unwrap();
        KnowledgeDatabase::new(&scene, Arc::new(TwoTowerModel::with_defaults(0))).unwrap()
    }

    fn bundle(question: &str, k: usize) -> PromptBundle {
        let db = db();
        let result = db.retrieve(question, k).unwrap();
        render_prompt(question, &result, &db.user_pose())
    }

    #[test]
    fn one_line_per_entry_in_rank_order() {
        let b = bundle("Where is clock_1?", 1);
        assert_eq!(b.knowledge_entries.len(), 1);
        let b = bundle("Where is clock_1?", 3);
        assert_eq!(b.knowledge_entries.len(), 3);
        for (line, e) in b.knowledge_entries.iter().zip(&b.entries) {
            assert!(line.starts_with(&format!("instance: {};", e.instance)));
        }
        let all = bundle("Where is clock_1?", 4);
        let clock = all
            .knowledge_entries
            .iter()
            .find(|l| l.contains("instance: clock_1;"))
            .unwrap();
        assert!(clock.ends_with("direction: front right"), "{clock}");
        assert!(b.user_conditions.contains("(0.00, 0.00, 0.00)"));
    }

    #[test]
    fn answers_from_retrieved_entries() {
        assert_eq!(
            template_answer(&bundle("What is the material of the clock?", 4), None),
            "alloy"
        );
        assert_eq!(
            template_answer(&bundle("How many printers can be found?", 4), None),
            "2"
        );
        assert_eq!(
            template_answer(
                &bundle("Where is tray_2 in relation to the player's position?", 4),
                None
            ),
            "tray_2 is at the back left of the player"
        );
        assert_eq!(
            template_answer(&bundle("How far is printer_1 from me?", 4), None),
            "2.00"
        );
    }

    #[test]
    fn missing_subject_falls_back() {
        let mut b = bundle("Where is tray_2 in relation to the player's position?", 4);
        b.entries.retain(|e| e.instance != "tray_2");
        assert_eq!(template_answer(&b, None), NO_KNOWLEDGE);
        assert_eq!(
            template_answer(&bundle("Sing me a song.", 4), None),
            NO_KNOWLEDGE
        );
    }

    #[test]
    fn count_never_exceeds_entries() {
        for k in 1..=4 {
            let b = bundle("How many printers are there?", k);
            let a = template_answer(&b, None);
            if a != NO_KNOWLEDGE {
                assert!(a.parse::<usize>().unwrap() <= k);
            }
        }
    }

    #[test]
    fn external_answerer_talks_chat_completions() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let reply =
                json!({"choices": [{"message": {"role": "assistant", "content": " Alloy "}}]})
                    .to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
            (req, auth)
        });

        let answerer = ExternalAnswerer::new(ExternalConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            model: "stub".into(),
            api_key_env: None,
            timeout_secs: 5,
            max_retries: 0,
        });
        let b = bundle("What is the material of the clock?", 2);
        assert_eq!(answerer.answer(&b).unwrap(), "Alloy");
        let (req, auth) = server.join().unwrap();
        assert_eq!(req["model"], "stub");
        assert!(req["messages"][0]["content"]
            .as_str()
            .unwrap()
            .contains("What is the material of the clock?"));
        assert!(auth.is_empty());
    }

    #[test]
    fn external_answerer_reports_unreachable_backend() {
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let answerer = ExternalAnswerer::new(ExternalConfig {
            endpoint: format!("http://127.0.0.1:{port}/v1/chat/completions"),
            api_key_env: None,
            timeout_secs: 2,
            max_retries: 1,
            ..ExternalConfig::default()
        });
        assert!(matches!(
            answerer.answer(&bundle("Where is clock_1?", 1)),
            Err(Error::Backend(_))
        ));
    }
}
