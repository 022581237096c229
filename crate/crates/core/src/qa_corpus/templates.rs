//! Question templates and the inverse parser that recovers topic and subject
//! from a templated question.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Material,
    Color,
    Interactivity,
    Position,
    Direction,
    Distance,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicGroup {
    Attribute,
    Spatial,
    Count,
}

impl Topic {
    pub const SINGLE: [Topic; 6] = [
        Topic::Material,
        Topic::Color,
        Topic::Interactivity,
        Topic::Position,
        Topic::Direction,
        Topic::Distance,
    ];

    pub fn group(self) -> TopicGroup {
        match self {
            Topic::Material | Topic::Color | Topic::Interactivity | Topic::Position => {
                TopicGroup::Attribute
            }
            Topic::Direction | Topic::Distance => TopicGroup::Spatial,
            Topic::Count => TopicGroup::Count,
        }
    }

    pub fn is_multi(self) -> bool {
        self == Topic::Count
    }

    /// Phrasings with a single `{}` slot: the subject for single-knowledge
    /// topics, the plural category for counting.
    pub fn phrasings(self) -> &'static [&'static str] {
        match self {
            Topic::Material => MATERIAL,
            Topic::Color => COLOR,
            Topic::Interactivity => INTERACTIVITY,
            Topic::Position => POSITION,
            Topic::Direction => DIRECTION,
            Topic::Distance => DISTANCE,
            Topic::Count => COUNT,
        }
    }
}

const MATERIAL: &[&str] = &[
    "What is the material of {}?",
    "What material is {} made of?",
    "Which material is {} made of?",
    "What is {} made of?",
    "Tell me the material of {}.",
    "What kind of material does {} have?",
    "Can you tell me what {} is made of?",
    "Which material does {} use?",
    "Describe the material of {}.",
    "What's the material of {}?",
    "I want to know the material of {}.",
    "What type of material is {}?",
    "What is the surface material of {}?",
    "Do you know what material {} is?",
];

const COLOR: &[&str] = &[
    "What color is {}?",
    "What is the color of {}?",
    "Which color is {}?",
    "Tell me the color of {}.",
    "What colour is {}?",
    "Can you tell me the color of {}?",
    "What's the color of {}?",
    "Describe the color of {}.",
    "Which color does {} have?",
    "I want to know the color of {}.",
    "What color does {} appear?",
    "How is {} colored?",
    "What is the main color of {}?",
    "Do you know the color of {}?",
];

const INTERACTIVITY: &[&str] = &[
    "Is {} interactive?",
    "Can I interact with {}?",
    "Is {} an interactive object?",
    "Can the player interact with {}?",
    "Is it possible to interact with {}?",
    "Is {} interactable?",
    "Tell me whether {} is interactive.",
    "Can I use {}?",
    "Does {} support interaction?",
    "Am I able to interact with {}?",
    "Is {} something I can interact with?",
    "Could I interact with {}?",
    "Is interaction with {} possible?",
    "Does {} react when I touch it?",
];

const POSITION: &[&str] = &[
    "Where is {}?",
    "What is the position of {}?",
    "Where is {} located?",
    "Where can I find {}?",
    "Tell me the position of {}.",
    "What are the coordinates of {}?",
    "Where exactly is {}?",
    "Give me the location of {}.",
    "Where is {} placed?",
    "What is the location of {}?",
    "Can you tell me where {} is?",
    "Where does {} stand?",
    "At which coordinates is {}?",
    "Show me the position of {}.",
];

const DIRECTION: &[&str] = &[
    "Where is {} in relation to the player's position?",
    "In which direction is {} from me?",
    "Which direction is {} relative to the player?",
    "Where is {} relative to me?",
    "Is {} in front of me or behind me?",
    "Where is {} compared to my position?",
    "Which way is {} from the player?",
    "In what direction can I find {}?",
    "Where is {} from my point of view?",
    "How is {} positioned relative to me?",
    "Which side of the player is {} on?",
    "Where is {} with respect to the player?",
    "Is {} to my left or to my right?",
    "Which direction should I face to see {}?",
];

const DISTANCE: &[&str] = &[
    "How far is {} from the player?",
    "What is the distance between me and {}?",
    "How far away is {}?",
    "What is the distance to {}?",
    "How far is {} from me?",
    "How many meters away is {}?",
    "What is my distance from {}?",
    "How close is {} to me?",
    "How far do I need to go to reach {}?",
    "Tell me the distance to {}.",
    "How distant is {} from the player?",
    "What's the distance from the player to {}?",
    "How long is the walk to {}?",
    "Is {} near me? How far?",
];

const COUNT: &[&str] = &[
    "How many {} are in the VR scene?",
    "How many {} can be found?",
    "How many {} are there?",
    "Count the {} in the scene.",
    "What is the number of {} in the scene?",
    "How many {} do you see?",
    "How many {} exist in this room?",
    "Tell me how many {} there are.",
    "How many {} can I see?",
    "What is the total number of {}?",
    "How many {} are present?",
    "Give me the count of {}.",
    "How many {} are around me?",
    "How many {} are visible?",
];

/// English plural of a category name; only the last word is inflected.
pub fn pluralize(category: &str) -> String {
    let (head, last) = match category.rfind(' ') {
        Some(i) => (&category[..=i], &category[i + 1..]),
        None => ("", category),
    };
    let plural = if last.ends_with('s')
        || last.ends_with('x')
        || last.ends_with('z')
        || last.ends_with("ch")
        || last.ends_with("sh")
    {
        format!("{last}es")
    } else if last.ends_with('y') && !last[..last.len() - 1].ends_with(['a', 'e', 'i', 'o', 'u']) {
        format!("{}ies", &last[..last.len() - 1])
    } else if let Some(stem) = last.strip_suffix("lf") {
        format!("{stem}lves")
    } else {
        format!("{last}s")
    };
    format!("{head}{plural}")
}

/// Subject slot of a parsed question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subject {
    /// An instance id such as `chair_1`.
    Instance(String),
    /// `the <category>`, used for categories with a single instance.
    Category(String),
    /// Plural category phrase of a counting question.
    Plural(String),
}

/// Renders the subject slot for a single-knowledge question.
pub fn subject_text(subject: &Subject) -> String {
    match subject {
        Subject::Instance(id) => id.clone(),
        Subject::Category(c) => format!("the {c}"),
        Subject::Plural(p) => p.clone(),
    }
}

pub fn fill(phrasing: &str, slot: &str) -> String {
    phrasing.replacen("{}", slot, 1)
}

/// Recovers `(topic, subject)` from a templated question. The most specific
/// matching phrasing (longest fixed text) wins.
pub fn parse_question(text: &str) -> Option<(Topic, Subject)> {
    let text = text.trim();
    let mut best: Option<(usize, Topic, &str)> = None;
    for topic in Topic::SINGLE.into_iter().chain([Topic::Count]) {
        for phrasing in topic.phrasings() {
            let (prefix, suffix) = phrasing.split_once("{}").expect("template slot");
            if text.len() <= prefix.len() + suffix.len() {
                continue;
            }
            let Some(rest) = strip_prefix_ci(text, prefix) else {
                continue;
            };
            let Some(slot) = strip_suffix_ci(rest, suffix) else {
                continue;
            };
            let fixed = prefix.len() + suffix.len();
            if best.is_none_or(|(len, _, _)| fixed > len) {
                best = Some((fixed, topic, slot));
            }
        }
    }
    let (_, topic, slot) = best?;
    let slot = slot.trim();
    if slot.is_empty() {
        return None;
    }
    let subject = if topic == Topic::Count {
        Subject::Plural(slot.to_string())
    } else if let Some(cat) = slot.strip_prefix("the ") {
        Subject::Category(cat.to_string())
    } else {
        Subject::Instance(slot.to_string())
    };
    Some((topic, subject))
}

fn strip_prefix_ci<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    let head = text.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix)
        .then(|| &text[prefix.len()..])
}

fn strip_suffix_ci<'a>(text: &'a str, suffix: &str) -> Option<&'a str> {
    let cut = text.len().checked_sub(suffix.len())?;
    let tail = text.get(cut..)?;
    tail.eq_ignore_ascii_case(suffix).then(|| &text[..cut])
}
