//! Base text embedding: tokenization and a signed feature-hashing embedder
//! over words and boundary-marked character trigrams.

use serde::{Deserialize, Serialize};

pub const DEFAULT_DIMENSION: usize = 256;

/// Deterministic text → vector map shared by both retriever towers.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Lowercases and splits on every non-alphanumeric character (underscore
/// included); digit runs and letter runs become separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Alpha,
        Digit,
    }

    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut class = None;
    for ch in text.chars().flat_map(char::to_lowercase) {
        let next = if ch.is_numeric() {
            Some(Class::Digit)
        } else if ch.is_alphanumeric() {
            Some(Class::Alpha)
        } else {
            None
        };
        if next != class && !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        if next.is_some() {
            current.push(ch);
        }
        class = next;
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Text embedded for an index entry: category followed by instance id.
pub fn info_text(category: &str, instance: &str) -> String {
    format!("{category} {instance}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashEmbedderConfig {
    pub dimension: usize,
    pub seed: u64,
}

impl Default for HashEmbedderConfig {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashEmbedder {
    config: HashEmbedderConfig,
}

impl HashEmbedder {
    pub fn new(config: HashEmbedderConfig) -> Self {
        assert!(config.dimension > 0, "embedding dimension must be positive");
        Self { config }
    }

    pub fn config(&self) -> HashEmbedderConfig {
        self.config
    }

    fn add_feature(&self, feature: &[u8], out: &mut [f64]) {
        let h = feature_hash(self.config.seed, feature);
        let bucket = (h % self.config.dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        out[bucket] += sign;
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(HashEmbedderConfig::default())
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.config.dimension];
        let mut buf = Vec::new();
        for token in tokenize(text) {
            buf.clear();
            buf.extend_from_slice(b"w:");
            buf.extend_from_slice(token.as_bytes());
            self.add_feature(&buf, &mut out);

            let marked: Vec<char> = std::iter::once('<')
                .chain(token.chars())
                .chain(std::iter::once('>'))
                .collect();
            for tri in marked.windows(3) {
                buf.clear();
                buf.extend_from_slice(b"t:");
                for c in tri {
                    let mut tmp = [0u8; 4];
                    buf.extend_from_slice(c.encode_utf8(&mut tmp).as_bytes());
                }
                self.add_feature(&buf, &mut out);
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm);
        }
        out
    }
}

/// FNV-1a over the seed and feature bytes, finished with a splitmix64 mix.
fn feature_hash(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_synthetic_scene, vocab};

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Where is chair_1?"), ["where", "is", "chair", "1"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Viking-Village"), ["viking", "village"]);
        assert_eq!(tokenize("tray2"), ["tray", "2"]);
        assert_eq!(
            tokenize("  low round table_12 "),
            ["low", "round", "table", "12"]
        );
    }

    #[test]
    fn info_text_format() {
        assert_eq!(info_text("chair", "chair_1"), "chair chair_1");
        assert_eq!(
            info_text("low round table", "low round table_2"),
            "low round table low round table_2"
        );
        assert_eq!(info_text("door", "door_3"), "door door_3");
    }

    #[test]
    fn embedding_basics() {
        let e = HashEmbedder::default();
        assert_eq!(e.embed("chair 1"), e.embed("chair_1"));
        let t = e.embed("table");
        assert!((t.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        assert!(e.embed("").iter().all(|&v| v == 0.0));
        assert_eq!(e.embed("where is chair_1"), e.embed("where is chair_1"));
    }

    #[test]
    fn lexical_similarity_ordering() {
        let e = HashEmbedder::default();
        let chair = e.embed("chair");
        let plural = cos(&chair, &e.embed("chairs"));
        let door = cos(&chair, &e.embed("door"));
        assert!(plural > door, "{plural} vs {door}");
    }

    #[test]
    fn no_collisions_on_scene_vocabulary() {
        let e = HashEmbedder::default();
        let scene = generate_synthetic_scene("villa", 0, 28, 37, vocab::VILLA).unwrap();
        let vecs: Vec<Vec<f64>> = scene
            .objects
            .iter()
            .map(|o| e.embed(&info_text(&o.category, &o.instance)))
            .collect();
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                assert_ne!(vecs[i], vecs[j]);
            }
        }
    }

    #[test]
    fn seed_changes_vectors() {
        let a = HashEmbedder::new(HashEmbedderConfig {
            dimension: 64,
            seed: 0,
        });
        let b = HashEmbedder::new(HashEmbedderConfig {
            dimension: 64,
            seed: 1,
        });
        assert_eq!(a.embed("printer").len(), 64);
        assert_ne!(a.embed("printer"), b.embed("printer"));
    }
}
