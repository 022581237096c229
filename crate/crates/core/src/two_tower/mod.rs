//! Two-tower retriever: independent question and information towers over a
//! shared frozen base embedder, scored by cosine similarity and trained with
//! a margin loss that up-weights hard negatives.

mod checkpoint;
mod loss;
mod tower;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{info_text, Embedder, HashEmbedder, HashEmbedderConfig};
use crate::error::{Error, Result};

pub use checkpoint::{load_model, save_model, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use loss::{batch_loss, loss_from_similarity, sample_loss};
pub use tower::Tower;
pub use train::{analytic_gradient, gradient_check, train, TrainOutcome};

pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_OUTPUT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pos,
    Neg,
    Hneg,
}

/// A `(question, (category, instance), label)` training triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingSample {
    pub question: String,
    pub category: String,
    pub instance: String,
    pub label: Label,
}

impl TrainingSample {
    pub fn new(
        question: impl Into<String>,
        category: impl Into<String>,
        instance: impl Into<String>,
        label: Label,
    ) -> Self {
        Self {
            question: question.into(),
            category: category.into(),
            instance: instance.into(),
            label,
        }
    }

    pub fn info_text(&self) -> String {
        info_text(&self.category, &self.instance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub hard_negative_weight: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.2,
            hard_negative_weight: 2.0,
            learning_rate: 0.5,
            epochs: 300,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate and epoch count reported for transformer fine-tuning.
    pub fn reference_preset() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "margin {} outside (0, 1)",
                self.margin
            )));
        }
        if !(self.hard_negative_weight >= 1.0 && self.hard_negative_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "hard-negative weight {} must be >= 1",
                self.hard_negative_weight
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoTowerModel {
    embedder: HashEmbedder,
    pub init_seed: u64,
    pub question_tower: Tower,
    pub information_tower: Tower,
}

impl TwoTowerModel {
    /// Fresh, seeded model. Both towers draw from one seeded stream, question tower first.
    pub fn new(embedder: HashEmbedderConfig, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = embedder.dimension;
        let question_tower = Tower::init(d, hidden, output, &mut rng);
        let information_tower = Tower::init(d, hidden, output, &mut rng);
        Self {
            embedder: HashEmbedder::new(embedder),
            init_seed: seed,
            question_tower,
            information_tower,
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(
            HashEmbedderConfig::default(),
            DEFAULT_HIDDEN,
            DEFAULT_OUTPUT,
            seed,
        )
    }

    /// The untrained model this one was initialized from.
    pub fn reinitialized(&self) -> Self {
        Self::new(
            self.embedder.config(),
            self.question_tower.hidden,
            self.question_tower.output,
            self.init_seed,
        )
    }

    pub fn embedder(&self) -> &HashEmbedder {
        &self.embedder
    }

    pub fn embedder_config(&self) -> HashEmbedderConfig {
        self.embedder.config()
    }

    pub fn output_dimension(&self) -> usize {
        self.question_tower.output
    }

    pub fn forward_question(&self, question: &str) -> Vec<f64> {
        self.question_tower.forward(&self.embedder.embed(question))
    }

    pub fn forward_information(&self, category: &str, instance: &str) -> Vec<f64> {
        self.information_tower
            .forward(&self.embedder.embed(&info_text(category, instance)))
    }

    pub fn parameter_count(&self) -> usize {
        self.question_tower.parameter_count() + self.information_tower.parameter_count()
    }

    /// All parameters, question tower then information tower.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.question_tower
            .params()
            .chain(self.information_tower.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.question_tower
            .params_mut()
            .chain(self.information_tower.params_mut())
    }

    /// Short content hash of configuration and parameters.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let cfg = self.embedder.config();
        hasher.update(cfg.dimension.to_le_bytes());
        hasher.update(cfg.seed.to_le_bytes());
        hasher.update(self.question_tower.hidden.to_le_bytes());
        hasher.update(self.question_tower.output.to_le_bytes());
        for p in self.params() {
            hasher.update(p.to_bits().to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..8])
    }

    pub(crate) fn from_parts(
        embedder: HashEmbedderConfig,
        init_seed: u64,
        question_tower: Tower,
        information_tower: Tower,
    ) -> Result<Self> {
        let d = embedder.dimension;
        for (name, t) in [
            ("question", &question_tower),
            ("information", &information_tower),
        ] {
            if !t.shape_is_consistent() {
                return Err(Error::CheckpointMismatch(format!(
                    "{name} tower parameter arrays do not match its dimensions"
                )));
            }
            if t.input != d {
                return Err(Error::CheckpointMismatch(format!(
                    "{name} tower input {} != embedder dimension {d}",
                    t.input
                )));
            }
            if t.params().any(|p| !p.is_finite()) {
                return Err(Error::CheckpointMismatch(format!(
                    "{name} tower has non-finite parameters"
                )));
            }
        }
        if question_tower.output != information_tower.output {
            return Err(Error::CheckpointMismatch(
                "towers disagree on output dimension".into(),
            ));
        }
        Ok(Self {
            embedder: HashEmbedder::new(embedder),
            init_seed,
            question_tower,
            information_tower,
        })
    }
}

pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = tower::dot(a, a).sqrt();
    let nb = tower::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroEmbedding);
    }
    Ok((tower::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
