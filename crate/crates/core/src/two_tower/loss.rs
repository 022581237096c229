use super::{cosine_sim, Label, TrainConfig, TrainingSample, TwoTowerModel};
use crate::error::{Error, Result};

/// Per-sample loss at similarity `s`:
/// `pos → 1 − s`, `neg → max(0, s − m)`, `hneg → w_hneg · max(0, s − m)`.
pub fn loss_from_similarity(label: Label, s: f64, cfg: &TrainConfig) -> f64 {
    match label {
        Label::Pos => 1.0 - s,
        Label::Neg => (s - cfg.margin).max(0.0),
        Label::Hneg => cfg.hard_negative_weight * (s - cfg.margin).max(0.0),
    }
}

/// `d loss / d s`; the hinge subgradient at `s == m` is zero.
pub(crate) fn loss_slope(label: Label, s: f64, cfg: &TrainConfig) -> f64 {
    match label {
        Label::Pos => -1.0,
        Label::Neg if s > cfg.margin => 1.0,
        Label::Hneg if s > cfg.margin => cfg.hard_negative_weight,
        Label::Neg | Label::Hneg => 0.0,
    }
}

pub fn sample_loss(model: &TwoTowerModel, x: &TrainingSample, cfg: &TrainConfig) -> Result<f64> {
    let q = model.forward_question(&x.question);
    let i = model.forward_information(&x.category, &x.instance);
    Ok(loss_from_similarity(x.label, cosine_sim(&q, &i)?, cfg))
}

/// Mean of [`sample_loss`] over the dataset.
pub fn batch_loss(model: &TwoTowerModel, xs: &[TrainingSample], cfg: &TrainConfig) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let batch = super::train::PreparedBatch::new(model, xs);
    batch.loss(model, cfg)
}
