use std::collections::HashMap;

use super::loss::{loss_from_similarity, loss_slope};
use super::tower::{dot, Tower};
use super::{Label, TrainConfig, TrainingSample, TwoTowerModel};
use crate::embedding::Embedder;
use crate::error::{Error, Result};

/// Finite-difference step used by [`gradient_check`].
const FD_STEP: f64 = 1e-6;

/// Dataset with base embeddings precomputed once per distinct text, so each
/// epoch runs one forward/backward pass per distinct question and info string.
pub(crate) struct PreparedBatch {
    questions: Vec<Vec<f64>>,
    infos: Vec<Vec<f64>>,
    samples: Vec<(usize, usize, Label)>,
}

struct Pass {
    loss: f64,
    grads: Option<(Tower, Tower)>,
}

impl PreparedBatch {
    pub(crate) fn new(model: &TwoTowerModel, xs: &[TrainingSample]) -> Self {
        let embedder = model.embedder();
        let mut q_ids: HashMap<&str, usize> = HashMap::new();
        let mut i_ids: HashMap<String, usize> = HashMap::new();
        let mut questions = Vec::new();
        let mut infos = Vec::new();
        let mut samples = Vec::with_capacity(xs.len());
        for x in xs {
            let qi = *q_ids.entry(x.question.as_str()).or_insert_with(|| {
                questions.push(embedder.embed(&x.question));
                questions.len() - 1
            });
            let text = x.info_text();
            let ii = match i_ids.get(&text) {
                Some(&ii) => ii,
                None => {
                    infos.push(embedder.embed(&text));
                    i_ids.insert(text, infos.len() - 1);
                    infos.len() - 1
                }
            };
            samples.push((qi, ii, x.label));
        }
        Self {
            questions,
            infos,
            samples,
        }
    }

    pub(crate) fn loss(&self, model: &TwoTowerModel, cfg: &TrainConfig) -> Result<f64> {
        Ok(self.pass(model, cfg, false)?.loss)
    }

    fn pass(&self, model: &TwoTowerModel, cfg: &TrainConfig, with_grad: bool) -> Result<Pass> {
        if self.samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let q_acts: Vec<_> = self
            .questions
            .iter()
            .map(|x| model.question_tower.forward_cached(x))
            .collect();
        let i_acts: Vec<_> = self
            .infos
            .iter()
            .map(|x| model.information_tower.forward_cached(x))
            .collect();

        let n = self.samples.len() as f64;
        let e = model.output_dimension();
        let mut d_q = vec![vec![0.0; e]; q_acts.len()];
        let mut d_i = vec![vec![0.0; e]; i_acts.len()];
        let mut total = 0.0;
        for &(qi, ii, label) in &self.samples {
            let u = &q_acts[qi].output;
            let v = &i_acts[ii].output;
            let nu = dot(u, u).sqrt();
            let nv = dot(v, v).sqrt();
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::ZeroEmbedding);
            }
            let s = dot(u, v) / (nu * nv);
            total += loss_from_similarity(label, s, cfg);
            if !with_grad {
                continue;
            }
            let slope = loss_slope(label, s, cfg) / n;
            if slope == 0.0 {
                continue;
            }
            // ds/du = v/(|u||v|) - s u/|u|^2, symmetric for v.
            let inv_uv = 1.0 / (nu * nv);
            let (su, sv) = (s / (nu * nu), s / (nv * nv));
            for k in 0..e {
                d_q[qi][k] += slope * (v[k] * inv_uv - su * u[k]);
                d_i[ii][k] += slope * (u[k] * inv_uv - sv * v[k]);
            }
        }
        let loss = total / n;

        let grads = with_grad.then(|| {
            let mut gq = model.question_tower.zeros_like();
            let mut gi = model.information_tower.zeros_like();
            for ((x, acts), d) in self.questions.iter().zip(&q_acts).zip(&d_q) {
                model.question_tower.backward(x, acts, d, &mut gq);
            }
            for ((x, acts), d) in self.infos.iter().zip(&i_acts).zip(&d_i) {
                model.information_tower.backward(x, acts, d, &mut gi);
            }
            (gq, gi)
        });
        Ok(Pass { loss, grads })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TwoTowerModel,
    /// Loss before training followed by the loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// Full-batch gradient descent on the mean sample loss, one step per epoch.
pub fn train(
    model: &TwoTowerModel,
    xs: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let batch = PreparedBatch::new(model, xs);
    let mut model = model.clone();
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let with_grad = epoch < cfg.epochs;
        let pass = batch.pass(&model, cfg, with_grad)?;
        if !pass.loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: pass.loss,
            });
        }
        history.push(pass.loss);
        if let Some((gq, gi)) = pass.grads {
            step(&mut model.question_tower, &gq, cfg.learning_rate);
            step(&mut model.information_tower, &gi, cfg.learning_rate);
        }
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

fn step(tower: &mut Tower, grad: &Tower, lr: f64) {
    for (p, g) in tower.params_mut().zip(grad.params()) {
        *p -= lr * g;
    }
}

/// Analytic gradient of the batch loss, flattened in parameter order.
pub fn analytic_gradient(
    model: &TwoTowerModel,
    xs: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let batch = PreparedBatch::new(model, xs);
    let (gq, gi) = batch
        .pass(model, cfg, true)?
        .grads
        .expect("gradient requested");
    Ok(gq.params().chain(gi.params()).copied().collect())
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every parameter.
pub fn gradient_check(
    model: &TwoTowerModel,
    xs: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<f64> {
    let analytic = analytic_gradient(model, xs, cfg)?;
    let batch = PreparedBatch::new(model, xs);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (idx, &a) in analytic.iter().enumerate() {
        let original = *probe.params_mut().nth(idx).expect("index in range");
        *probe.params_mut().nth(idx).unwrap() = original + FD_STEP;
        let plus = batch.loss(&probe, cfg)?;
        *probe.params_mut().nth(idx).unwrap() = original - FD_STEP;
        let minus = batch.loss(&probe, cfg)?;
        *probe.params_mut().nth(idx).unwrap() = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let denom = (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashEmbedderConfig;
    use crate::two_tower::cosine_sim;

    fn tiny(seed: u64) -> TwoTowerModel {
        TwoTowerModel::new(
            HashEmbedderConfig {
                dimension: 8,
                seed: 0,
            },
            4,
            3,
            seed,
        )
    }

    fn sim(model: &TwoTowerModel, x: &TrainingSample) -> f64 {
        cosine_sim(
            &model.forward_question(&x.question),
            &model.forward_information(&x.category, &x.instance),
        )
        .unwrap()
    }

    fn mixed_samples() -> Vec<TrainingSample> {
        vec![
            TrainingSample::new("Where is chair_1?", "chair", "chair_1", Label::Pos),
            TrainingSample::new("Where is chair_1?", "chair", "chair_2", Label::Hneg),
            TrainingSample::new("Where is chair_1?", "table", "table_1", Label::Neg),
            TrainingSample::new("What color is desk_2?", "desk", "desk_2", Label::Pos),
            TrainingSample::new("What color is desk_2?", "desk", "desk_1", Label::Hneg),
            TrainingSample::new("How many lamps are there?", "lamp", "lamp_1", Label::Pos),
        ]
    }

    /// Margin chosen so every non-positive sample is well inside the active
    /// hinge region (away from the kink).
    fn active_margin(model: &TwoTowerModel, xs: &[TrainingSample]) -> f64 {
        let min_neg = xs
            .iter()
            .filter(|x| x.label != Label::Pos)
            .map(|x| sim(model, x))
            .fold(f64::INFINITY, f64::min);
        (min_neg - 0.05).clamp(-0.99, 0.99)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = tiny(0);
        let xs = mixed_samples();
        let m = active_margin(&model, &xs);
        // TrainConfig::validate is bypassed here on purpose: the check only needs
        // the loss definition, and the margin may fall outside (0, 1).
        let cfg = TrainConfig {
            margin: m,
            ..TrainConfig::default()
        };
        for x in &xs {
            if x.label != Label::Pos {
                assert!((sim(&model, x) - m).abs() > 1e-3);
            }
        }
        let err = gradient_check(&model, &xs, &cfg).unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn gradient_check_all_positive() {
        let model = tiny(5);
        let xs: Vec<_> = mixed_samples()
            .into_iter()
            .map(|mut x| {
                x.label = Label::Pos;
                x
            })
            .collect();
        let err = gradient_check(&model, &xs, &TrainConfig::default()).unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        let model = tiny(0);
        let xs: Vec<_> = mixed_samples()
            .into_iter()
            .filter(|x| x.label != Label::Pos)
            .collect();
        let max_s = xs
            .iter()
            .map(|x| sim(&model, x))
            .fold(f64::NEG_INFINITY, f64::max);
        let cfg = TrainConfig {
            margin: (max_s + 0.01).min(0.999),
            ..TrainConfig::default()
        };
        assert!(xs.iter().all(|x| sim(&model, x) < cfg.margin));
        let g = analytic_gradient(&model, &xs, &cfg).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_positive_converges() {
        let model = TwoTowerModel::with_defaults(0);
        let xs = vec![TrainingSample::new(
            "Where is chair_1?",
            "chair",
            "chair_1",
            Label::Pos,
        )];
        let cfg = TrainConfig {
            epochs: 12,
            ..TrainConfig::default()
        };
        let out = train(&model, &xs, &cfg).unwrap();
        assert_eq!(out.loss_history.len(), cfg.epochs + 1);
        for w in out.loss_history.windows(2) {
            assert!(w[1] < w[0], "loss did not decrease: {:?}", out.loss_history);
        }
        assert!(
            *out.loss_history.last().unwrap() < 0.05,
            "{:?}",
            out.loss_history
        );
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let model = tiny(2);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            ..TrainConfig::default()
        };
        let out = train(&model, &mixed_samples(), &cfg).unwrap();
        assert_eq!(out.model, model);
    }

    #[test]
    fn training_is_deterministic() {
        let model = tiny(4);
        let cfg = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let a = train(&model, &mixed_samples(), &cfg).unwrap();
        let b = train(&model, &mixed_samples(), &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            train(&tiny(0), &[], &TrainConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = TrainConfig {
            learning_rate: f64::MAX,
            epochs: 5,
            ..TrainConfig::default()
        };
        let err = train(&tiny(0), &mixed_samples(), &cfg).unwrap_err();
        assert!(
            matches!(err, Error::Diverged { .. } | Error::ZeroEmbedding),
            "{err}"
        );
    }
}
