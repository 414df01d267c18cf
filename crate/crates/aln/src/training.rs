//! Deterministic mini-batch training loop for the weighted joint objective.
//!
//! Utterances have variable length, so batching is by gradient accumulation:
//! each logical batch sums per-utterance gradients of `loss_total`, divides
//! by the batch's true utterance count, and applies one Adam step. No padding
//! or masking exists anywhere.

use std::collections::HashSet;
use std::time::Instant;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::model::backward::backward;
use crate::model::forward::forward_cached;
use crate::model::{init_model, transfer_forward, ModelConfig, ModelParams, Variant};
use crate::numerics::ops::mean_pool;
use crate::numerics::{adam_step, AdamConfig};
use crate::rng::{permutation, SplitMix64};
use crate::textio::{format_f64, Fields};

const TAG_SHUFFLE: u64 = 0x20;

/// What to do when a loss goes non-finite. Aborting is the only policy:
/// silently skipping would mask exactly the gradient bugs the verification
/// suite exists to catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NanPolicy {
    #[default]
    Abort,
}

/// Training hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Weight of the distillation loss in the joint objective.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
    /// Evaluate test accuracy every this many epochs (the final epoch is
    /// always evaluated).
    pub eval_every: usize,
    pub nan_policy: NanPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.8,
            epochs: 100,
            batch_size: 64,
            learning_rate: 0.001,
            shuffle_seed: 0,
            eval_every: 1,
            nan_policy: NanPolicy::Abort,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be >= 1".to_string()));
        }
        Ok(())
    }

    /// Non-fatal configuration oddities, e.g. the alpha = 1 endpoint which
    /// disables the intent gradient entirely.
    pub fn warnings(&self, mcfg: &ModelConfig) -> Vec<String> {
        let mut out = Vec::new();
        if self.alpha == 1.0 {
            if mcfg.variant == Variant::Baseline2 {
                out.push(
                    "alpha = 1 with baseline2 zeroes the whole objective; no parameter will move"
                        .to_string(),
                );
            } else {
                out.push(
                    "alpha = 1 disables the intent loss; the intent head receives no gradient"
                        .to_string(),
                );
            }
        }
        out
    }
}

/// Per-epoch training record. `wall_time_secs` is runtime-only: it is not
/// serialized, so identical runs produce identical metrics files.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss_total: f64,
    pub mean_loss_tl: f64,
    pub mean_loss_intent: f64,
    /// Fraction of training utterances predicted correctly, measured on the
    /// forward passes as they happen during the epoch.
    pub train_accuracy: f64,
    /// Present on evaluated epochs.
    pub test_accuracy: Option<f64>,
    /// Mean student-teacher cosine over the training set at epoch end;
    /// absent for baseline2.
    pub mean_student_teacher_cosine: Option<f64>,
    pub wall_time_secs: f64,
}

/// One `key=value` line per epoch; optional fields appear only when present.
pub fn format_metrics_record(m: &EpochMetrics) -> String {
    let mut line = format!(
        "epoch={} mean_loss_total={} mean_loss_tl={} mean_loss_intent={} train_accuracy={}",
        m.epoch,
        format_f64(m.mean_loss_total),
        format_f64(m.mean_loss_tl),
        format_f64(m.mean_loss_intent),
        format_f64(m.train_accuracy),
    );
    if let Some(acc) = m.test_accuracy {
        line.push_str(&format!(" test_accuracy={}", format_f64(acc)));
    }
    if let Some(cos) = m.mean_student_teacher_cosine {
        line.push_str(&format!(" mean_student_teacher_cosine={}", format_f64(cos)));
    }
    line
}

pub fn parse_metrics_record(text: &str, line: usize) -> Result<EpochMetrics> {
    let fields = Fields::parse(text, line)?;
    Ok(EpochMetrics {
        epoch: fields.get_usize("epoch")?,
        mean_loss_total: fields.get_f64("mean_loss_total")?,
        mean_loss_tl: fields.get_f64("mean_loss_tl")?,
        mean_loss_intent: fields.get_f64("mean_loss_intent")?,
        train_accuracy: fields.get_f64("train_accuracy")?,
        test_accuracy: fields
            .get_opt("test_accuracy")
            .map(|s| crate::textio::parse_f64(s, line))
            .transpose()?,
        mean_student_teacher_cosine: fields
            .get_opt("mean_student_teacher_cosine")
            .map(|s| crate::textio::parse_f64(s, line))
            .transpose()?,
        wall_time_secs: 0.0,
    })
}

fn check_dataset(ds: &Dataset, mcfg: &ModelConfig, role: &str) -> Result<()> {
    if ds.d_acoustic != mcfg.d_acoustic
        || ds.d_linguistic != mcfg.d_linguistic
        || ds.num_classes != mcfg.num_classes
    {
        return Err(Error::InvalidConfig(format!(
            "{role} dataset profile ({}, {}, {} classes) does not match model config ({}, {}, {} classes)",
            ds.d_acoustic, ds.d_linguistic, ds.num_classes,
            mcfg.d_acoustic, mcfg.d_linguistic, mcfg.num_classes
        )));
    }
    ds.validate()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    dot / (norm_a * norm_b)
}

/// Mean cosine similarity between pooled student embeddings and teacher
/// embeddings over a dataset. Zero-norm vectors contribute 0.
pub fn cosine_diagnostic(params: &ModelParams, ds: &Dataset) -> Result<f64> {
    if params.config.variant == Variant::Baseline2 {
        return Err(Error::UnsupportedVariant {
            variant: params.config.variant.to_string(),
            op: "cosine_diagnostic",
        });
    }
    if ds.is_empty() {
        return Err(Error::EmptyInput("cosine_diagnostic"));
    }
    let mut total = 0.0;
    for utt in &ds.utterances {
        let student = transfer_forward(&utt.acoustic, params)?;
        let pooled = mean_pool(&student)?;
        total += cosine(pooled.row(0), utt.teacher.row(0));
    }
    Ok(total / ds.len() as f64)
}

/// Train a fresh model, invoking `on_epoch` after every epoch (used by the
/// CLI to write metrics incrementally).
pub fn train_with_observer<F>(
    train_ds: &Dataset,
    test_ds: &Dataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(ModelParams, Vec<EpochMetrics>)>
where
    F: FnMut(&EpochMetrics) -> Result<()>,
{
    tcfg.validate()?;
    mcfg.validate()?;
    check_dataset(train_ds, mcfg, "train")?;
    check_dataset(test_ds, mcfg, "test")?;
    if train_ds.is_empty() {
        return Err(Error::EmptyInput("train"));
    }
    let train_ids: HashSet<&str> = train_ds.utterances.iter().map(|u| u.id.as_str()).collect();
    if let Some(dup) = test_ds
        .utterances
        .iter()
        .find(|u| train_ids.contains(u.id.as_str()))
    {
        return Err(Error::InvalidConfig(format!(
            "splits are not disjoint: utterance {} appears in both",
            dup.id
        )));
    }
    for warning in tcfg.warnings(mcfg) {
        eprintln!("warning: {warning}");
    }

    let mut params = init_model(mcfg)?;
    let mut adam = AdamConfig::with_learning_rate(tcfg.learning_rate);
    let mut history = Vec::with_capacity(tcfg.epochs);
    let n = train_ds.len();

    for epoch in 1..=tcfg.epochs {
        let started = Instant::now();
        let mut order_rng = SplitMix64::from_tags(tcfg.shuffle_seed, &[TAG_SHUFFLE, epoch as u64]);
        let order = permutation(&mut order_rng, n);

        let mut sum_total = 0.0;
        let mut sum_tl = 0.0;
        let mut sum_intent = 0.0;
        let mut correct = 0usize;

        for (batch_index, batch) in order.chunks(tcfg.batch_size).enumerate() {
            for &utt_index in batch {
                let utt = &train_ds.utterances[utt_index];
                let (output, losses, cache) = forward_cached(utt, &params, tcfg.alpha)?;
                if !losses.loss_total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_index + 1,
                        id: utt.id.clone(),
                    });
                }
                sum_total += losses.loss_total;
                sum_tl += losses.loss_tl;
                sum_intent += losses.loss_intent;
                if crate::model::forward::argmax(&output.logits) == utt.label {
                    correct += 1;
                }
                backward(utt, &mut params, &cache, tcfg.alpha)?;
            }
            params.scale_gradients(1.0 / batch.len() as f64);
            adam_step(params.tensors_mut(), &mut adam)?;
        }

        let evaluate_now = epoch % tcfg.eval_every == 0 || epoch == tcfg.epochs;
        let test_accuracy = if evaluate_now {
            Some(evaluate(&params, test_ds)?)
        } else {
            None
        };
        let mean_student_teacher_cosine = if mcfg.variant == Variant::Baseline2 {
            None
        } else {
            Some(cosine_diagnostic(&params, train_ds)?)
        };

        let metrics = EpochMetrics {
            epoch,
            mean_loss_total: sum_total / n as f64,
            mean_loss_tl: sum_tl / n as f64,
            mean_loss_intent: sum_intent / n as f64,
            train_accuracy: correct as f64 / n as f64,
            test_accuracy,
            mean_student_teacher_cosine,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        on_epoch(&metrics)?;
        history.push(metrics);
    }
    Ok((params, history))
}

/// Train without an observer.
pub fn train(
    train_ds: &Dataset,
    test_ds: &Dataset,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochMetrics>)> {
    train_with_observer(train_ds, test_ds, mcfg, tcfg, |_| Ok(()))
}
