//! Finite-difference verification of the analytic backward pass.
//!
//! The batch objective is the mean over utterances of `loss_total`. For each
//! parameter element (or a deterministic stride sample for large tensors) the
//! central difference `(f(x + eps) - f(x - eps)) / 2 eps` is compared against
//! the accumulated analytic gradient. Relative error is
//! `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.

use crate::dataio::Utterance;
use crate::error::{Error, Result};
use crate::model::backward::backward;
use crate::model::forward::forward_cached;
use crate::model::ModelParams;
use crate::numerics::Matrix;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Elements checked per tensor; tensors at or under this size are checked
    /// exhaustively, larger ones by a deterministic stride sample. Zero means
    /// check nothing (an empty report).
    pub max_elements_per_tensor: usize,
    /// Pass threshold on the per-tensor max relative error.
    pub tolerance: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-4,
            max_elements_per_tensor: 200,
            tolerance: 1e-3,
        }
    }
}

/// Verification outcome for one tensor.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub worst_element: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub elements_checked: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checks: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.max_relative_error < self.tolerance)
    }

    pub fn max_relative_error(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_relative_error)
            .fold(0.0, f64::max)
    }
}

/// Mean `loss_total` over a batch.
pub fn batch_loss(params: &ModelParams, batch: &[Utterance], alpha: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch_loss"));
    }
    let mut total = 0.0;
    for utt in batch {
        let (_, losses, _) = forward_cached(utt, params, alpha)?;
        total += losses.loss_total;
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradients of the batch objective, returned as (name, gradient)
/// pairs in canonical tensor order. Leaves `params` untouched.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[Utterance],
    alpha: f64,
) -> Result<Vec<(String, Matrix)>> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch_gradients"));
    }
    let mut work = params.clone();
    work.zero_gradients();
    for utt in batch {
        let (_, _, cache) = forward_cached(utt, &work, alpha)?;
        backward(utt, &mut work, &cache, alpha)?;
    }
    work.scale_gradients(1.0 / batch.len() as f64);
    Ok(work
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.gradient.clone()))
        .collect())
}

fn sample_indices(len: usize, cap: usize) -> Vec<usize> {
    if cap == 0 {
        return Vec::new();
    }
    if len <= cap {
        (0..len).collect()
    } else {
        (0..cap).map(|i| i * len / cap).collect()
    }
}

/// Compare a set of analytic gradients against finite differences of the
/// batch objective. Split out from [`gradcheck`] so a deliberately corrupted
/// gradient can be fed through the identical comparison path.
pub fn compare_gradients(
    analytic: &[(String, Matrix)],
    params: &ModelParams,
    batch: &[Utterance],
    alpha: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("compare_gradients"));
    }
    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(analytic.len());
    for (tensor_index, (name, gradient)) in analytic.iter().enumerate() {
        let indices = sample_indices(gradient.len(), opts.max_elements_per_tensor);
        if indices.is_empty() {
            continue;
        }
        let mut worst = ParamCheck {
            name: name.clone(),
            max_relative_error: 0.0,
            worst_element: 0,
            analytic_at_worst: 0.0,
            numeric_at_worst: 0.0,
            elements_checked: indices.len(),
        };
        for &i in &indices {
            let original = probe.tensors()[tensor_index].value.data()[i];
            probe.tensors_mut()[tensor_index].value.data_mut()[i] = original + opts.epsilon;
            let loss_plus = batch_loss(&probe, batch, alpha)?;
            probe.tensors_mut()[tensor_index].value.data_mut()[i] = original - opts.epsilon;
            let loss_minus = batch_loss(&probe, batch, alpha)?;
            probe.tensors_mut()[tensor_index].value.data_mut()[i] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * opts.epsilon);
            let analytic_value = gradient.data()[i];
            let denom = analytic_value.abs().max(numeric.abs()).max(1e-8);
            let relative = (analytic_value - numeric).abs() / denom;
            if relative > worst.max_relative_error {
                worst.max_relative_error = relative;
                worst.worst_element = i;
                worst.analytic_at_worst = analytic_value;
                worst.numeric_at_worst = numeric;
            }
        }
        checks.push(worst);
    }
    Ok(GradCheckReport {
        checks,
        tolerance: opts.tolerance,
    })
}

/// Run the full check: compute analytic gradients with the backward pass,
/// then verify them element by element against central differences.
pub fn gradcheck(
    params: &ModelParams,
    batch: &[Utterance],
    alpha: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let analytic = batch_gradients(params, batch, alpha)?;
    compare_gradients(&analytic, params, batch, alpha, opts)
}
