//! Explicit backward pass: pushes the gradient of the weighted objective
//! through the head, the attention block, and the student layer, accumulating
//! into each tensor's `gradient`.
//!
//! Acoustic frames are inputs, not parameters, so gradients that reach them
//! are dropped.

use crate::dataio::Utterance;
use crate::error::Result;
use crate::model::forward::ForwardCache;
use crate::model::{LinearLayer, ModelParams, Variant};
use crate::numerics::gru::gru_backward;
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::{
    cross_entropy_backward, linear_backward, matmul, max_pool_backward, mean_pool_backward,
    mse_backward_wrt_b, softmax_rows_backward,
};

impl LinearLayer {
    pub(crate) fn backward(&mut self, x: &Matrix, d_y: &Matrix) -> Result<Matrix> {
        linear_backward(x, &mut self.weight, &mut self.bias, d_y)
    }
}

fn attention_backward(
    utt: &Utterance,
    params: &mut ModelParams,
    cache: &ForwardCache,
    d_fused: &Matrix,
) -> Result<Matrix> {
    let attn = cache.attention.as_ref().expect("attention cache");
    let d_weights = matmul(d_fused, &attn.values.transpose())?;
    let d_values = matmul(&attn.weights.transpose(), d_fused)?;
    let scale = 1.0 / (params.config.d_attn as f64).sqrt();
    let d_scores = softmax_rows_backward(&attn.weights, &d_weights)?.scale(scale);
    let d_queries = matmul(&d_scores, &attn.keys)?;
    let d_keys = matmul(&d_scores.transpose(), &attn.queries)?;

    let d_query_input = params
        .attn_query
        .as_mut()
        .expect("attn_query")
        .backward(&attn.query_input, &d_queries)?;
    let mut d_kv_input = params
        .attn_key
        .as_mut()
        .expect("attn_key")
        .backward(&attn.kv_input, &d_keys)?;
    d_kv_input.add_assign(
        &params
            .attn_value
            .as_mut()
            .expect("attn_value")
            .backward(&attn.kv_input, &d_values)?,
    )?;

    if let Some(map) = params.acoustic_mapping.as_mut() {
        // The query stream bottoms out at the acoustic input.
        let _ = map.backward(&utt.acoustic, &d_query_input)?;
    }

    match params.mapping.as_mut() {
        Some(map) => {
            let student = cache.student_seq.as_ref().expect("student sequence");
            map.backward(student, &d_kv_input)
        }
        None => Ok(d_kv_input),
    }
}

/// Accumulate the gradients of `loss_total` for one utterance into `params`.
/// Requires the cache produced by the matching forward pass.
pub(crate) fn backward(
    utt: &Utterance,
    params: &mut ModelParams,
    cache: &ForwardCache,
    alpha: f64,
) -> Result<()> {
    // Intent branch: d loss_total / d logits = (1 - alpha) * (softmax - onehot).
    let d_logits = cross_entropy_backward(&cache.logits, utt.label)?.scale(1.0 - alpha);
    let d_pooled_hidden = params.head.backward(&cache.pooled_hidden, &d_logits)?;
    let d_hidden = max_pool_backward(cache.hidden.rows(), &cache.pool_argmax, &d_pooled_hidden);
    let d_gru_input = gru_backward(&cache.gru_input, &mut params.gru, &cache.gru_cache, &d_hidden)?;

    if params.config.variant == Variant::Baseline2 {
        return Ok(());
    }

    // Gradient reaching the student sequence from the intent branch.
    let mut d_student = match params.config.variant {
        Variant::AlnLinguistic => d_gru_input,
        Variant::Aln => attention_backward(utt, params, cache, &d_gru_input)?,
        Variant::Baseline2 => unreachable!(),
    };

    // Distillation branch: d loss_total / d pooled = alpha * 2 (pooled - teacher) / d_l.
    let pooled = cache.student_pooled.as_ref().expect("student pooled");
    let d_pooled = mse_backward_wrt_b(&utt.teacher, pooled)?.scale(alpha);
    d_student.add_assign(&mean_pool_backward(d_student.rows(), &d_pooled))?;

    let _ = params
        .transfer
        .as_mut()
        .expect("transfer layer")
        .backward(&utt.acoustic, &d_student)?;
    Ok(())
}
