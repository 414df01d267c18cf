//! Forward passes for all three variants.

use crate::dataio::Utterance;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Variant};
use crate::numerics::gru::{gru_forward_cached, GruCache};
use crate::numerics::ops::{cross_entropy, matmul, max_pool, mean_pool, mse, softmax_rows};
use crate::numerics::Matrix;

/// Everything a forward pass exposes for inspection.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// 1 x K class scores.
    pub logits: Matrix,
    /// Pooled student embedding (1 x d_linguistic); absent for baseline2.
    pub student_pooled: Option<Matrix>,
    /// Fused sequence (T x d_attn); aln only.
    pub fused: Option<Matrix>,
    /// Row-stochastic T x T attention weights; aln only.
    pub attention_weights: Option<Matrix>,
}

/// The two loss terms and their weighted combination.
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub loss_tl: f64,
    pub loss_intent: f64,
    pub loss_total: f64,
    pub alpha: f64,
}

impl LossBreakdown {
    /// The weighted objective: `alpha * loss_tl + (1 - alpha) * loss_intent`,
    /// computed exactly as written.
    pub fn combine(loss_tl: f64, loss_intent: f64, alpha: f64) -> LossBreakdown {
        LossBreakdown {
            loss_tl,
            loss_intent,
            loss_total: alpha * loss_tl + (1.0 - alpha) * loss_intent,
            alpha,
        }
    }
}

/// Attention intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttentionCache {
    /// Query-side input to f_q (acoustic frames, mapped if widths differ).
    pub query_input: Matrix,
    /// Key/value-side input to f_k and f_v (student frames, mapped likewise).
    pub kv_input: Matrix,
    pub queries: Matrix,
    pub keys: Matrix,
    pub values: Matrix,
    pub weights: Matrix,
}

/// All intermediates of one utterance's forward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub student_seq: Option<Matrix>,
    pub student_pooled: Option<Matrix>,
    pub attention: Option<AttentionCache>,
    /// The sequence the intent head consumed.
    pub gru_input: Matrix,
    pub gru_cache: GruCache,
    pub hidden: Matrix,
    pub pool_argmax: Vec<usize>,
    pub pooled_hidden: Matrix,
    pub logits: Matrix,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Per-frame student layer: acoustic frames to derived linguistic frames.
/// Frame count is preserved.
pub fn transfer_forward(acoustic: &Matrix, params: &ModelParams) -> Result<Matrix> {
    let transfer = params.transfer.as_ref().ok_or(Error::UnsupportedVariant {
        variant: params.config.variant.to_string(),
        op: "transfer_forward",
    })?;
    transfer.forward(acoustic)
}

/// Pool the student sequence over frames and score it against the teacher.
/// Returns `(loss_tl, student_pooled)`.
pub fn compute_loss_tl(student_seq: &Matrix, teacher: &Matrix) -> Result<(f64, Matrix)> {
    if student_seq.cols() != teacher.cols() {
        return Err(Error::DimensionMismatch {
            op: "compute_loss_tl",
            left_rows: student_seq.rows(),
            left_cols: student_seq.cols(),
            right_rows: teacher.rows(),
            right_cols: teacher.cols(),
        });
    }
    let pooled = mean_pool(student_seq)?;
    let loss = mse(teacher, &pooled)?;
    Ok((loss, pooled))
}

fn attention_inputs(
    acoustic: &Matrix,
    student_seq: &Matrix,
    params: &ModelParams,
) -> Result<(Matrix, Matrix)> {
    let query_input = match &params.acoustic_mapping {
        Some(map) => map.forward(acoustic)?,
        None => acoustic.clone(),
    };
    let kv_input = match &params.mapping {
        Some(map) => map.forward(student_seq)?,
        None => student_seq.clone(),
    };
    Ok((query_input, kv_input))
}

pub(crate) fn cross_attention_cached(
    acoustic: &Matrix,
    student_seq: &Matrix,
    params: &ModelParams,
) -> Result<(Matrix, AttentionCache)> {
    if params.config.variant != Variant::Aln {
        return Err(Error::UnsupportedVariant {
            variant: params.config.variant.to_string(),
            op: "cross_attention",
        });
    }
    if acoustic.rows() != student_seq.rows() {
        return Err(Error::Alignment {
            acoustic: acoustic.rows(),
            linguistic: student_seq.rows(),
        });
    }
    let (query_input, kv_input) = attention_inputs(acoustic, student_seq, params)?;
    let queries = params.attn_query.as_ref().unwrap().forward(&query_input)?;
    let keys = params.attn_key.as_ref().unwrap().forward(&kv_input)?;
    let values = params.attn_value.as_ref().unwrap().forward(&kv_input)?;
    let scale = 1.0 / (params.config.d_attn as f64).sqrt();
    let scores = matmul(&queries, &keys.transpose())?.scale(scale);
    let weights = softmax_rows(&scores)?;
    let fused = matmul(&weights, &values)?;
    Ok((
        fused,
        AttentionCache {
            query_input,
            kv_input,
            queries,
            keys,
            values,
            weights,
        },
    ))
}

/// Single-head scaled dot-product cross attention: acoustic frames query the
/// derived linguistic frames. Returns `(fused, attention_weights)`.
pub fn cross_attention(
    acoustic: &Matrix,
    student_seq: &Matrix,
    params: &ModelParams,
) -> Result<(Matrix, Matrix)> {
    let (fused, cache) = cross_attention_cached(acoustic, student_seq, params)?;
    Ok((fused, cache.weights))
}

struct HeadCache {
    gru_cache: GruCache,
    hidden: Matrix,
    pool_argmax: Vec<usize>,
    pooled_hidden: Matrix,
    logits: Matrix,
}

fn intent_head_cached(seq: &Matrix, params: &ModelParams) -> Result<HeadCache> {
    let h0 = Matrix::zeros(1, params.config.gru_hidden);
    let (hidden, gru_cache) = gru_forward_cached(seq, &params.gru, &h0)?;
    let (pooled_hidden, pool_argmax) = max_pool(&hidden)?;
    let logits = params.head.forward(&pooled_hidden)?;
    Ok(HeadCache {
        gru_cache,
        hidden,
        pool_argmax,
        pooled_hidden,
        logits,
    })
}

/// Recurrent intent head: GRU over the sequence, max-pool over time, linear
/// map to class logits.
pub fn intent_head(seq: &Matrix, params: &ModelParams) -> Result<Matrix> {
    intent_head_cached(seq, params).map(|cache| cache.logits)
}

fn check_utterance(utt: &Utterance, params: &ModelParams) -> Result<()> {
    let cfg = &params.config;
    if utt.acoustic.cols() != cfg.d_acoustic {
        return Err(Error::DimensionMismatch {
            op: "forward acoustic width",
            left_rows: utt.acoustic.rows(),
            left_cols: utt.acoustic.cols(),
            right_rows: utt.acoustic.rows(),
            right_cols: cfg.d_acoustic,
        });
    }
    if cfg.variant != Variant::Baseline2 && utt.teacher.cols() != cfg.d_linguistic {
        return Err(Error::DimensionMismatch {
            op: "forward teacher width",
            left_rows: 1,
            left_cols: utt.teacher.cols(),
            right_rows: 1,
            right_cols: cfg.d_linguistic,
        });
    }
    Ok(())
}

pub(crate) fn forward_cached(
    utt: &Utterance,
    params: &ModelParams,
    alpha: f64,
) -> Result<(ForwardOutput, LossBreakdown, ForwardCache)> {
    check_alpha(alpha)?;
    check_utterance(utt, params)?;

    let (student_seq, student_pooled, loss_tl, attention, gru_input) = match params.config.variant
    {
        Variant::Baseline2 => (None, None, 0.0, None, utt.acoustic.clone()),
        Variant::AlnLinguistic => {
            let student = transfer_forward(&utt.acoustic, params)?;
            let (loss_tl, pooled) = compute_loss_tl(&student, &utt.teacher)?;
            (Some(student.clone()), Some(pooled), loss_tl, None, student)
        }
        Variant::Aln => {
            let student = transfer_forward(&utt.acoustic, params)?;
            let (loss_tl, pooled) = compute_loss_tl(&student, &utt.teacher)?;
            let (fused, attn) = cross_attention_cached(&utt.acoustic, &student, params)?;
            (Some(student), Some(pooled), loss_tl, Some(attn), fused)
        }
    };

    let head = intent_head_cached(&gru_input, params)?;
    let loss_intent = cross_entropy(&head.logits, utt.label)?;
    let losses = LossBreakdown::combine(loss_tl, loss_intent, alpha);

    let output = ForwardOutput {
        logits: head.logits.clone(),
        student_pooled: student_pooled.clone(),
        fused: attention.as_ref().map(|_| gru_input.clone()),
        attention_weights: attention.as_ref().map(|a| a.weights.clone()),
    };
    let cache = ForwardCache {
        student_seq,
        student_pooled,
        attention,
        gru_input,
        gru_cache: head.gru_cache,
        hidden: head.hidden,
        pool_argmax: head.pool_argmax,
        pooled_hidden: head.pooled_hidden,
        logits: head.logits,
    };
    Ok((output, losses, cache))
}

/// Full forward pass for one utterance.
pub fn forward(
    utt: &Utterance,
    params: &ModelParams,
    alpha: f64,
) -> Result<(ForwardOutput, LossBreakdown)> {
    forward_cached(utt, params, alpha).map(|(out, losses, _)| (out, losses))
}

/// Predicted class: argmax over logits, ties broken toward the lowest index.
/// Ignores the utterance label and (for baseline2) the teacher embedding.
pub fn predict(utt: &Utterance, params: &ModelParams) -> Result<usize> {
    check_utterance(utt, params)?;
    let logits = match params.config.variant {
        Variant::Baseline2 => intent_head(&utt.acoustic, params)?,
        Variant::AlnLinguistic => {
            let student = transfer_forward(&utt.acoustic, params)?;
            intent_head(&student, params)?
        }
        Variant::Aln => {
            let student = transfer_forward(&utt.acoustic, params)?;
            let (fused, _) = cross_attention_cached(&utt.acoustic, &student, params)?;
            intent_head(&fused, params)?
        }
    };
    Ok(argmax(&logits))
}

/// First index of the maximum value in a 1 x K row.
pub fn argmax(logits: &Matrix) -> usize {
    let row = logits.row(0);
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Utterance;
    use crate::model::{init_model, ModelConfig};
    use crate::rng::NormalSource;

    fn tiny_config(variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            d_acoustic: 4,
            d_linguistic: 6,
            d_attn: 4,
            gru_hidden: 5,
            num_classes: 3,
            init_seed: 7,
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut src = NormalSource::from_tags(seed, &[0xF00D]);
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = src.next_normal();
        }
        m
    }

    fn random_utterance(frames: usize, cfg: &ModelConfig, seed: u64) -> Utterance {
        Utterance {
            id: format!("test-{seed}"),
            acoustic: random_matrix(frames, cfg.d_acoustic, seed),
            teacher: random_matrix(1, cfg.d_linguistic, seed ^ 0xABCD),
            label: (seed as usize) % cfg.num_classes,
        }
    }

    #[test]
    fn transfer_identity_extension_copies_frame() {
        let cfg = tiny_config(Variant::AlnLinguistic);
        let mut params = init_model(&cfg).unwrap();
        {
            let transfer = params.transfer.as_mut().unwrap();
            transfer.weight.value.fill(0.0);
            for i in 0..cfg.d_acoustic {
                transfer.weight.value.set(i, i, 1.0);
            }
            transfer.bias.value.fill(0.0);
        }
        let acoustic = Matrix::from_rows(&[vec![1.0, -2.0, 0.5, 3.0]]).unwrap();
        let student = transfer_forward(&acoustic, &params).unwrap();
        assert_eq!(&student.row(0)[..4], acoustic.row(0));
        assert_eq!(&student.row(0)[4..], &[0.0, 0.0]);
    }

    #[test]
    fn transfer_preserves_frame_count() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        for frames in [1usize, 5, 40] {
            let acoustic = random_matrix(frames, cfg.d_acoustic, frames as u64);
            let student = transfer_forward(&acoustic, &params).unwrap();
            assert_eq!(student.rows(), frames);
            assert_eq!(student.cols(), cfg.d_linguistic);
        }
    }

    #[test]
    fn transfer_matches_per_frame_matmul_oracle() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let acoustic = random_matrix(3, cfg.d_acoustic, 77);
        let student = transfer_forward(&acoustic, &params).unwrap();
        let transfer = params.transfer.as_ref().unwrap();
        for t in 0..3 {
            for j in 0..cfg.d_linguistic {
                let mut expected = transfer.bias.value.get(0, j);
                for i in 0..cfg.d_acoustic {
                    expected += acoustic.get(t, i) * transfer.weight.value.get(i, j);
                }
                assert!((student.get(t, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transfer_rejects_baseline2() {
        let params = init_model(&tiny_config(Variant::Baseline2)).unwrap();
        let err = transfer_forward(&Matrix::zeros(2, 4), &params).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVariant { .. }));
    }

    #[test]
    fn loss_tl_examples() {
        let teacher = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        // Frames all equal to teacher -> zero loss.
        let student = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let (loss, pooled) = compute_loss_tl(&student, &teacher).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(pooled.data(), &[1.0, 1.0]);
        // Frames [0,2] and [2,0] pool to [1,1] -> zero loss.
        let student = Matrix::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let (loss, pooled) = compute_loss_tl(&student, &teacher).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(pooled.data(), &[1.0, 1.0]);
        // Pooled [2,2] against teacher [0,0] -> loss 4.
        let teacher = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let student = Matrix::from_rows(&[vec![2.0, 2.0]]).unwrap();
        let (loss, _) = compute_loss_tl(&student, &teacher).unwrap();
        assert_eq!(loss, 4.0);
    }

    #[test]
    fn attention_single_frame_collapses_to_value() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let acoustic = random_matrix(1, cfg.d_acoustic, 5);
        let student = transfer_forward(&acoustic, &params).unwrap();
        let (fused, weights) = cross_attention(&acoustic, &student, &params).unwrap();
        assert_eq!(weights.shape(), (1, 1));
        assert_eq!(weights.get(0, 0), 1.0);
        // Softmax over one key is exactly 1, so fused == f_v(mapped frame).
        let mapped = params.mapping.as_ref().unwrap().forward(&student).unwrap();
        let value = params.attn_value.as_ref().unwrap().forward(&mapped).unwrap();
        assert_eq!(fused, value);
    }

    #[test]
    fn attention_identical_keys_give_uniform_rows() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let acoustic = random_matrix(4, cfg.d_acoustic, 9);
        // All student frames identical -> identical keys -> uniform weights.
        let one = random_matrix(1, cfg.d_linguistic, 31);
        let mut student = Matrix::zeros(4, cfg.d_linguistic);
        for t in 0..4 {
            student.row_mut(t).copy_from_slice(one.row(0));
        }
        let (_, weights) = cross_attention(&acoustic, &student, &params).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert!((weights.get(r, c) - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_matches_brute_force_oracle() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let acoustic = random_matrix(3, cfg.d_acoustic, 41);
        let student = transfer_forward(&acoustic, &params).unwrap();
        let (fused, weights) = cross_attention(&acoustic, &student, &params).unwrap();

        // Brute force: plain loops over query/key pairs, exp-normalized sums.
        let affine = |layer: &crate::model::LinearLayer, x: &[f64]| -> Vec<f64> {
            let (rows, cols) = layer.weight.value.shape();
            (0..cols)
                .map(|j| {
                    let mut acc = layer.bias.value.get(0, j);
                    for i in 0..rows {
                        acc += x[i] * layer.weight.value.get(i, j);
                    }
                    acc
                })
                .collect()
        };
        let mapping = params.mapping.as_ref().unwrap();
        let mapped: Vec<Vec<f64>> = (0..3).map(|t| affine(mapping, student.row(t))).collect();
        let queries: Vec<Vec<f64>> = (0..3)
            .map(|t| affine(params.attn_query.as_ref().unwrap(), acoustic.row(t)))
            .collect();
        let keys: Vec<Vec<f64>> = mapped
            .iter()
            .map(|m| affine(params.attn_key.as_ref().unwrap(), m))
            .collect();
        let values: Vec<Vec<f64>> = mapped
            .iter()
            .map(|m| affine(params.attn_value.as_ref().unwrap(), m))
            .collect();
        let scale = 1.0 / (cfg.d_attn as f64).sqrt();
        for i in 0..3 {
            let scores: Vec<f64> = (0..3)
                .map(|j| {
                    queries[i]
                        .iter()
                        .zip(&keys[j])
                        .map(|(q, k)| q * k)
                        .sum::<f64>()
                        * scale
                })
                .collect();
            let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for j in 0..3 {
                assert!(
                    (weights.get(i, j) - exps[j] / denom).abs() < 1e-10,
                    "weight ({i},{j})"
                );
            }
            for c in 0..cfg.d_attn {
                let expected: f64 = (0..3).map(|j| exps[j] / denom * values[j][c]).sum();
                assert!((fused.get(i, c) - expected).abs() < 1e-10, "fused ({i},{c})");
            }
        }
    }

    #[test]
    fn attention_rejects_misaligned_sequences() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let acoustic = random_matrix(3, cfg.d_acoustic, 1);
        let student = random_matrix(2, cfg.d_linguistic, 2);
        let err = cross_attention(&acoustic, &student, &params).unwrap_err();
        assert!(matches!(
            err,
            Error::Alignment {
                acoustic: 3,
                linguistic: 2
            }
        ));
    }

    #[test]
    fn intent_head_zero_weights_give_zero_logits() {
        let cfg = tiny_config(Variant::Baseline2);
        let mut params = init_model(&cfg).unwrap();
        for tensor in params.tensors_mut() {
            tensor.value.fill(0.0);
        }
        let logits = intent_head(&random_matrix(4, 4, 3), &params).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intent_head_single_frame_pools_identically() {
        let cfg = tiny_config(Variant::Baseline2);
        let params = init_model(&cfg).unwrap();
        let seq = random_matrix(1, 4, 8);
        let h0 = Matrix::zeros(1, cfg.gru_hidden);
        let hidden = crate::numerics::gru::gru_forward(&seq, &params.gru, &h0).unwrap();
        let logits = intent_head(&seq, &params).unwrap();
        // With one frame, max pooling passes the single hidden state through.
        let expected = params.head.forward(&hidden).unwrap();
        assert_eq!(logits, expected);
    }

    #[test]
    fn intent_head_matches_composition_oracle() {
        let cfg = tiny_config(Variant::Baseline2);
        let params = init_model(&cfg).unwrap();
        let seq = random_matrix(5, 4, 12);
        let h0 = Matrix::zeros(1, cfg.gru_hidden);
        let hidden = crate::numerics::gru::gru_forward(&seq, &params.gru, &h0).unwrap();
        let (pooled, _) = crate::numerics::ops::max_pool(&hidden).unwrap();
        let expected = params.head.forward(&pooled).unwrap();
        let logits = intent_head(&seq, &params).unwrap();
        assert!(logits.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn loss_combination_endpoints() {
        let combined = LossBreakdown::combine(0.5, 1.0, 0.8);
        assert!((combined.loss_total - 0.6).abs() < 1e-15);

        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let utt = random_utterance(3, &cfg, 2);
        let (_, at_one) = forward(&utt, &params, 1.0).unwrap();
        assert_eq!(at_one.loss_total, at_one.loss_tl);
        let (_, at_zero) = forward(&utt, &params, 0.0).unwrap();
        assert_eq!(at_zero.loss_total, at_zero.loss_intent);
    }

    #[test]
    fn baseline2_loss_is_intent_only() {
        let cfg = tiny_config(Variant::Baseline2);
        let params = init_model(&cfg).unwrap();
        let utt = random_utterance(3, &cfg, 4);
        let (out, losses) = forward(&utt, &params, 0.8).unwrap();
        assert_eq!(losses.loss_tl, 0.0);
        assert_eq!(losses.loss_total, (1.0 - 0.8) * losses.loss_intent);
        assert!(out.student_pooled.is_none());
        assert!(out.fused.is_none());
        assert!(out.attention_weights.is_none());
    }

    #[test]
    fn baseline2_ignores_teacher_bitwise() {
        let cfg = tiny_config(Variant::Baseline2);
        let params = init_model(&cfg).unwrap();
        let mut utt = random_utterance(4, &cfg, 6);
        let (out_a, losses_a) = forward(&utt, &params, 0.5).unwrap();
        utt.teacher = random_matrix(1, cfg.d_linguistic, 999);
        let (out_b, losses_b) = forward(&utt, &params, 0.5).unwrap();
        assert_eq!(out_a.logits, out_b.logits);
        assert_eq!(losses_a.loss_total.to_bits(), losses_b.loss_total.to_bits());
    }

    #[test]
    fn forward_invariants_hold() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        for frames in [1usize, 2, 7] {
            let utt = random_utterance(frames, &cfg, frames as u64 + 10);
            let (out, losses) = forward(&utt, &params, 0.8).unwrap();
            let weights = out.attention_weights.unwrap();
            assert_eq!(weights.shape(), (frames, frames));
            for r in 0..frames {
                let sum: f64 = weights.row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                assert!(weights.row(r).iter().all(|&w| w >= 0.0));
            }
            assert_eq!(out.fused.unwrap().rows(), frames);
            assert!(losses.loss_total >= 0.0 && losses.loss_total.is_finite());
        }
    }

    #[test]
    fn predict_argmax_and_tie_break() {
        assert_eq!(argmax(&Matrix::from_rows(&[vec![0.1, 2.0, -1.0]]).unwrap()), 1);
        assert_eq!(argmax(&Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap()), 0);
        // Shift invariance.
        let logits = Matrix::from_rows(&[vec![0.3, -0.2, 0.9]]).unwrap();
        let shifted = logits.map(|v| v + 17.5);
        assert_eq!(argmax(&logits), argmax(&shifted));
    }

    #[test]
    fn full_scale_profile_forward_backward() {
        // The 256/768 profile is first-class, not just the small one.
        let cfg = ModelConfig {
            variant: Variant::Aln,
            d_acoustic: 256,
            d_linguistic: 768,
            d_attn: 256,
            gru_hidden: 128,
            num_classes: 15,
            init_seed: 1,
        };
        let params = init_model(&cfg).unwrap();
        assert!(params.acoustic_mapping.is_none(), "d_attn == d_acoustic");
        assert_eq!(
            params.mapping.as_ref().unwrap().weight.value.shape(),
            (768, 256)
        );
        let utt = random_utterance(6, &cfg, 3);
        let (out, losses) = forward(&utt, &params, 0.8).unwrap();
        assert!(losses.loss_total.is_finite() && losses.loss_total > 0.0);
        assert_eq!(out.fused.unwrap().shape(), (6, 256));
        assert_eq!(out.logits.cols(), 15);
        let grads = crate::numerics::gradcheck::batch_gradients(
            &params,
            std::slice::from_ref(&utt),
            0.8,
        )
        .unwrap();
        assert!(grads
            .iter()
            .all(|(_, g)| g.data().iter().all(|v| v.is_finite())));
    }

    #[test]
    fn alpha_outside_unit_interval_rejected() {
        let cfg = tiny_config(Variant::Aln);
        let params = init_model(&cfg).unwrap();
        let utt = random_utterance(2, &cfg, 1);
        assert!(forward(&utt, &params, 1.5).is_err());
        assert!(forward(&utt, &params, -0.1).is_err());
    }
}
