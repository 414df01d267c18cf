//! Single-layer unidirectional GRU, forward and backward.
//!
//! Gate convention (row-vector layout, `x_t` is 1xD, `h_t` is 1xH):
//!
//! ```text
//! z_t = sigmoid(x_t Wz + h_{t-1} Uz + bz)        update gate
//! r_t = sigmoid(x_t Wr + h_{t-1} Ur + br)        reset gate
//! c_t = tanh(x_t Wh + (r_t * h_{t-1}) Uh + bh)   candidate
//! h_t = (1 - z_t) * h_{t-1} + z_t * c_t
//! ```
//!
//! The update gate gates the candidate. `Wz/Wr/Wh` are DxH, `Uz/Ur/Uh` are
//! HxH, biases are 1xH.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::ops::matmul;
use crate::numerics::param::ParamTensor;

/// The nine GRU tensors.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub wz: ParamTensor,
    pub uz: ParamTensor,
    pub bz: ParamTensor,
    pub wr: ParamTensor,
    pub ur: ParamTensor,
    pub br: ParamTensor,
    pub wh: ParamTensor,
    pub uh: ParamTensor,
    pub bh: ParamTensor,
}

impl GruParams {
    pub fn input_width(&self) -> usize {
        self.wz.value.rows()
    }

    pub fn hidden_width(&self) -> usize {
        self.wz.value.cols()
    }

    pub fn tensors(&self) -> [&ParamTensor; 9] {
        [
            &self.wz, &self.uz, &self.bz, &self.wr, &self.ur, &self.br, &self.wh, &self.uh,
            &self.bh,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut ParamTensor; 9] {
        [
            &mut self.wz,
            &mut self.uz,
            &mut self.bz,
            &mut self.wr,
            &mut self.ur,
            &mut self.br,
            &mut self.wh,
            &mut self.uh,
            &mut self.bh,
        ]
    }
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStep {
    pub h_prev: Matrix,
    pub update: Matrix,
    pub reset: Matrix,
    pub candidate: Matrix,
}

#[derive(Debug, Clone, Default)]
pub struct GruCache {
    pub steps: Vec<GruStep>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_shapes(seq: &Matrix, params: &GruParams, h0: &Matrix) -> Result<()> {
    let d = params.input_width();
    let h = params.hidden_width();
    if seq.cols() != d {
        return Err(Error::DimensionMismatch {
            op: "gru_forward input",
            left_rows: seq.rows(),
            left_cols: seq.cols(),
            right_rows: d,
            right_cols: h,
        });
    }
    if h0.rows() != 1 || h0.cols() != h {
        return Err(Error::DimensionMismatch {
            op: "gru_forward h0",
            left_rows: h0.rows(),
            left_cols: h0.cols(),
            right_rows: 1,
            right_cols: h,
        });
    }
    if seq.rows() == 0 {
        return Err(Error::EmptyInput("gru_forward"));
    }
    Ok(())
}

fn gate_preactivation(
    x_t: &Matrix,
    state: &Matrix,
    w: &ParamTensor,
    u: &ParamTensor,
    b: &ParamTensor,
) -> Result<Matrix> {
    let mut pre = matmul(x_t, &w.value)?;
    pre.add_assign(&matmul(state, &u.value)?)?;
    pre.add_assign(&b.value)?;
    Ok(pre)
}

/// Run the recurrence over a TxD sequence, returning the TxH hidden states
/// and the activation cache.
pub fn gru_forward_cached(
    seq: &Matrix,
    params: &GruParams,
    h0: &Matrix,
) -> Result<(Matrix, GruCache)> {
    check_shapes(seq, params, h0)?;
    let t_len = seq.rows();
    let hidden_width = params.hidden_width();
    let mut hidden = Matrix::zeros(t_len, hidden_width);
    let mut cache = GruCache {
        steps: Vec::with_capacity(t_len),
    };
    let mut h_prev = h0.clone();
    for t in 0..t_len {
        let x_t = seq.row_matrix(t);
        let update = gate_preactivation(&x_t, &h_prev, &params.wz, &params.uz, &params.bz)?
            .map(sigmoid);
        let reset = gate_preactivation(&x_t, &h_prev, &params.wr, &params.ur, &params.br)?
            .map(sigmoid);
        let gated_prev = reset.hadamard(&h_prev)?;
        let candidate = gate_preactivation(&x_t, &gated_prev, &params.wh, &params.uh, &params.bh)?
            .map(f64::tanh);
        let mut h_t = Matrix::zeros(1, hidden_width);
        for i in 0..hidden_width {
            let z = update.get(0, i);
            h_t.set(
                0,
                i,
                (1.0 - z) * h_prev.get(0, i) + z * candidate.get(0, i),
            );
        }
        hidden.row_mut(t).copy_from_slice(h_t.row(0));
        cache.steps.push(GruStep {
            h_prev: h_prev.clone(),
            update,
            reset,
            candidate,
        });
        h_prev = h_t;
    }
    Ok((hidden, cache))
}

/// Forward pass without keeping the cache.
pub fn gru_forward(seq: &Matrix, params: &GruParams, h0: &Matrix) -> Result<Matrix> {
    gru_forward_cached(seq, params, h0).map(|(hidden, _)| hidden)
}

/// Backpropagate `d_hidden` (TxH, gradient of the loss with respect to every
/// hidden state) through the recurrence. Accumulates parameter gradients and
/// returns the gradient with respect to the input sequence.
pub fn gru_backward(
    seq: &Matrix,
    params: &mut GruParams,
    cache: &GruCache,
    d_hidden: &Matrix,
) -> Result<Matrix> {
    let t_len = seq.rows();
    let hidden_width = params.hidden_width();
    if d_hidden.rows() != t_len || d_hidden.cols() != hidden_width {
        return Err(Error::DimensionMismatch {
            op: "gru_backward",
            left_rows: d_hidden.rows(),
            left_cols: d_hidden.cols(),
            right_rows: t_len,
            right_cols: hidden_width,
        });
    }
    let mut d_seq = Matrix::zeros(t_len, seq.cols());
    let mut d_h_next = Matrix::zeros(1, hidden_width);

    for t in (0..t_len).rev() {
        let step = &cache.steps[t];
        let x_t = seq.row_matrix(t);

        // Total gradient flowing into h_t.
        let mut d_h = d_hidden.row_matrix(t);
        d_h.add_assign(&d_h_next)?;

        let mut d_pre_update = Matrix::zeros(1, hidden_width);
        let mut d_pre_cand = Matrix::zeros(1, hidden_width);
        let mut d_h_prev = Matrix::zeros(1, hidden_width);
        for i in 0..hidden_width {
            let dh = d_h.get(0, i);
            let z = step.update.get(0, i);
            let c = step.candidate.get(0, i);
            let hp = step.h_prev.get(0, i);
            d_pre_update.set(0, i, dh * (c - hp) * z * (1.0 - z));
            d_pre_cand.set(0, i, dh * z * (1.0 - c * c));
            d_h_prev.set(0, i, dh * (1.0 - z));
        }

        // Candidate path: pre_cand = x Wh + (r * h_prev) Uh + bh.
        params
            .wh
            .gradient
            .add_assign(&matmul(&x_t.transpose(), &d_pre_cand)?)?;
        let gated_prev = step.reset.hadamard(&step.h_prev)?;
        params
            .uh
            .gradient
            .add_assign(&matmul(&gated_prev.transpose(), &d_pre_cand)?)?;
        params.bh.gradient.add_assign(&d_pre_cand)?;
        let d_gated_prev = matmul(&d_pre_cand, &params.uh.value.transpose())?;

        // Reset path: gated_prev = r * h_prev.
        let mut d_pre_reset = Matrix::zeros(1, hidden_width);
        for i in 0..hidden_width {
            let r = step.reset.get(0, i);
            let dg = d_gated_prev.get(0, i);
            d_pre_reset.set(0, i, dg * step.h_prev.get(0, i) * r * (1.0 - r));
            d_h_prev.set(0, i, d_h_prev.get(0, i) + dg * r);
        }
        params
            .wr
            .gradient
            .add_assign(&matmul(&x_t.transpose(), &d_pre_reset)?)?;
        params
            .ur
            .gradient
            .add_assign(&matmul(&step.h_prev.transpose(), &d_pre_reset)?)?;
        params.br.gradient.add_assign(&d_pre_reset)?;

        // Update path.
        params
            .wz
            .gradient
            .add_assign(&matmul(&x_t.transpose(), &d_pre_update)?)?;
        params
            .uz
            .gradient
            .add_assign(&matmul(&step.h_prev.transpose(), &d_pre_update)?)?;
        params.bz.gradient.add_assign(&d_pre_update)?;

        // Into the input frame.
        let mut d_x = matmul(&d_pre_update, &params.wz.value.transpose())?;
        d_x.add_assign(&matmul(&d_pre_reset, &params.wr.value.transpose())?)?;
        d_x.add_assign(&matmul(&d_pre_cand, &params.wh.value.transpose())?)?;
        d_seq.row_mut(t).copy_from_slice(d_x.row(0));

        // Into the previous hidden state.
        d_h_prev.add_assign(&matmul(&d_pre_update, &params.uz.value.transpose())?)?;
        d_h_prev.add_assign(&matmul(&d_pre_reset, &params.ur.value.transpose())?)?;
        d_h_next = d_h_prev;
    }
    Ok(d_seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalSource;

    fn zero_gru(input: usize, hidden: usize) -> GruParams {
        GruParams {
            wz: ParamTensor::from_value("gru_wz", Matrix::zeros(input, hidden)),
            uz: ParamTensor::from_value("gru_uz", Matrix::zeros(hidden, hidden)),
            bz: ParamTensor::from_value("gru_bz", Matrix::zeros(1, hidden)),
            wr: ParamTensor::from_value("gru_wr", Matrix::zeros(input, hidden)),
            ur: ParamTensor::from_value("gru_ur", Matrix::zeros(hidden, hidden)),
            br: ParamTensor::from_value("gru_br", Matrix::zeros(1, hidden)),
            wh: ParamTensor::from_value("gru_wh", Matrix::zeros(input, hidden)),
            uh: ParamTensor::from_value("gru_uh", Matrix::zeros(hidden, hidden)),
            bh: ParamTensor::from_value("gru_bh", Matrix::zeros(1, hidden)),
        }
    }

    fn random_gru(input: usize, hidden: usize, seed: u64) -> GruParams {
        let mut params = zero_gru(input, hidden);
        let mut src = NormalSource::from_tags(seed, &[99]);
        for tensor in params.tensors_mut() {
            let n = tensor.value.len();
            for i in 0..n {
                tensor.value.data_mut()[i] = 0.4 * src.next_normal();
            }
        }
        params
    }

    #[test]
    fn all_zero_weights_give_zero_outputs() {
        let params = zero_gru(3, 4);
        let seq = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.1, 0.2, 0.3]]).unwrap();
        let hidden = gru_forward(&seq, &params, &Matrix::zeros(1, 4)).unwrap();
        assert!(hidden.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_hand_computation() {
        // Zero weights, zero h0, candidate bias 1: z = r = 0.5 and
        // h1 = 0.5 * tanh(1).
        let mut params = zero_gru(2, 2);
        params.bh.value.fill(1.0);
        let seq = Matrix::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let hidden = gru_forward(&seq, &params, &Matrix::zeros(1, 2)).unwrap();
        let expected = 0.5 * 1.0_f64.tanh();
        for &v in hidden.data() {
            assert!((v - expected).abs() < 1e-15, "{v} vs {expected}");
        }
    }

    #[test]
    fn matches_independent_step_oracle() {
        let params = random_gru(3, 4, 17);
        let mut src = NormalSource::from_tags(5, &[1]);
        let seq = {
            let mut m = Matrix::zeros(3, 3);
            for i in 0..m.len() {
                m.data_mut()[i] = src.next_normal();
            }
            m
        };
        let hidden = gru_forward(&seq, &params, &Matrix::zeros(1, 4)).unwrap();

        // Plain-loop re-evaluation of the three gate equations.
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut h = vec![0.0f64; 4];
        for t in 0..3 {
            let x = seq.row(t);
            let mut h_new = vec![0.0f64; 4];
            for j in 0..4 {
                let mut az = params.bz.value.get(0, j);
                let mut ar = params.br.value.get(0, j);
                for (i, &xi) in x.iter().enumerate() {
                    az += xi * params.wz.value.get(i, j);
                    ar += xi * params.wr.value.get(i, j);
                }
                for (i, &hi) in h.iter().enumerate() {
                    az += hi * params.uz.value.get(i, j);
                    ar += hi * params.ur.value.get(i, j);
                }
                let z = sig(az);
                let r = sig(ar);
                let mut ah = params.bh.value.get(0, j);
                for (i, &xi) in x.iter().enumerate() {
                    ah += xi * params.wh.value.get(i, j);
                }
                for (i, &hi) in h.iter().enumerate() {
                    // r is per output unit; the gate applies to h_prev before
                    // the Uh product, so recompute r_i for unit i.
                    let mut ar_i = params.br.value.get(0, i);
                    for (k, &xk) in x.iter().enumerate() {
                        ar_i += xk * params.wr.value.get(k, i);
                    }
                    for (k, &hk) in h.iter().enumerate() {
                        ar_i += hk * params.ur.value.get(k, i);
                    }
                    ah += sig(ar_i) * hi * params.uh.value.get(i, j);
                }
                let c = ah.tanh();
                h_new[j] = (1.0 - z) * h[j] + z * c;
                let _ = r;
            }
            for j in 0..4 {
                assert!(
                    (hidden.get(t, j) - h_new[j]).abs() < 1e-12,
                    "t={t} j={j}: {} vs {}",
                    hidden.get(t, j),
                    h_new[j]
                );
            }
            h = h_new;
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let params = random_gru(3, 4, 23);
        let mut src = NormalSource::from_tags(29, &[2]);
        let mut seq = Matrix::zeros(4, 3);
        for i in 0..seq.len() {
            seq.data_mut()[i] = src.next_normal();
        }
        // Scalar head: weighted sum of all hidden states.
        let mut coef = Matrix::zeros(4, 4);
        for i in 0..coef.len() {
            coef.data_mut()[i] = src.next_normal();
        }
        let loss = |p: &GruParams, s: &Matrix| -> f64 {
            let hidden = gru_forward(s, p, &Matrix::zeros(1, 4)).unwrap();
            hidden
                .data()
                .iter()
                .zip(coef.data())
                .map(|(h, w)| h * w)
                .sum()
        };

        let mut work = params.clone();
        let (_, cache) = gru_forward_cached(&seq, &work, &Matrix::zeros(1, 4)).unwrap();
        let d_seq = gru_backward(&seq, &mut work, &cache, &coef).unwrap();

        let eps = 1e-5;
        // Parameter gradients.
        for (ti, tensor) in work.tensors().iter().enumerate() {
            for i in 0..tensor.value.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].value.data_mut()[i] += eps;
                let mut minus = params.clone();
                minus.tensors_mut()[ti].value.data_mut()[i] -= eps;
                let numeric = (loss(&plus, &seq) - loss(&minus, &seq)) / (2.0 * eps);
                let analytic = tensor.gradient.data()[i];
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-6,
                    "{} [{}]: {analytic} vs {numeric}",
                    tensor.name,
                    i
                );
            }
        }
        // Input gradients.
        for i in 0..seq.len() {
            let mut plus = seq.clone();
            plus.data_mut()[i] += eps;
            let mut minus = seq.clone();
            minus.data_mut()[i] -= eps;
            let numeric = (loss(&params, &plus) - loss(&params, &minus)) / (2.0 * eps);
            let analytic = d_seq.data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-6,
                "input [{i}]: {analytic} vs {numeric}"
            );
        }
    }
}
