//! Layer primitives: forward rules and their explicit backward counterparts.
//!
//! The model graph is static, so every primitive ships a hand-written
//! backward function instead of going through a tape. Each backward takes the
//! forward inputs/outputs it needs plus the gradient flowing in from above,
//! and returns (or accumulates) the gradients flowing down.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::param::ParamTensor;

/// Standard matrix product. Requires `a.cols == b.rows`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        let a_row = a.row(i);
        let out_row = out.row_mut(i);
        for (p, &a_ip) in a_row.iter().enumerate().take(k) {
            let b_row = b.row(p);
            for j in 0..n {
                out_row[j] += a_ip * b_row[j];
            }
        }
    }
    Ok(out)
}

/// Gradients of `c = matmul(a, b)` given `d_c`: returns `(d_a, d_b)`.
pub fn matmul_backward(a: &Matrix, b: &Matrix, d_c: &Matrix) -> Result<(Matrix, Matrix)> {
    let d_a = matmul(d_c, &b.transpose())?;
    let d_b = matmul(&a.transpose(), d_c)?;
    Ok((d_a, d_b))
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(m: &Matrix) -> Result<Matrix> {
    if m.is_empty() {
        return Err(Error::EmptyInput("softmax_rows"));
    }
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        let row = m.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
        let out_row = out.row_mut(r);
        let mut sum = 0.0;
        for (o, &v) in out_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    Ok(out)
}

/// Backward through row-wise softmax. `probs` is the forward output.
///
/// Per row: `d_x_i = p_i * (d_p_i - sum_j d_p_j p_j)`.
pub fn softmax_rows_backward(probs: &Matrix, d_probs: &Matrix) -> Result<Matrix> {
    if probs.shape() != d_probs.shape() {
        return Err(Error::DimensionMismatch {
            op: "softmax_rows_backward",
            left_rows: probs.rows(),
            left_cols: probs.cols(),
            right_rows: d_probs.rows(),
            right_cols: d_probs.cols(),
        });
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let dp = d_probs.row(r);
        let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
        let out_row = out.row_mut(r);
        for c in 0..p.len() {
            out_row[c] = p[c] * (dp[c] - dot);
        }
    }
    Ok(out)
}

/// Mean over rows: a TxC sequence pools to 1xC.
pub fn mean_pool(seq: &Matrix) -> Result<Matrix> {
    if seq.rows() == 0 {
        return Err(Error::EmptyInput("mean_pool"));
    }
    let mut out = seq.sum_rows();
    out.scale_assign(1.0 / seq.rows() as f64);
    Ok(out)
}

/// Backward through mean pooling: each row receives `d_out / T`.
pub fn mean_pool_backward(input_rows: usize, d_out: &Matrix) -> Matrix {
    let mut d_seq = Matrix::zeros(input_rows, d_out.cols());
    let inv = 1.0 / input_rows as f64;
    for r in 0..input_rows {
        for c in 0..d_out.cols() {
            d_seq.set(r, c, d_out.get(0, c) * inv);
        }
    }
    d_seq
}

/// Column-wise maxima with recorded argmax rows (ties resolve to the lowest
/// row index, which is also where the gradient is routed).
pub fn max_pool(seq: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    if seq.rows() == 0 {
        return Err(Error::EmptyInput("max_pool"));
    }
    let mut out = seq.row_matrix(0);
    let mut argmax = vec![0usize; seq.cols()];
    for r in 1..seq.rows() {
        for c in 0..seq.cols() {
            let v = seq.get(r, c);
            if v > out.get(0, c) {
                out.set(0, c, v);
                argmax[c] = r;
            }
        }
    }
    Ok((out, argmax))
}

/// Backward through max pooling: the gradient of each column flows to the
/// recorded argmax row only.
pub fn max_pool_backward(input_rows: usize, argmax: &[usize], d_out: &Matrix) -> Matrix {
    let mut d_seq = Matrix::zeros(input_rows, d_out.cols());
    for (c, &r) in argmax.iter().enumerate() {
        d_seq.set(r, c, d_out.get(0, c));
    }
    d_seq
}

/// Affine map `x . W + b` with the bias broadcast over rows.
pub fn linear_forward(x: &Matrix, w: &ParamTensor, b: &ParamTensor) -> Result<Matrix> {
    if x.cols() != w.value.rows() {
        return Err(Error::DimensionMismatch {
            op: "linear_forward",
            left_rows: x.rows(),
            left_cols: x.cols(),
            right_rows: w.value.rows(),
            right_cols: w.value.cols(),
        });
    }
    if b.value.rows() != 1 || b.value.cols() != w.value.cols() {
        return Err(Error::DimensionMismatch {
            op: "linear_forward bias",
            left_rows: 1,
            left_cols: w.value.cols(),
            right_rows: b.value.rows(),
            right_cols: b.value.cols(),
        });
    }
    let mut out = matmul(x, &w.value)?;
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (v, &bias) in row.iter_mut().zip(b.value.row(0)) {
            *v += bias;
        }
    }
    Ok(out)
}

/// Backward through the affine map. Accumulates `dW += x^T d_y` and
/// `db += column sums of d_y` into the parameter gradients, and returns
/// `d_x = d_y . W^T`.
pub fn linear_backward(
    x: &Matrix,
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    d_y: &Matrix,
) -> Result<Matrix> {
    let d_w = matmul(&x.transpose(), d_y)?;
    w.gradient.add_assign(&d_w)?;
    b.gradient.add_assign(&d_y.sum_rows())?;
    matmul(d_y, &w.value.transpose())
}

/// Mean squared error over all elements.
pub fn mse(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "mse",
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("mse"));
    }
    let n = a.len() as f64;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

/// Gradient of `mse(a, b)` with respect to `b`: `2 (b - a) / n`.
pub fn mse_backward_wrt_b(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.len() as f64;
    Ok(b.sub(a)?.scale(2.0 / n))
}

/// Negative log softmax probability of `label`, via log-sum-exp with max
/// subtraction.
pub fn cross_entropy(logits: &Matrix, label: usize) -> Result<f64> {
    let k = logits.cols();
    if logits.rows() != 1 || k == 0 {
        return Err(Error::EmptyInput("cross_entropy"));
    }
    if label >= k {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: k,
        });
    }
    let row = logits.row(0);
    let max = row.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v));
    let log_sum_exp = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    Ok(log_sum_exp - row[label])
}

/// Gradient of cross entropy with respect to the logits: `softmax - onehot`.
pub fn cross_entropy_backward(logits: &Matrix, label: usize) -> Result<Matrix> {
    if label >= logits.cols() {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: logits.cols(),
        });
    }
    let mut d = softmax_rows(logits)?;
    d.set(0, label, d.get(0, label) - 1.0);
    Ok(d)
}
