//! Trainable parameter tensors and the Adam optimizer.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

/// A named trainable tensor: value, accumulated gradient, and Adam moments.
/// The three auxiliary matrices always share the value's shape.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub gradient: Matrix,
    pub adam_m: Matrix,
    pub adam_v: Matrix,
}

impl ParamTensor {
    pub fn from_value(name: &str, value: Matrix) -> Self {
        let (rows, cols) = value.shape();
        ParamTensor {
            name: name.to_string(),
            value,
            gradient: Matrix::zeros(rows, cols),
            adam_m: Matrix::zeros(rows, cols),
            adam_v: Matrix::zeros(rows, cols),
        }
    }

    pub fn zero_gradient(&mut self) {
        self.gradient.fill(0.0);
    }
}

/// Adam hyperparameters plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..AdamConfig::default()
        }
    }

    /// A zero learning rate is allowed (it makes a training run a pure
    /// no-op diagnostic); NaN, negative rates, and out-of-range betas are
    /// not.
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.beta1.is_nan() || self.beta1 <= 0.0 || self.beta1 >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "beta1 must lie in (0, 1), got {}",
                self.beta1
            )));
        }
        if self.beta2.is_nan() || self.beta2 <= 0.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "beta2 must lie in (0, 1), got {}",
                self.beta2
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update over a set of tensors.
///
/// All tensors share the step counter, which is incremented once per call.
/// Gradients must have been populated by a backward pass; they are validated
/// for finiteness before anything mutates, then zeroed after the update.
pub fn adam_step<'a, I>(params: I, cfg: &mut AdamConfig) -> Result<()>
where
    I: IntoIterator<Item = &'a mut ParamTensor>,
{
    cfg.validate()?;
    let tensors: Vec<&mut ParamTensor> = params.into_iter().collect();
    for tensor in &tensors {
        if let Some((row, col)) = tensor.gradient.find_non_finite() {
            return Err(Error::NumericFault {
                param: tensor.name.clone(),
                detail: format!("non-finite gradient at ({row}, {col})"),
            });
        }
    }

    cfg.step_count += 1;
    let t = cfg.step_count as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);

    for tensor in tensors {
        let n = tensor.value.len();
        for i in 0..n {
            let g = tensor.gradient.data()[i];
            let m = cfg.beta1 * tensor.adam_m.data()[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * tensor.adam_v.data()[i] + (1.0 - cfg.beta2) * g * g;
            tensor.adam_m.data_mut()[i] = m;
            tensor.adam_v.data_mut()[i] = v;
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            tensor.value.data_mut()[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        tensor.zero_gradient();
    }
    Ok(())
}
