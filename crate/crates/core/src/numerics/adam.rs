use crate::error::{Error, Result};

/// Bias-corrected Adam optimizer state for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self::with_betas(n_params, learning_rate, 0.9, 0.999, 1e-8).expect("default Adam hyperparameters are valid")
    }

    pub fn with_betas(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be > 0, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || beta1 == 0.0 || beta2 == 0.0 {
            return Err(Error::InvalidParameter(format!("betas must lie in (0, 1), got ({beta1}, {beta2})")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
        })
    }

    /// One descent step: `params <- params - lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// To ascend an objective, pass the negated gradient.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "Adam state has {} entries, params {}, grad {}",
                self.first_moment.len(),
                params.len(),
                grad.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(self.first_moment.iter_mut()).zip(self.second_moment.iter_mut()) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(state: &AdamState, params: &[f64], grad: &[f64]) -> Result<(AdamState, Vec<f64>)> {
    let mut next = state.clone();
    let mut p = params.to_vec();
    next.step(&mut p, grad)?;
    Ok((next, p))
}
