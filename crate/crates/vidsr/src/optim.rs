//! Adam optimiser with bias correction.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Moment accumulators and hyperparameters for one parameter group.
///
/// The defaults follow the usual recommendation: `beta1 = 0.9`,
/// `beta2 = 0.999`, `eps = 1e-8`, learning rate `1e-4`.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64, params: &[Tensor<T>]) -> Self {
        AdamState {
            lr: T::cast(lr),
            beta1: T::cast(0.9),
            beta2: T::cast(0.999),
            eps: T::cast(1e-8),
            step: 0,
            first_moment: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
            second_moment: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
        }
    }
}

/// One bias-corrected Adam update over a parameter group.
///
/// Parameters without an accumulated gradient are treated as having a zero
/// gradient and stay in place. Gradients are cleared after the step.
pub fn adam_step<T: Scalar>(params: &[Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != state.first_moment.len() {
        return Err(Error::invalid(format!(
            "adam_step: {} parameters but state tracks {}",
            params.len(),
            state.first_moment.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let one = T::one();
    let bc1 = one - state.beta1.powi(t);
    let bc2 = one - state.beta2.powi(t);

    for (i, p) in params.iter().enumerate() {
        if p.numel() != state.first_moment[i].len() {
            return Err(Error::shape(format!(
                "adam_step: parameter {} has {} elements, state expects {}",
                i,
                p.numel(),
                state.first_moment[i].len()
            )));
        }
        let grad = p.grad();
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        let g_data = grad.as_ref().map(|g| g.data());
        p.update_value(|value| {
            let data = value.data_mut();
            for j in 0..data.len() {
                let g = g_data.map_or(T::zero(), |g| g[j]);
                m[j] = state.beta1 * m[j] + (one - state.beta1) * g;
                v[j] = state.beta2 * v[j] + (one - state.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                data[j] = data[j] - state.lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        });
        p.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::TensorData;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let p = Tensor::leaf(TensorData::new(&[3], vec![1.0, -2.0, 0.5]).unwrap(), true);
        let mut state = AdamState::new(1e-2, &[p.clone()]);
        adam_step(&[p.clone()], &mut state).unwrap();
        assert_eq!(p.value().data(), &[1.0, -2.0, 0.5]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        // Hand-computed single step with constant gradient g:
        //   m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
        let lr = 1e-4;
        for &g in &[0.5f64, -0.25, 3.0] {
            let p = Tensor::leaf(TensorData::new(&[1], vec![1.0]).unwrap(), true);
            // Seed the gradient buffer by a backward pass through scale.
            let loss = crate::tensor::scale(&p, g);
            loss.backward().unwrap();
            let mut state = AdamState::new(lr, &[p.clone()]);
            adam_step(&[p.clone()], &mut state).unwrap();
            let moved = p.value().data()[0] - 1.0;
            let want = -lr * g / (g.abs() + 1e-8);
            assert!(
                (moved - want).abs() < 1e-12,
                "g={g}: moved {moved}, want {want}"
            );
            assert!((moved.abs() - lr).abs() < 1e-9);
        }
    }

    #[test]
    fn step_counter_increments() {
        let p = Tensor::leaf(TensorData::new(&[1], vec![0.0]).unwrap(), true);
        let mut state = AdamState::new(1e-3, &[p.clone()]);
        for want in 1..=4 {
            adam_step(&[p.clone()], &mut state).unwrap();
            assert_eq!(state.step, want);
        }
    }

    #[test]
    fn gradients_are_consumed_by_the_step() {
        let p = Tensor::leaf(TensorData::new(&[1], vec![1.0]).unwrap(), true);
        crate::tensor::scale(&p, 2.0).backward().unwrap();
        assert!(p.grad().is_some());
        let mut state = AdamState::new(1e-3, &[p.clone()]);
        adam_step(&[p.clone()], &mut state).unwrap();
        assert!(p.grad().is_none());
    }
}
