//! Adam optimizer with bias correction.

use super::layer::ParamSet;
use super::scalar::Scalar;
use super::TensorError;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one set per layer, plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step: u64,
    m: Vec<ParamSet<T>>,
    v: Vec<ParamSet<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[ParamSet<T>]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
        }
    }
}

/// One Adam update of `params` in place from `grads`.
pub fn adam_step<T: Scalar>(
    params: &mut [ParamSet<T>],
    grads: &[ParamSet<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<(), TensorError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TensorError::InvalidSpec(
            "adam_step: params/grads/state layer counts differ".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one_minus_b1 = T::from_f64(1.0 - cfg.beta1);
    let one_minus_b2 = T::from_f64(1.0 - cfg.beta2);
    let corr1 = T::from_f64(1.0 / (1.0 - libm::pow(cfg.beta1, t as f64)));
    let corr2 = T::from_f64(1.0 / (1.0 - libm::pow(cfg.beta2, t as f64)));
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.epsilon);

    for ((p_layer, g_layer), (m_layer, v_layer)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((name, p), (_, m)), (_, v)) in p_layer
            .iter_mut()
            .zip(m_layer.iter_mut())
            .zip(v_layer.iter_mut())
        {
            let g_tensor = g_layer.require(name)?;
            if g_tensor.shape() != p.shape() {
                return Err(TensorError::ShapeMismatch {
                    context: "adam_step gradient",
                    expected: p.shape().to_vec(),
                    got: g_tensor.shape().to_vec(),
                });
            }
            for ((pv, gv), (mv, vv)) in p
                .data_mut()
                .iter_mut()
                .zip(g_tensor.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = b1 * *mv + one_minus_b1 * *gv;
                *vv = b2 * *vv + one_minus_b2 * *gv * *gv;
                let m_hat = *mv * corr1;
                let v_hat = *vv * corr2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
