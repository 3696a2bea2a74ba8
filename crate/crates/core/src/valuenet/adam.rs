use serde::{Deserialize, Serialize};

use super::{real, NetworkDims, Parameters, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay coefficient, applied directly to the parameters.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub step: u64,
    pub first_moment: Parameters<T>,
    pub second_moment: Parameters<T>,
    pub config: AdamConfig,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(dims: &NetworkDims, config: AdamConfig) -> Self {
        Self {
            step: 0,
            first_moment: Parameters::zeros(dims),
            second_moment: Parameters::zeros(dims),
            config,
        }
    }
}

/// One bias-corrected Adam update:
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr m_hat / (sqrt(v_hat) + eps) - lr wd p
/// ```
pub fn adam_step<T: Real>(params: &mut Parameters<T>, grads: &Parameters<T>, opt: &mut OptimizerState<T>) {
    opt.step += 1;
    let c = opt.config;
    let t = opt.step.min(i32::MAX as u64) as i32;
    let b1: T = real(c.beta1);
    let b2: T = real(c.beta2);
    let one = T::one();
    let bias1 = one - b1.powi(t);
    let bias2 = one - b2.powi(t);
    let lr: T = real(c.lr);
    let eps: T = real(c.eps);
    let decay: T = real(c.lr * c.weight_decay);

    let ps = params.tensors_mut();
    let gs = grads.tensors();
    let ms = opt.first_moment.tensors_mut();
    let vs = opt.second_moment.tensors_mut();
    for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            let old = p[i];
            p[i] = old - lr * (m_hat / (v_hat.sqrt() + eps)) - decay * old;
        }
    }
}
