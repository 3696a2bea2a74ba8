//! Two-hidden-layer value network with layer normalization and hand-derived
//! gradients.
//!
//! Architecture: `affine(d -> h1) -> layer_norm -> relu -> affine(h1 -> h2)
//! -> layer_norm -> relu -> affine(h2 -> 1)`.
//!
//! The network is generic over the float type so training can run in `f32`
//! while gradient checks run in `f64`.

mod adam;

pub use adam::{adam_step, AdamConfig, OptimizerState};

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trajectory::ensure_dim;
use crate::value::ValueFunction;

/// Float types the network can be instantiated with.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

pub const LAYER_NORM_EPS: f64 = 1e-5;

pub const DEFAULT_HIDDEN: (usize, usize) = (16384, 64);

#[inline]
fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 converts to every Real")
}

/// Layer shapes. `input` is the latent dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl NetworkDims {
    pub fn new(input: usize, hidden1: usize, hidden2: usize) -> Result<Self> {
        if input == 0 || hidden1 == 0 || hidden2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "network dimensions must be positive, got ({input}, {hidden1}, {hidden2})"
            )));
        }
        Ok(Self {
            input,
            hidden1,
            hidden2,
        })
    }

    /// Tensor lengths in checkpoint order.
    pub fn tensor_lens(&self) -> [usize; Parameters::<f32>::TENSORS] {
        let (d, h1, h2) = (self.input, self.hidden1, self.hidden2);
        [d * h1, h1, h1, h1, h1 * h2, h2, h2, h2, h2, 1]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_lens().iter().sum()
    }
}

/// All trainable tensors. Weight matrices are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub ln1_gain: Vec<T>,
    pub ln1_bias: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub ln2_gain: Vec<T>,
    pub ln2_bias: Vec<T>,
    pub w3: Vec<T>,
    pub b3: Vec<T>,
}

impl<T: Real> Parameters<T> {
    pub const TENSORS: usize = 10;

    pub fn zeros(dims: &NetworkDims) -> Self {
        let [w1, b1, g1, be1, w2, b2, g2, be2, w3, b3] =
            dims.tensor_lens().map(|n| vec![T::zero(); n]);
        Self {
            w1,
            b1,
            ln1_gain: g1,
            ln1_bias: be1,
            w2,
            b2,
            ln2_gain: g2,
            ln2_bias: be2,
            w3,
            b3,
        }
    }

    pub fn tensors(&self) -> [&Vec<T>; 10] {
        [
            &self.w1,
            &self.b1,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.w2,
            &self.b2,
            &self.ln2_gain,
            &self.ln2_bias,
            &self.w3,
            &self.b3,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 10] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    /// Builds parameters from tensors in checkpoint order, validating lengths.
    pub fn from_tensors(dims: &NetworkDims, tensors: Vec<Vec<T>>) -> Result<Self> {
        if tensors.len() != Self::TENSORS {
            return Err(Error::InvalidConfig(format!(
                "expected {} tensors, got {}",
                Self::TENSORS,
                tensors.len()
            )));
        }
        let mut p = Self::zeros(dims);
        for (slot, t) in p.tensors_mut().into_iter().zip(tensors) {
            ensure_dim(slot.len(), t.len())?;
            *slot = t;
        }
        Ok(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.tensors().into_iter().flat_map(|t| t.iter())
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        let conv = |v: &Vec<T>| -> Vec<U> {
            v.iter()
                .map(|x| U::from_f64(x.to_f64().unwrap()).unwrap())
                .collect()
        };
        Parameters {
            w1: conv(&self.w1),
            b1: conv(&self.b1),
            ln1_gain: conv(&self.ln1_gain),
            ln1_bias: conv(&self.ln1_bias),
            w2: conv(&self.w2),
            b2: conv(&self.b2),
            ln2_gain: conv(&self.ln2_gain),
            ln2_bias: conv(&self.ln2_bias),
            w3: conv(&self.w3),
            b3: conv(&self.b3),
        }
    }
}

/// Layer normalization with biased variance:
/// `y_i = gain_i (x_i - mean) / sqrt(var + eps) + bias_i`.
pub fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T) -> Vec<T> {
    assert_eq!(x.len(), gain.len());
    assert_eq!(x.len(), bias.len());
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    layer_norm_into(x, gain, bias, eps, &mut xhat, &mut y);
    y
}

/// Writes normalized inputs and outputs; returns `1 / sqrt(var + eps)`, or zero
/// when the denominator vanishes (constant input with `eps == 0`).
fn layer_norm_into<T: Real>(
    x: &[T],
    gain: &[T],
    bias: &[T],
    eps: T,
    xhat: &mut [T],
    y: &mut [T],
) -> T {
    let n = T::from_usize(x.len()).unwrap();
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let denom = (var + eps).sqrt();
    let inv = if denom > T::zero() {
        T::one() / denom
    } else {
        T::zero()
    };
    for i in 0..x.len() {
        xhat[i] = (x[i] - mean) * inv;
        y[i] = gain[i] * xhat[i] + bias[i];
    }
    inv
}

/// Backward pass of [`layer_norm_into`] with respect to its input.
fn layer_norm_backward<T: Real>(dxhat: &[T], xhat: &[T], inv: T, dx: &mut [T]) {
    let n = T::from_usize(dxhat.len()).unwrap();
    let mean_d = dxhat.iter().copied().sum::<T>() / n;
    let mean_dx = dxhat
        .iter()
        .zip(xhat)
        .map(|(&a, &b)| a * b)
        .sum::<T>()
        / n;
    for i in 0..dx.len() {
        dx[i] = inv * (dxhat[i] - mean_d - xhat[i] * mean_dx);
    }
}

fn affine<T: Real>(w: &[T], b: &[T], x: &[T], out: &mut [T]) {
    let n_in = x.len();
    for ((o, row), &bias) in out.iter_mut().zip(w.chunks_exact(n_in)).zip(b) {
        *o = row
            .iter()
            .zip(x)
            .fold(bias, |acc, (&wi, &xi)| acc + wi * xi);
    }
}

/// Intermediate activations of one forward pass, reused across samples.
#[derive(Debug, Clone)]
struct Activations<T> {
    a1: Vec<T>,
    xhat1: Vec<T>,
    n1: Vec<T>,
    h1: Vec<T>,
    inv1: T,
    a2: Vec<T>,
    xhat2: Vec<T>,
    n2: Vec<T>,
    h2: Vec<T>,
    inv2: T,
    // backward scratch
    d_h2: Vec<T>,
    d_xhat2: Vec<T>,
    d_a2: Vec<T>,
    d_h1: Vec<T>,
    d_xhat1: Vec<T>,
    d_a1: Vec<T>,
}

impl<T: Real> Activations<T> {
    fn new(dims: &NetworkDims) -> Self {
        let z1 = vec![T::zero(); dims.hidden1];
        let z2 = vec![T::zero(); dims.hidden2];
        Self {
            a1: z1.clone(),
            xhat1: z1.clone(),
            n1: z1.clone(),
            h1: z1.clone(),
            inv1: T::zero(),
            a2: z2.clone(),
            xhat2: z2.clone(),
            n2: z2.clone(),
            h2: z2.clone(),
            inv2: T::zero(),
            d_h2: z2.clone(),
            d_xhat2: z2.clone(),
            d_a2: z2,
            d_h1: z1.clone(),
            d_xhat1: z1.clone(),
            d_a1: z1,
        }
    }
}

/// One regression example: `(input, target, weight)`.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a, T> {
    pub input: &'a [T],
    pub target: T,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNetwork<T = f32> {
    dims: NetworkDims,
    seed: u64,
    params: Parameters<T>,
}

impl<T: Real> ValueNetwork<T> {
    /// Fan-in initialization: weights uniform in `+-1/sqrt(fan_in)`, biases
    /// zero, layer-norm gain one and bias zero.
    pub fn new(dims: NetworkDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Parameters::zeros(&dims);
        let mut init = |w: &mut Vec<T>, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in w.iter_mut() {
                *x = real(rng.random_range(-bound..=bound));
            }
        };
        init(&mut params.w1, dims.input);
        init(&mut params.w2, dims.hidden1);
        init(&mut params.w3, dims.hidden2);
        params.ln1_gain.iter_mut().for_each(|g| *g = T::one());
        params.ln2_gain.iter_mut().for_each(|g| *g = T::one());
        Self { dims, seed, params }
    }

    pub fn from_parameters(dims: NetworkDims, seed: u64, params: Parameters<T>) -> Result<Self> {
        for (have, want) in params.tensors().iter().zip(dims.tensor_lens()) {
            ensure_dim(want, have.len())?;
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self { dims, seed, params })
    }

    /// A network whose output is `value` for every input (all weights zero).
    pub fn constant(dims: NetworkDims, value: T) -> Self {
        let mut params = Parameters::zeros(&dims);
        params.b3[0] = value;
        Self {
            dims,
            seed: 0,
            params,
        }
    }

    pub fn dims(&self) -> NetworkDims {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims.input
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> ValueNetwork<U> {
        ValueNetwork {
            dims: self.dims,
            seed: self.seed,
            params: self.params.cast(),
        }
    }

    fn forward_cached(&self, x: &[T], act: &mut Activations<T>) -> T {
        let p = &self.params;
        let eps = real::<T>(LAYER_NORM_EPS);
        affine(&p.w1, &p.b1, x, &mut act.a1);
        act.inv1 = layer_norm_into(
            &act.a1,
            &p.ln1_gain,
            &p.ln1_bias,
            eps,
            &mut act.xhat1,
            &mut act.n1,
        );
        for (h, &n) in act.h1.iter_mut().zip(&act.n1) {
            *h = n.max(T::zero());
        }
        affine(&p.w2, &p.b2, &act.h1, &mut act.a2);
        act.inv2 = layer_norm_into(
            &act.a2,
            &p.ln2_gain,
            &p.ln2_bias,
            eps,
            &mut act.xhat2,
            &mut act.n2,
        );
        for (h, &n) in act.h2.iter_mut().zip(&act.n2) {
            *h = n.max(T::zero());
        }
        act.h2
            .iter()
            .zip(&p.w3)
            .fold(p.b3[0], |acc, (&h, &w)| acc + h * w)
    }

    /// Accumulates `scale * d(output)/d(params)` into `grads`, using the
    /// activations of the preceding [`Self::forward_cached`] call on `x`.
    fn backward_accumulate(&self, x: &[T], scale: T, act: &mut Activations<T>, grads: &mut Parameters<T>) {
        let p = &self.params;
        let (h1n, h2n) = (self.dims.hidden1, self.dims.hidden2);

        grads.b3[0] = grads.b3[0] + scale;
        for j in 0..h2n {
            grads.w3[j] = grads.w3[j] + scale * act.h2[j];
            act.d_h2[j] = scale * p.w3[j];
        }

        // relu -> layer norm 2
        for j in 0..h2n {
            let d_n = if act.n2[j] > T::zero() { act.d_h2[j] } else { T::zero() };
            grads.ln2_gain[j] = grads.ln2_gain[j] + d_n * act.xhat2[j];
            grads.ln2_bias[j] = grads.ln2_bias[j] + d_n;
            act.d_xhat2[j] = d_n * p.ln2_gain[j];
        }
        layer_norm_backward(&act.d_xhat2, &act.xhat2, act.inv2, &mut act.d_a2);

        // affine 2
        act.d_h1.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..h2n {
            let d = act.d_a2[j];
            grads.b2[j] = grads.b2[j] + d;
            let row = j * h1n;
            for i in 0..h1n {
                grads.w2[row + i] = grads.w2[row + i] + d * act.h1[i];
                act.d_h1[i] = act.d_h1[i] + d * p.w2[row + i];
            }
        }

        // relu -> layer norm 1
        for i in 0..h1n {
            let d_n = if act.n1[i] > T::zero() { act.d_h1[i] } else { T::zero() };
            grads.ln1_gain[i] = grads.ln1_gain[i] + d_n * act.xhat1[i];
            grads.ln1_bias[i] = grads.ln1_bias[i] + d_n;
            act.d_xhat1[i] = d_n * p.ln1_gain[i];
        }
        layer_norm_backward(&act.d_xhat1, &act.xhat1, act.inv1, &mut act.d_a1);

        // affine 1
        let d_in = self.dims.input;
        for i in 0..h1n {
            let d = act.d_a1[i];
            grads.b1[i] = grads.b1[i] + d;
            let row = i * d_in;
            for k in 0..d_in {
                grads.w1[row + k] = grads.w1[row + k] + d * x[k];
            }
        }
    }

    pub fn forward(&self, z: &[T]) -> Result<T> {
        ensure_dim(self.dims.input, z.len())?;
        let mut act = Activations::new(&self.dims);
        Ok(self.forward_cached(z, &mut act))
    }

    /// Evaluates many inputs, reusing one activation buffer.
    pub fn forward_many<'a>(&self, inputs: impl IntoIterator<Item = &'a [T]>) -> Result<Vec<T>> {
        let mut act = Activations::new(&self.dims);
        inputs
            .into_iter()
            .map(|z| {
                ensure_dim(self.dims.input, z.len())?;
                Ok(self.forward_cached(z, &mut act))
            })
            .collect()
    }

    /// Weighted mean squared error `sum w (V(z) - y)^2 / sum w` and its exact
    /// gradient. Samples are reduced in slice order.
    pub fn loss_and_grads(&self, batch: &[BatchItem<'_, T>]) -> Result<(T, Parameters<T>)> {
        let mut grads = Parameters::zeros(&self.dims);
        let loss = self.loss_and_grads_into(batch, &mut grads)?;
        Ok((loss, grads))
    }

    /// Like [`Self::loss_and_grads`] but writes into a caller-owned buffer.
    pub fn loss_and_grads_into(&self, batch: &[BatchItem<'_, T>], grads: &mut Parameters<T>) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty batch".into()));
        }
        let total_weight = batch.iter().map(|b| b.weight).sum::<T>();
        if !(total_weight > T::zero()) || batch.iter().any(|b| !(b.weight > T::zero())) {
            return Err(Error::InvalidConfig("batch weights must be positive".into()));
        }
        grads.fill_zero();
        let mut act = Activations::new(&self.dims);
        let two = real::<T>(2.0);
        let mut weighted_sq = T::zero();
        for item in batch {
            ensure_dim(self.dims.input, item.input.len())?;
            let out = self.forward_cached(item.input, &mut act);
            let err = out - item.target;
            weighted_sq = weighted_sq + item.weight * err * err;
            self.backward_accumulate(item.input, two * item.weight * err, &mut act, grads);
        }
        let loss = weighted_sq / total_weight;
        if !loss.is_finite() {
            return Err(Error::NumericalOverflow);
        }
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g = *g / total_weight);
        }
        Ok(loss)
    }

    /// Weighted MSE without gradients.
    pub fn weighted_mse(&self, batch: &[BatchItem<'_, T>]) -> Result<f64> {
        let mut act = Activations::new(&self.dims);
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for item in batch {
            ensure_dim(self.dims.input, item.input.len())?;
            let err = (self.forward_cached(item.input, &mut act) - item.target)
                .to_f64()
                .unwrap();
            let w = item.weight.to_f64().unwrap();
            num += w * err * err;
            den += w;
        }
        if den > 0.0 {
            Ok(num / den)
        } else {
            Err(Error::InvalidConfig("empty batch".into()))
        }
    }
}

impl<T: Real> ValueFunction for ValueNetwork<T> {
    fn input_dim(&self) -> usize {
        self.dims.input
    }

    fn value(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.dims.input, "value network input dimension");
        let x: Vec<T> = z.iter().map(|&c| real(c)).collect();
        let mut act = Activations::new(&self.dims);
        self.forward_cached(&x, &mut act).to_f64().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(d: usize, h1: usize, h2: usize) -> NetworkDims {
        NetworkDims::new(d, h1, h2).unwrap()
    }

    #[test]
    fn layer_norm_examples() {
        let y = layer_norm(&[1.0f64, 3.0], &[1.0, 1.0], &[0.0, 0.0], 1e-14);
        assert!((y[0] + 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);

        let y = layer_norm(&[2.5f64; 4], &[1.0; 4], &[0.0; 4], 1e-5);
        assert!(y.iter().all(|&v| v == 0.0));

        let y = layer_norm(&[0.0f64, 2.0, 4.0], &[1.0; 3], &[0.0; 3], 0.0);
        let expect = 2.0 / (8.0f64 / 3.0).sqrt();
        assert!((y[0] + expect).abs() < 1e-12);
        assert!(y[1].abs() < 1e-12);
        assert!((y[2] - expect).abs() < 1e-12);
        assert!((expect - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn layer_norm_zero_mean_and_unit_scale() {
        let x: Vec<f64> = (0..17).map(|i| ((i * 7919) % 23) as f64 * 0.37 - 3.0).collect();
        let y = layer_norm(&x, &[1.0; 17], &[0.0; 17], 1e-12);
        let mean = y.iter().sum::<f64>() / 17.0;
        assert!(mean.abs() <= 1e-9);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 17f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = ValueNetwork::<f64>::constant(dims(3, 5, 4), 0.0);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), 0.0);
        assert_eq!(net.forward(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_layer_norm_emits_its_bias() {
        let d = dims(1, 1, 1);
        let mut p = Parameters::<f64>::zeros(&d);
        p.w1[0] = 1.0;
        p.ln1_gain[0] = 1.0;
        p.ln1_bias[0] = 1.0;
        p.w2[0] = 1.0;
        p.ln2_gain[0] = 1.0;
        p.ln2_bias[0] = 1.0;
        p.w3[0] = 1.0;
        let net = ValueNetwork::from_parameters(d, 0, p).unwrap();
        for z in [-3.0, 0.0, 0.25, 10.0] {
            assert_eq!(net.forward(&[z]).unwrap(), 1.0);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = ValueNetwork::<f32>::new(dims(4, 16, 8), 11);
        let z = [0.3f32, -1.2, 0.7, 2.0];
        let a = net.forward(&z).unwrap();
        let b = net.forward(&z).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let threads: Vec<u32> = std::thread::scope(|s| {
            let hs: Vec<_> = (0..4)
                .map(|_| s.spawn(|| net.forward(&z).unwrap().to_bits()))
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(threads.iter().all(|&bits| bits == a.to_bits()));
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let net = ValueNetwork::<f32>::new(dims(2, 4, 3), 0);
        assert!(matches!(
            net.forward(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let net = ValueNetwork::<f64>::new(dims(2, 6, 4), 5);
        let inputs = [[0.1, 0.2], [-1.0, 0.4], [2.0, -0.3]];
        let targets: Vec<f64> = inputs.iter().map(|z| net.forward(z).unwrap()).collect();
        let batch: Vec<_> = inputs
            .iter()
            .zip(&targets)
            .map(|(z, &y)| BatchItem {
                input: z.as_slice(),
                target: y,
                weight: 1.0,
            })
            .collect();
        let (loss, grads) = net.loss_and_grads(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn weight_two_equals_listing_twice() {
        let net = ValueNetwork::<f64>::new(dims(3, 8, 4), 9);
        let z = [0.4, -0.6, 1.1];
        let single = [BatchItem { input: &z[..], target: 0.3, weight: 2.0 }];
        let twice = [
            BatchItem { input: &z[..], target: 0.3, weight: 1.0 },
            BatchItem { input: &z[..], target: 0.3, weight: 1.0 },
        ];
        let (l1, g1) = net.loss_and_grads(&single).unwrap();
        let (l2, g2) = net.loss_and_grads(&twice).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn batch_order_does_not_matter() {
        let net = ValueNetwork::<f64>::new(dims(2, 8, 4), 2);
        let zs = [[0.1, 0.9], [-0.5, 0.3], [1.5, -1.5], [0.0, 0.2]];
        let ys = [0.2, -0.1, 0.4, 0.0];
        let ws = [1.0, 2.0, 1.0, 3.0];
        let items: Vec<_> = (0..4)
            .map(|i| BatchItem { input: &zs[i][..], target: ys[i], weight: ws[i] })
            .collect();
        let mut rev = items.clone();
        rev.reverse();
        let (l1, g1) = net.loss_and_grads(&items).unwrap();
        let (l2, g2) = net.loss_and_grads(&rev).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn loss_rejects_bad_batches() {
        let net = ValueNetwork::<f64>::new(dims(2, 4, 3), 0);
        assert!(net.loss_and_grads(&[]).is_err());
        let z = [0.0, 1.0];
        let bad = [BatchItem { input: &z[..], target: 0.0, weight: 0.0 }];
        assert!(net.loss_and_grads(&bad).is_err());
        let huge = [BatchItem { input: &z[..], target: f64::MAX, weight: 1.0 }];
        assert!(matches!(net.loss_and_grads(&huge), Err(Error::NumericalOverflow)));
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let d = dims(4, 32, 8);
        let net = ValueNetwork::<f64>::new(d, 1);
        let p = net.params();
        assert!(p.w1.iter().all(|w| w.abs() <= 0.5));
        assert!(p.w2.iter().all(|w| w.abs() <= 1.0 / 32f64.sqrt()));
        assert!(p.b1.iter().chain(&p.b2).chain(&p.b3).all(|&b| b == 0.0));
        assert!(p.ln1_gain.iter().all(|&g| g == 1.0));
        assert_eq!(p.iter().count(), d.parameter_count());
        assert_ne!(net, ValueNetwork::<f64>::new(d, 2));
    }
}
