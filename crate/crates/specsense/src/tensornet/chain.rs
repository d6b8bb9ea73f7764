//! A validated stack of layers with deterministic initialization and a
//! fused softmax cross-entropy training path.

use super::layer::{layer_backward, layer_forward, LayerCache, LayerSpec, Mode, ParamSet};
use super::loss::softmax_cross_entropy;
use super::scalar::Scalar;
use super::tensor::Tensor;
use super::TensorError;
use crate::rng::RngStream;

/// Layer chain plus the input shape it was validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    layers: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    shapes: Vec<Vec<usize>>,
}

impl Chain {
    /// Validate hyperparameters and the shape flow from `input_shape`
    /// through every layer.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Chain, TensorError> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(TensorError::InvalidSpec(format!(
                "bad input shape {input_shape:?}"
            )));
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input_shape.clone();
        for spec in &layers {
            spec.validate()?;
            current = spec.output_shape(&current)?;
            shapes.push(current.clone());
        }
        Ok(Chain {
            layers,
            input_shape,
            shapes,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().map_or(&self.input_shape, |s| s)
    }

    /// Shape of the input seen by layer `index`.
    fn shape_into(&self, index: usize) -> &[usize] {
        if index == 0 {
            &self.input_shape
        } else {
            &self.shapes[index - 1]
        }
    }

    /// Glorot-uniform initialization for kernels, zero biases, and an LSTM
    /// forget-gate bias of one. Layer `l` draws from `rng.substream(l)` so
    /// the values do not depend on other layers.
    pub fn init_params<T: Scalar>(&self, rng: &RngStream) -> Vec<ParamSet<T>> {
        self.layers
            .iter()
            .enumerate()
            .map(|(l, spec)| {
                let mut stream = rng.substream(l as u64);
                init_layer(spec, self.shape_into(l), &mut stream)
            })
            .collect()
    }

    /// Total number of scalar parameters.
    pub fn param_count<T: Scalar>(&self, params: &[ParamSet<T>]) -> usize {
        params.iter().map(|p| p.param_count()).sum()
    }

    /// Full forward pass; dropout masks (train mode) come from `rng`.
    pub fn forward<T: Scalar>(
        &self,
        params: &[ParamSet<T>],
        input: &Tensor<T>,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Tensor<T>, Vec<LayerCache<T>>), TensorError> {
        self.check_params(params)?;
        if input.shape() != self.input_shape {
            return Err(TensorError::ShapeMismatch {
                context: "chain input",
                expected: self.input_shape.clone(),
                got: input.shape().to_vec(),
            });
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (spec, p) in self.layers.iter().zip(params) {
            let (out, cache) = layer_forward(spec, p, &current, mode, rng)?;
            caches.push(cache);
            current = out;
        }
        Ok((current, caches))
    }

    /// Backward pass through the whole chain given the gradient at its
    /// output. Returns the input gradient and per-layer parameter gradients.
    pub fn backward<T: Scalar>(
        &self,
        params: &[ParamSet<T>],
        caches: &[LayerCache<T>],
        grad_out: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<ParamSet<T>>), TensorError> {
        self.check_params(params)?;
        if caches.len() != self.layers.len() {
            return Err(TensorError::CacheMismatch);
        }
        let mut grads: Vec<ParamSet<T>> = Vec::with_capacity(self.layers.len());
        let mut grad = grad_out.clone();
        for ((spec, p), cache) in self.layers.iter().zip(params).zip(caches).rev() {
            let (gin, gp) = layer_backward(spec, p, cache, &grad)?;
            grads.push(gp);
            grad = gin;
        }
        grads.reverse();
        Ok((grad, grads))
    }

    /// Cross-entropy loss and parameter gradients for one example.
    ///
    /// When the chain ends in a softmax layer the loss is fused with it
    /// (gradient `p - onehot` on the logits); otherwise the loss applies to
    /// the raw output.
    pub fn loss_and_gradients<T: Scalar>(
        &self,
        params: &[ParamSet<T>],
        input: &Tensor<T>,
        label: usize,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(f64, Vec<ParamSet<T>>), TensorError> {
        self.check_params(params)?;
        let body_len = self.body_len();
        let mut caches = Vec::with_capacity(body_len);
        let mut current = input.clone();
        for (spec, p) in self.layers[..body_len].iter().zip(params) {
            let (out, cache) = layer_forward(spec, p, &current, mode, rng)?;
            caches.push(cache);
            current = out;
        }
        let (loss, grad_logits) = softmax_cross_entropy(&current, label)?;
        let mut grads: Vec<ParamSet<T>> = Vec::with_capacity(self.layers.len());
        // The trailing softmax layer (if any) holds no parameters.
        if body_len < self.layers.len() {
            grads.push(ParamSet::empty());
        }
        let mut grad = grad_logits;
        for ((spec, p), cache) in self.layers[..body_len]
            .iter()
            .zip(params)
            .zip(&caches)
            .rev()
        {
            let (gin, gp) = layer_backward(spec, p, cache, &grad)?;
            grads.push(gp);
            grad = gin;
        }
        grads.reverse();
        Ok((loss.to_f64(), grads))
    }

    /// Eval-mode loss only (no gradients), for validation metrics.
    pub fn loss_eval<T: Scalar>(
        &self,
        params: &[ParamSet<T>],
        input: &Tensor<T>,
        label: usize,
    ) -> Result<(f64, Tensor<T>), TensorError> {
        let body_len = self.body_len();
        let mut rng = RngStream::new(0);
        let mut current = input.clone();
        for (spec, p) in self.layers[..body_len].iter().zip(params) {
            let (out, _) = layer_forward(spec, p, &current, Mode::Eval, &mut rng)?;
            current = out;
        }
        let (loss, _) = softmax_cross_entropy(&current, label)?;
        let probs = super::layer::softmax(&current);
        Ok((loss.to_f64(), probs))
    }

    /// Number of layers before a trailing softmax.
    fn body_len(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Softmax) => self.layers.len() - 1,
            _ => self.layers.len(),
        }
    }

    fn check_params<T: Scalar>(&self, params: &[ParamSet<T>]) -> Result<(), TensorError> {
        if params.len() != self.layers.len() {
            return Err(TensorError::InvalidSpec(format!(
                "chain has {} layers but {} param sets were supplied",
                self.layers.len(),
                params.len()
            )));
        }
        Ok(())
    }
}

fn uniform_tensor<T: Scalar>(shape: &[usize], bound: f64, rng: &mut RngStream) -> Tensor<T> {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = T::from_f64((2.0 * rng.next_f64() - 1.0) * bound);
    }
    t
}

fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

fn init_layer<T: Scalar>(
    spec: &LayerSpec,
    input_shape: &[usize],
    rng: &mut RngStream,
) -> ParamSet<T> {
    let mut params = ParamSet::empty();
    match *spec {
        LayerSpec::Conv1d { filters, kernel } => {
            let channels = input_shape[0];
            let bound = glorot_bound(channels * kernel, filters * kernel);
            params.insert(
                "kernel",
                uniform_tensor(&[filters, channels, kernel], bound, rng),
            );
            params.insert("bias", Tensor::zeros(&[filters]));
        }
        LayerSpec::Dense { units } => {
            let features = input_shape[0];
            let bound = glorot_bound(features, units);
            params.insert("weight", uniform_tensor(&[units, features], bound, rng));
            params.insert("bias", Tensor::zeros(&[units]));
        }
        LayerSpec::TimeDense { units } => {
            let channels = input_shape[0];
            let bound = glorot_bound(channels, units);
            params.insert("weight", uniform_tensor(&[units, channels], bound, rng));
            params.insert("bias", Tensor::zeros(&[units]));
        }
        LayerSpec::Lstm { cells, .. } => {
            let features = input_shape[1];
            let in_bound = glorot_bound(features, cells);
            let rec_bound = glorot_bound(cells, cells);
            params.insert(
                "w_input",
                uniform_tensor(&[4 * cells, features], in_bound, rng),
            );
            params.insert(
                "w_recur",
                uniform_tensor(&[4 * cells, cells], rec_bound, rng),
            );
            let mut bias = Tensor::zeros(&[4 * cells]);
            // Forget-gate block starts open.
            for u in cells..2 * cells {
                bias.data_mut()[u] = T::ONE;
            }
            params.insert("bias", bias);
        }
        LayerSpec::Relu | LayerSpec::Softmax | LayerSpec::Dropout { .. } => {}
    }
    params
}
