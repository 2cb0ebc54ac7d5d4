use rand::Rng;

use super::{gemm, Real};
use crate::error::{Error, Result};
use crate::scene::rng_for;

/// Hidden widths of the production network.
pub const PRODUCTION_HIDDEN: [usize; 3] = [2048, 1024, 512];

/// Affine layer `z = x W + b`, with `W` stored `fan_in x fan_out` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weight: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Forward pass for a `batch x fan_in` block.
    fn apply(&self, x: &[T], batch: usize, out: &mut Vec<T>) {
        out.clear();
        if batch == 1 {
            // Row-wise axpy: contiguous in W and much cheaper than packing
            // the whole weight matrix for a single row.
            out.extend_from_slice(&self.bias);
            for (xi, row) in x.iter().zip(self.weight.chunks_exact(self.fan_out)) {
                if *xi == T::zero() {
                    continue;
                }
                for (o, w) in out.iter_mut().zip(row) {
                    *o = *o + *xi * *w;
                }
            }
            return;
        }
        out.reserve(batch * self.fan_out);
        for _ in 0..batch {
            out.extend_from_slice(&self.bias);
        }
        gemm(batch, self.fan_in, self.fan_out, x, false, &self.weight, false, T::one(), out);
    }
}

/// Four affine layers with rectifiers after the first three.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T = f32> {
    n_ch: usize,
    l: usize,
    layers: Vec<Dense<T>>,
}

/// Gradients share the parameter layout.
pub type Gradients<T> = Vec<Dense<T>>;

/// Layer inputs saved by [`MlpModel::forward_cached`]; `activations[0]` is the
/// network input and `activations[4]` the (linear) output.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    pub activations: Vec<Vec<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("cache always holds the output")
    }
}

impl<T: Real> MlpModel<T> {
    /// Production widths with the default initialization.
    pub fn new(n_ch: usize, l: usize, seed: u64) -> Self {
        Self::with_hidden(n_ch, l, PRODUCTION_HIDDEN, seed)
    }

    /// Custom hidden widths; the reduced "test mode" used by gradient checks.
    /// Weights uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn with_hidden(n_ch: usize, l: usize, hidden: [usize; 3], seed: u64) -> Self {
        let mut model = Self::zeros_with_hidden(n_ch, l, hidden);
        let mut rng = rng_for(seed);
        for layer in &mut model.layers {
            let bound = (6.0 / layer.fan_in as f64).sqrt();
            for w in &mut layer.weight {
                *w = T::from_f64(rng.random_range(-bound..bound));
            }
        }
        model
    }

    pub fn zeros_with_hidden(n_ch: usize, l: usize, hidden: [usize; 3]) -> Self {
        let dims = [2 * n_ch, hidden[0], hidden[1], hidden[2], l];
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Self { n_ch, l, layers }
    }

    pub(crate) fn from_layers(n_ch: usize, l: usize, layers: Vec<Dense<T>>) -> Result<Self> {
        let model = Self { n_ch, l, layers };
        let dims = model.dims();
        if model.layers.len() != 4 || dims[0] != 2 * n_ch || dims[4] != l {
            return Err(Error::ShapeMismatch {
                expected: format!("4 layers {}->...->{}", 2 * n_ch, l),
                found: format!("{:?}", dims),
            });
        }
        Ok(model)
    }

    pub fn n_ch(&self) -> usize {
        self.n_ch
    }

    pub fn grid_len(&self) -> usize {
        self.l
    }

    pub fn input_len(&self) -> usize {
        2 * self.n_ch
    }

    /// `[input, hidden1, hidden2, hidden3, output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers.first().map_or(0, |l| l.fan_in)];
        d.extend(self.layers.iter().map(|l| l.fan_out));
        d
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.fan_in, l.fan_out))
            .collect()
    }

    pub fn convert<U: Real>(&self) -> MlpModel<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64().unwrap())).collect();
        MlpModel {
            n_ch: self.n_ch,
            l: self.l,
            layers: self
                .layers
                .iter()
                .map(|d| Dense {
                    fan_in: d.fan_in,
                    fan_out: d.fan_out,
                    weight: conv(&d.weight),
                    bias: conv(&d.bias),
                })
                .collect(),
        }
    }

    fn check_input(&self, len: usize, batch: usize) -> Result<()> {
        if len != batch * self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: batch * self.input_len(),
                found: len,
            });
        }
        Ok(())
    }

    /// Single input vector to length-L output.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        self.forward_batch(input, 1)
    }

    /// `batch` inputs stored row-major, returning `batch x L` outputs.
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_input(inputs.len(), batch)?;
        let mut cur = inputs.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, batch, &mut next);
            if i + 1 < self.layers.len() {
                relu(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass keeping every layer input for backpropagation.
    pub fn forward_cached(&self, inputs: &[T], batch: usize) -> Result<ForwardCache<T>> {
        self.check_input(inputs.len(), batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.apply(activations.last().unwrap(), batch, &mut out);
            if i + 1 < self.layers.len() {
                relu(&mut out);
            }
            activations.push(out);
        }
        Ok(ForwardCache { batch, activations })
    }

    /// Backpropagates `d_output` (`batch x L`, the loss gradient w.r.t. the
    /// network output) through a cached forward pass. The rectifier
    /// subgradient at zero is zero.
    pub fn backprop(&self, cache: &ForwardCache<T>, d_output: Vec<T>) -> Gradients<T> {
        let batch = cache.batch;
        let mut grads = self.zero_gradients();
        let mut delta = d_output;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.activations[i];
            let g = &mut grads[i];
            gemm(layer.fan_in, batch, layer.fan_out, input, true, &delta, false, T::zero(), &mut g.weight);
            for row in delta.chunks_exact(layer.fan_out) {
                for (b, d) in g.bias.iter_mut().zip(row) {
                    *b = *b + *d;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![T::zero(); batch * layer.fan_in];
            gemm(batch, layer.fan_out, layer.fan_in, &delta, false, &layer.weight, true, T::zero(), &mut prev);
            for (p, a) in prev.iter_mut().zip(input) {
                if *a <= T::zero() {
                    *p = T::zero();
                }
            }
            delta = prev;
        }
        grads
    }
}

fn relu<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}
