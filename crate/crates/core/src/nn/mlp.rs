use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mat::{gemm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Sigmoid,
}

/// Fully connected network with ReLU hidden layers. All weights and biases
/// live in one flat parameter vector so optimizers and target-network mixing
/// operate on a single slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: Activation,
    pub params: Vec<f64>,
}

/// Per-layer activations recorded by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of every layer, then the network output.
    acts: Vec<Mat>,
}

impl MlpCache {
    pub fn output(&self) -> &Mat {
        self.acts.last().expect("cache holds the output")
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

impl Mlp {
    /// He-uniform hidden layers; the last layer is drawn from
    /// `±final_scale` so initial outputs start near the activation's center.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, final_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let total = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let mut params = Vec::with_capacity(total);
        let layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = if l + 1 == layers { final_scale } else { libm::sqrt(6.0 / w[0] as f64) };
            for _ in 0..w[0] * w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
            params.extend(core::iter::repeat_n(0.0, w[1]));
        }
        Self { sizes: sizes.to_vec(), output, params }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes non-empty")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let at = off;
            off += w[0] * w[1] + w[1];
            (at, w[0], w[1])
        })
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        self.forward_cached(x).acts.pop().expect("output present")
    }

    pub fn forward_cached(&self, x: &Mat) -> MlpCache {
        assert_eq!(x.cols, self.input_dim(), "input width");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.clone());
        for (l, (off, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let input = acts.last().expect("previous activation");
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let mut y = Mat::zeros(input.rows, fan_out);
            for i in 0..y.rows {
                y.row_mut(i).copy_from_slice(b);
            }
            gemm(1.0, &input.data, (input.rows, fan_in), false, w, (fan_in, fan_out), false, 1.0, &mut y.data);
            if l + 1 < layers {
                y.data.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == Activation::Sigmoid {
                y.data.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            acts.push(y);
        }
        MlpCache { acts }
    }

    /// Accumulate parameter gradients of `sum(grad_out ⊙ output)` into
    /// `grads` and return the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &Mat, grads: &mut [f64]) -> Mat {
        assert_eq!(grads.len(), self.params.len());
        let layers = self.sizes.len() - 1;
        let mut delta = grad_out.clone();
        if self.output == Activation::Sigmoid {
            for (d, y) in delta.data.iter_mut().zip(&cache.output().data) {
                *d *= y * (1.0 - y);
            }
        }
        let offsets: Vec<_> = self.layer_offsets().collect();
        for l in (0..layers).rev() {
            let (off, fan_in, fan_out) = offsets[l];
            let input = &cache.acts[l];
            let rows = input.rows;
            let (w, rest) = self.params[off..].split_at(fan_in * fan_out);
            let _ = rest;
            {
                let (gw, gb) = grads[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                gemm(1.0, &input.data, (rows, fan_in), true, &delta.data, (rows, fan_out), false, 1.0, gw);
                for i in 0..rows {
                    for (g, d) in gb.iter_mut().zip(delta.row(i)) {
                        *g += d;
                    }
                }
            }
            let mut dx = Mat::zeros(rows, fan_in);
            gemm(1.0, &delta.data, (rows, fan_out), false, w, (fan_in, fan_out), true, 0.0, &mut dx.data);
            if l > 0 {
                for (d, a) in dx.data.iter_mut().zip(&input.data) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        delta
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }
}
