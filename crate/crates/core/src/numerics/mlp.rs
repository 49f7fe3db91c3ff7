use serde::{Deserialize, Serialize};

use super::{Matrix, NumericsError, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and its output.
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - post * post,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer: `act(W·x + b)` with `W` of shape out × in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    fn num_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }
}

/// Multilayer perceptron with a fixed topology. Hidden layers share one
/// activation; the output layer is linear.
///
/// Flat parameter layout, used by [`Mlp::params`], [`Mlp::set_params`] and
/// every gradient buffer: for each layer in order, the weight matrix
/// row-major followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Scratch space for one forward/backward pass. Reusable across inputs.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    /// Input seen by each layer.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Scaled dropout masks applied to hidden outputs, if any.
    masks: Vec<Option<Vec<f64>>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&[], Vec::as_slice)
    }
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new(widths: &[usize], hidden: Activation, rng: &mut Rng) -> Result<Self, NumericsError> {
        let mut net = Self::zeros(widths, hidden)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.fan_in() + layer.fan_out()) as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize], hidden: Activation) -> Result<Self, NumericsError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(NumericsError::InvalidWidths(widths.to_vec()));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense {
                weights: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
                activation: if i == last { Activation::Identity } else { hidden },
            })
            .collect();
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking shape compatibility.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NumericsError> {
        if layers.is_empty() {
            return Err(NumericsError::Empty);
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(NumericsError::Dimension {
                    expected: pair[0].fan_out(),
                    got: pair[1].fan_in(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.fan_out() {
                return Err(NumericsError::Dimension {
                    expected: l.fan_out(),
                    got: l.bias.len(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(Dense::fan_out));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.write_params(&mut out);
        out
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
    }

    /// Reads parameters from the front of `src`; returns how many were consumed.
    pub fn set_params(&mut self, src: &[f64]) -> Result<usize, NumericsError> {
        let n = self.num_params();
        if src.len() < n {
            return Err(NumericsError::Dimension {
                expected: n,
                got: src.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let w = l.weights.as_mut_slice();
            w.copy_from_slice(&src[off..off + w.len()]);
            off += w.len();
            let b = l.bias.len();
            l.bias.copy_from_slice(&src[off..off + b]);
            off += b;
        }
        Ok(off)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, None, &mut cache)?;
        Ok(cache.output().to_vec())
    }

    /// Forward pass recording everything backprop needs. `masks`, when given,
    /// holds one multiplicative mask per hidden layer output.
    pub fn forward_cached(
        &self,
        x: &[f64],
        masks: Option<&[Vec<f64>]>,
        cache: &mut MlpCache,
    ) -> Result<(), NumericsError> {
        if x.len() != self.input_width() {
            return Err(NumericsError::Dimension {
                expected: self.input_width(),
                got: x.len(),
            });
        }
        let n = self.layers.len();
        cache.inputs.resize(n, Vec::new());
        cache.pre.resize(n, Vec::new());
        cache.post.resize(n, Vec::new());
        cache.masks.resize(n, None);
        cache.inputs[0].clear();
        cache.inputs[0].extend_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let out_w = layer.fan_out();
            cache.pre[i].resize(out_w, 0.0);
            layer
                .weights
                .matvec_into(&cache.inputs[i], Some(&layer.bias), &mut cache.pre[i]);
            let (pre, post) = (&cache.pre[i], &mut cache.post[i]);
            post.clear();
            post.extend(pre.iter().map(|&p| layer.activation.apply(p)));
            let mask = if i + 1 < n { masks.map(|m| &m[i]) } else { None };
            match mask {
                Some(m) => {
                    if m.len() != out_w {
                        return Err(NumericsError::Dimension {
                            expected: out_w,
                            got: m.len(),
                        });
                    }
                    cache.masks[i] = Some(m.clone());
                }
                None => cache.masks[i] = None,
            }
            if i + 1 < n {
                let next = &mut cache.inputs[i + 1];
                next.clear();
                match &cache.masks[i] {
                    Some(m) => next.extend(cache.post[i].iter().zip(m).map(|(a, b)| a * b)),
                    None => next.extend_from_slice(&cache.post[i]),
                }
            }
        }
        Ok(())
    }

    /// Accumulates `∂⟨upstream, output⟩/∂θ` into `grad` (flat layout) for the
    /// pass stored in `cache`.
    pub fn backward_acc(
        &self,
        cache: &mut MlpCache,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<(), NumericsError> {
        if upstream.len() != self.output_width() {
            return Err(NumericsError::Dimension {
                expected: self.output_width(),
                got: upstream.len(),
            });
        }
        if grad.len() != self.num_params() {
            return Err(NumericsError::Dimension {
                expected: self.num_params(),
                got: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.num_params();
        }
        let MlpCache {
            inputs,
            pre,
            post,
            masks,
            delta,
            delta_prev,
        } = cache;
        delta.clear();
        delta.extend_from_slice(upstream);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if let Some(m) = &masks[i] {
                for (d, mk) in delta.iter_mut().zip(m) {
                    *d *= mk;
                }
            }
            for ((d, &p), &q) in delta.iter_mut().zip(&pre[i]).zip(&post[i]) {
                *d *= layer.activation.derivative(p, q);
            }
            let (fan_in, fan_out) = (layer.fan_in(), layer.fan_out());
            let base = offsets[i];
            let input = &inputs[i];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + r * fan_in..base + (r + 1) * fan_in];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += d * xi;
                }
            }
            let bias_base = base + fan_in * fan_out;
            for (g, d) in grad[bias_base..bias_base + fan_out].iter_mut().zip(delta.iter()) {
                *g += d;
            }
            if i > 0 {
                delta_prev.clear();
                delta_prev.resize(fan_in, 0.0);
                layer.weights.tr_matvec_acc(delta, delta_prev);
                std::mem::swap(delta, delta_prev);
            }
        }
        Ok(())
    }

    /// Forward output and the exact gradient of `⟨upstream, output⟩` with
    /// respect to every parameter.
    pub fn value_and_grad(
        &self,
        x: &[f64],
        upstream: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NumericsError> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, None, &mut cache)?;
        let mut grad = vec![0.0; self.num_params()];
        self.backward_acc(&mut cache, upstream, &mut grad)?;
        Ok((cache.output().to_vec(), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference, compare_gradients};

    #[test]
    fn param_count_formula() {
        let mut rng = Rng::new(0);
        let net = Mlp::new(&[5, 7, 3, 2], Activation::Tanh, &mut rng).unwrap();
        assert_eq!(net.num_params(), 5 * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
        assert_eq!(net.widths(), vec![5, 7, 3, 2]);
    }

    #[test]
    fn zero_network_outputs_bias() {
        let mut net = Mlp::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        net.layers_mut()[1].bias = vec![0.7, -1.2];
        let (out, grad) = net.value_and_grad(&[1.0, 2.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.7, -1.2]);
        // hidden activations are tanh(0) = 0 and output weights are zero,
        // so only the output-layer biases receive gradient
        let n = net.num_params();
        assert!(grad[..n - 2].iter().all(|&g| g == 0.0));
        assert_eq!(&grad[n - 2..], &[1.0, 1.0]);
    }

    #[test]
    fn linear_net_weight_gradient_is_outer_product() {
        let mut net = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
        net.set_params(&[0.3, -0.4, 1.1, 0.2, 0.05, -0.05]).unwrap();
        let x = [1.5, -2.0];
        let up = [0.7, -0.3];
        let (_, grad) = net.value_and_grad(&x, &up).unwrap();
        let expected_w = [0.7 * 1.5, 0.7 * -2.0, -0.3 * 1.5, -0.3 * -2.0];
        for (g, e) in grad[..4].iter().zip(&expected_w) {
            assert!((g - e).abs() < 1e-15);
        }
        assert_eq!(&grad[4..], &up);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..100u64 {
            let mut rng = Rng::new(seed);
            let din = 1 + rng.below(5);
            let hidden = 1 + rng.below(6);
            let dout = 1 + rng.below(3);
            let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Relu };
            let net = Mlp::new(&[din, hidden, dout], act, &mut rng).unwrap();
            let x: Vec<f64> = (0..din).map(|_| rng.normal()).collect();
            let up: Vec<f64> = (0..dout).map(|_| rng.normal()).collect();
            let (_, analytic) = net.value_and_grad(&x, &up).unwrap();
            let numeric = central_difference(&net.params(), 1e-5, |p| {
                let mut n = net.clone();
                n.set_params(p).unwrap();
                let out = n.forward(&x).unwrap();
                out.iter().zip(&up).map(|(a, b)| a * b).sum()
            });
            // finite differences straddling a ReLU kink are meaningless
            let mut cache = MlpCache::default();
            net.forward_cached(&x, None, &mut cache).unwrap();
            let near_kink = act == Activation::Relu && cache.pre[0].iter().any(|p| p.abs() < 1e-4);
            if !near_kink {
                if let Err(m) = compare_gradients(&analytic, &numeric, 1e-4, 1e-8) {
                    panic!("seed {seed}: {m}");
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let net = Mlp::zeros(&[3, 2], Activation::Identity).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.value_and_grad(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }
}
