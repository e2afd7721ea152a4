use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::flat::{FlatWeights, TensorLayout};
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation's own output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(output, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Sigmoid => grad.zip_mut_with(output, |g, &a| *g *= a * (1.0 - a)),
            Activation::Linear => {}
        }
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Layer sizes and activations of a fully connected network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Topology {
    /// `input → 300 → 100 → output` with ReLU hidden layers.
    pub fn two_hidden(input: usize, output: usize, output_activation: Activation) -> Self {
        Self {
            input,
            hidden: vec![300, 100],
            output,
            hidden_activation: Activation::Relu,
            output_activation,
        }
    }

    fn sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(self.input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.output);
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.sizes().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs × outputs`, so a batch `X` maps to `X·W + b`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Fully connected feed-forward network.
///
/// Every parameter mutation assigns a fresh generation tag so that a
/// [`Cache`] taken before the mutation is rejected by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// `activations[0]` is the input batch, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Array2<f64>>,
    generation: u64,
}

impl Cache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients of a scalar loss with respect to every parameter and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Array2<f64>,
}

impl Gradients {
    /// Parameter gradients in [`Mlp::flatten`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter());
            out.extend(g.bias.iter());
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|&v| v == 0.0))
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::Topology("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(NnError::Dimension {
                    context: if i == 0 { "layer chain" } else { "layer chain (deep)" },
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        for layer in &layers {
            if layer.bias.len() != layer.outputs() {
                return Err(NnError::Dimension {
                    context: "bias length",
                    expected: layer.outputs(),
                    got: layer.bias.len(),
                });
            }
        }
        Ok(Self {
            layers,
            generation: next_generation(),
        })
    }

    /// He-uniform weights, zero biases. A sigmoid output layer is scaled down
    /// by 10 so initial outputs sit near 0.5.
    pub fn init(topology: &Topology, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with_rng(topology, &mut rng)
    }

    pub fn init_with_rng<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Self {
        let sizes = topology.sizes();
        let depth = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let last = i + 1 == depth;
                let activation = if last {
                    topology.output_activation
                } else {
                    topology.hidden_activation
                };
                let mut limit = (6.0 / w[0] as f64).sqrt();
                if last && activation == Activation::Sigmoid {
                    limit *= 0.1;
                }
                let weights = Array2::from_shape_simple_fn((w[0], w[1]), || {
                    rng.random_range(-limit..=limit)
                });
                Layer {
                    weights,
                    bias: Array1::zeros(w[1]),
                    activation,
                }
            })
            .collect();
        Self {
            layers,
            generation: next_generation(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Mutable access to one layer; invalidates outstanding caches.
    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        self.generation = next_generation();
        &mut self.layers[index]
    }

    /// Forward pass over a batch (`rows = samples`).
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Cache)> {
        if input.ncols() != self.input_dim() {
            return Err(NnError::Dimension {
                context: "forward input",
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let prev = activations.last().expect("non-empty");
            let mut z = prev.dot(&layer.weights);
            z += &layer.bias;
            layer.activation.apply(&mut z);
            activations.push(z);
        }
        let output = activations.last().expect("non-empty").clone();
        Ok((
            output,
            Cache {
                activations,
                generation: self.generation,
            },
        ))
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|_| {
            NnError::Dimension {
                context: "forward input",
                expected: self.input_dim(),
                got: input.len(),
            }
        })?;
        let (out, cache) = self.forward_batch(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Inference without keeping the cache around.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(NnError::Dimension {
                context: "forward input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut current = Array1::from(input.to_vec());
        for layer in &self.layers {
            let mut z = current.dot(&layer.weights);
            z += &layer.bias;
            match layer.activation {
                Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
                Activation::Sigmoid => z.mapv_inplace(sigmoid),
                Activation::Linear => {}
            }
            current = z;
        }
        Ok(current.to_vec())
    }

    fn check_backward(&self, cache: &Cache, output_grad: &Array2<f64>) -> Result<()> {
        if cache.generation != self.generation || cache.activations.len() != self.layers.len() + 1
        {
            return Err(NnError::StaleCache);
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(NnError::Dimension {
                context: "output gradient",
                expected: out.len(),
                got: output_grad.len(),
            });
        }
        Ok(())
    }

    /// Exact gradients of a scalar loss given `dLoss/dOutput` for the cached batch.
    ///
    /// Parameter gradients are summed over the batch; scale `output_grad`
    /// accordingly for a mean loss.
    pub fn backward(&self, cache: &Cache, output_grad: &Array2<f64>) -> Result<Gradients> {
        self.check_backward(cache, output_grad)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&cache.activations[l + 1], &mut delta);
            let weights = cache.activations[l].t().dot(&delta);
            let weights = if weights.is_standard_layout() {
                weights
            } else {
                weights.as_standard_layout().into_owned()
            };
            let bias = delta.sum_axis(Axis(0));
            layers.push(LayerGrad { weights, bias });
            delta = delta.dot(&layer.weights.t());
        }
        layers.reverse();
        Ok(Gradients {
            layers,
            input: delta,
        })
    }

    /// Gradient with respect to the input only; skips the weight products.
    pub fn input_gradient(&self, cache: &Cache, output_grad: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_backward(cache, output_grad)?;
        let mut delta = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&cache.activations[l + 1], &mut delta);
            delta = delta.dot(&layer.weights.t());
        }
        Ok(delta)
    }

    /// Applies one Adam step, descending along `grads`.
    pub fn adam_step(&mut self, grads: &Gradients, opt: &mut AdamState) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(NnError::Dimension {
                context: "gradient layers",
                expected: self.layers.len(),
                got: grads.layers.len(),
            });
        }
        let mut slices: Vec<(&mut [f64], &[f64])> = Vec::with_capacity(2 * self.layers.len());
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            if layer.weights.dim() != grad.weights.dim() || layer.bias.len() != grad.bias.len() {
                return Err(NnError::Dimension {
                    context: "gradient shape",
                    expected: layer.weights.len() + layer.bias.len(),
                    got: grad.weights.len() + grad.bias.len(),
                });
            }
            slices.push((
                layer.weights.as_slice_mut().expect("standard layout"),
                grad.weights.as_slice().expect("standard layout"),
            ));
            slices.push((
                layer.bias.as_slice_mut().expect("standard layout"),
                grad.bias.as_slice().expect("standard layout"),
            ));
        }
        opt.step_slices(&mut slices)?;
        self.generation = next_generation();
        Ok(())
    }

    /// `self ← tau·source + (1 − tau)·self`, parameter-wise.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        self.check_same_shape(source)?;
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            dst.weights
                .zip_mut_with(&src.weights, |d, &s| *d = tau * s + (1.0 - tau) * *d);
            dst.bias
                .zip_mut_with(&src.bias, |d, &s| *d = tau * s + (1.0 - tau) * *d);
        }
        self.generation = next_generation();
        Ok(())
    }

    pub fn copy_from(&mut self, source: &Mlp) -> Result<()> {
        self.check_same_shape(source)?;
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            dst.weights.assign(&src.weights);
            dst.bias.assign(&src.bias);
        }
        self.generation = next_generation();
        Ok(())
    }

    fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.layout() != other.layout() {
            return Err(NnError::Layout("networks have different shapes".into()));
        }
        Ok(())
    }

    /// Tensor layout in flatten order: per layer, weights then bias.
    pub fn layout(&self) -> Vec<TensorLayout> {
        let mut offset = 0;
        let mut layout = Vec::with_capacity(2 * self.layers.len());
        for layer in &self.layers {
            layout.push(TensorLayout {
                rows: layer.inputs(),
                cols: layer.outputs(),
                offset,
            });
            offset += layer.weights.len();
            layout.push(TensorLayout {
                rows: 1,
                cols: layer.outputs(),
                offset,
            });
            offset += layer.bias.len();
        }
        layout
    }

    pub fn flatten(&self) -> FlatWeights {
        let mut values = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            values.extend(layer.weights.iter());
            values.extend(layer.bias.iter());
        }
        FlatWeights {
            values,
            layout: self.layout(),
        }
    }

    /// Overwrites every parameter from `flat`, whose layout must match this network.
    pub fn unflatten(&mut self, flat: &FlatWeights) -> Result<()> {
        if flat.layout != self.layout() {
            return Err(NnError::Layout(format!(
                "expected {} tensors / {} values, got {} tensors / {} values",
                2 * self.layers.len(),
                self.parameter_count(),
                flat.layout.len(),
                flat.values.len()
            )));
        }
        flat.validate()?;
        let mut offset = 0;
        for layer in &mut self.layers {
            let n = layer.weights.len();
            layer
                .weights
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&flat.values[offset..offset + n]);
            offset += n;
            let n = layer.bias.len();
            layer
                .bias
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&flat.values[offset..offset + n]);
            offset += n;
        }
        self.generation = next_generation();
        Ok(())
    }

    /// Builds a network from flat weights plus one activation per layer.
    pub fn from_flat(flat: &FlatWeights, activations: &[Activation]) -> Result<Self> {
        flat.validate()?;
        if flat.layout.len() != 2 * activations.len() {
            return Err(NnError::Layout(format!(
                "{} tensors cannot form {} layers",
                flat.layout.len(),
                activations.len()
            )));
        }
        let layers = flat
            .layout
            .chunks(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (w, b) = (&pair[0], &pair[1]);
                if b.rows != 1 || b.cols != w.cols {
                    return Err(NnError::Layout("bias tensor does not follow its weights".into()));
                }
                let weights = Array2::from_shape_vec(
                    (w.rows, w.cols),
                    flat.values[w.offset..w.offset + w.len()].to_vec(),
                )
                .map_err(|e| NnError::Layout(e.to_string()))?;
                let bias = Array1::from(flat.values[b.offset..b.offset + b.len()].to_vec());
                Ok(Layer {
                    weights,
                    bias,
                    activation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
