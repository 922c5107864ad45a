use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::nn::{Activation, Aggregation, DenseMatrix, Propagator};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Mlp,
}

/// Layer stack description: `layer_dims = [input, hidden..., output]`.
///
/// Hidden layers use ReLU; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ModelKind,
    pub layer_dims: Vec<usize>,
}

pub const DEFAULT_HIDDEN: usize = 32;

impl ArchitectureSpec {
    /// `num_layers` weight layers with `hidden` units between input and output.
    pub fn new(
        kind: ModelKind,
        input: usize,
        hidden: usize,
        output: usize,
        num_layers: usize,
    ) -> Result<Self> {
        let mut layer_dims = vec![input];
        layer_dims.extend(std::iter::repeat_n(hidden, num_layers.saturating_sub(1)));
        layer_dims.push(output);
        let spec = Self { kind, layer_dims };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.num_layers();
        if !(2..=5).contains(&layers) {
            return Err(Error::InvalidParameter(format!(
                "{layers} layers; supported range is 2 to 5"
            )));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::InvalidParameter("layer width 0".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    /// Layer by layer: weight entries (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    /// Borrowed tensors in the order of [`Network::parameters_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
            .collect()
    }
}

pub(crate) struct ForwardCache {
    inputs: Vec<DenseMatrix>,
    pre_activations: Vec<DenseMatrix>,
}

/// A stack of message-passing (GCN) or plain dense (MLP) layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ArchitectureSpec,
    layers: Vec<DenseLayer>,
}

impl Network {
    /// Weights uniform in `[-1/√fan_in, 1/√fan_in]`, biases zero.
    pub fn init(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_for(seed, "weight-init");
        let layers = spec
            .layer_dims
            .windows(2)
            .map(|d| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..=bound))
                    .collect();
                DenseLayer {
                    weight: DenseMatrix::from_vec(fan_in, fan_out, data).expect("sized"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn from_layers(spec: ArchitectureSpec, layers: Vec<DenseLayer>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.num_layers() {
            return Err(Error::InvalidCheckpoint(format!(
                "{} layers stored, architecture has {}",
                layers.len(),
                spec.num_layers()
            )));
        }
        for (k, (layer, d)) in layers.iter().zip(spec.layer_dims.windows(2)).enumerate() {
            if layer.weight.shape() != (d[0], d[1]) || layer.bias.len() != d[1] {
                return Err(Error::InvalidCheckpoint(format!(
                    "layer {k}: weight {:?} / bias {} do not match {}x{}",
                    layer.weight.shape(),
                    layer.bias.len(),
                    d[0],
                    d[1]
                )));
            }
            if !layer.weight.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidCheckpoint(format!("layer {k}: non-finite value")));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn parameter_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data().len(), l.bias.len()])
            .collect()
    }

    /// Parameter tensors in the same order as [`Gradients::flatten`].
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_parameters()
            )));
        }
        let mut offset = 0;
        for tensor in self.parameters_mut() {
            let n = tensor.len();
            tensor.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Aggregation operator this network uses on `graph`.
    pub fn propagator(&self, graph: &LabeledGraph, edge_weights: Option<&[f64]>) -> Result<Propagator> {
        match self.spec.kind {
            ModelKind::Gcn => Propagator::gcn(graph, edge_weights, Aggregation::Mean),
            ModelKind::Mlp => Ok(Propagator::identity(graph.num_nodes())),
        }
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            Activation::Identity
        } else {
            Activation::Relu
        }
    }

    fn check_input(&self, features: &DenseMatrix) -> Result<()> {
        if features.cols() != self.spec.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                self.spec.input_dim()
            )));
        }
        Ok(())
    }

    /// Output of the last layer on `graph` (unit weights when `edge_weights` is `None`).
    pub fn forward(&self, graph: &LabeledGraph, edge_weights: Option<&[f64]>) -> Result<DenseMatrix> {
        self.check_input(graph.features())?;
        let prop = self.propagator(graph, edge_weights)?;
        let (out, _) = self.forward_with(&prop, graph.features(), false)?;
        Ok(out)
    }

    pub(crate) fn forward_with(
        &self,
        prop: &Propagator,
        features: &DenseMatrix,
        keep_cache: bool,
    ) -> Result<(DenseMatrix, Option<ForwardCache>)> {
        self.check_input(features)?;
        let mut inputs = Vec::new();
        let mut pre_activations = Vec::new();
        let mut h = features.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = prop.apply(&h.matmul(&layer.weight)?)?;
            z.add_row_vector(&layer.bias)?;
            let act = self.activation(k);
            let next = z.map(|x| act.apply(x));
            if keep_cache {
                inputs.push(std::mem::replace(&mut h, next));
                pre_activations.push(z);
            } else {
                h = next;
            }
        }
        let cache = keep_cache.then_some(ForwardCache {
            inputs,
            pre_activations,
        });
        Ok((h, cache))
    }

    /// Backpropagates `d_output` (gradient w.r.t. the last layer's output).
    pub(crate) fn backward(
        &self,
        prop: &Propagator,
        cache: &ForwardCache,
        d_output: &DenseMatrix,
    ) -> Result<Gradients> {
        let n_layers = self.layers.len();
        let mut weights = vec![DenseMatrix::zeros(0, 0); n_layers];
        let mut biases = vec![Vec::new(); n_layers];
        let mut upstream = d_output.clone();
        for k in (0..n_layers).rev() {
            let act = self.activation(k);
            let pre = &cache.pre_activations[k];
            let mut dz = upstream;
            for (g, &z) in dz.data_mut().iter_mut().zip(pre.data()) {
                *g *= act.derivative(z);
            }
            biases[k] = dz.column_sums();
            let spread = prop.apply_transpose(&dz)?;
            weights[k] = cache.inputs[k].transpose_matmul(&spread)?;
            upstream = if k > 0 {
                spread.matmul_transpose(&self.layers[k].weight)?
            } else {
                DenseMatrix::zeros(0, 0)
            };
        }
        Ok(Gradients { weights, biases })
    }
}
