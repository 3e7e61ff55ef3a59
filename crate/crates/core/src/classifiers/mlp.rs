//! Feed-forward network: dense + ReLU + dropout per hidden layer, then a
//! softmax output, trained with Adam on categorical cross-entropy.
//!
//! Weights are stored input-major (`w[i * out + o]`) so a sparse input row
//! touches contiguous memory. Dropout is inverted (kept units are scaled by
//! `1 / (1 - rate)`) and only applied while training.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::argmax;
use super::boosting::softmax;
use crate::error::{Result, TriageError};
use crate::features::{Dataset, SparseVector};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: vec![512, 256], dropout: 0.5, learning_rate: 0.001, epochs: 30, batch_size: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Layer {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        Layer {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect(),
            biases: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Layer {
        Layer {
            inputs: self.inputs,
            outputs: self.outputs,
            weights: vec![0.0; self.weights.len()],
            biases: vec![0.0; self.biases.len()],
        }
    }

    fn forward_dense(&self, input: &[f64]) -> Vec<f64> {
        let mut z = self.biases.clone();
        for (i, &a) in input.iter().enumerate() {
            if a != 0.0 {
                let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                z.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
            }
        }
        z
    }

    fn forward_sparse(&self, input: &SparseVector) -> Vec<f64> {
        let mut z = self.biases.clone();
        for &(i, a) in input.entries() {
            let i = i as usize;
            let row = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            z.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
        }
        z
    }
}

/// Trained network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub dropout: f64,
}

/// Per-sample activations kept for backpropagation.
struct Trace {
    /// Post-activation (and post-dropout) output of each hidden layer.
    hidden: Vec<Vec<f64>>,
    /// Dropout multipliers (0 or 1/(1-rate)) per hidden layer, if active.
    masks: Vec<Option<Vec<f64>>>,
    probabilities: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn initialize(inputs: usize, hidden: &[usize], n_classes: usize, dropout: f64, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let layers = sizes.windows(2).map(|w| Layer::glorot(w[0], w[1], &mut rng)).collect();
        Mlp { layers, dropout }
    }

    pub(crate) fn fit(
        data: &Dataset,
        targets: &[usize],
        n_classes: usize,
        params: &MlpParams,
        seed: u64,
    ) -> Result<Mlp> {
        let mut net = Mlp::initialize(data.dimension(), &params.hidden, n_classes, params.dropout, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let mut adam = Adam::new(&net);
        let mut order: Vec<usize> = (0..data.len()).collect();
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let inputs: Vec<&SparseVector> = batch.iter().map(|&i| &data.vectors[i]).collect();
                let labels: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
                let (loss, grads) = net.loss_and_gradients(&inputs, &labels, Some(&mut rng));
                if !loss.is_finite() {
                    return Err(TriageError::TrainingDiverged { epoch });
                }
                adam.step(&mut net, &grads, params.learning_rate);
            }
        }
        Ok(net)
    }

    fn forward(&self, x: &SparseVector, rng: Option<&mut ChaCha8Rng>) -> Trace {
        let mut rng = rng;
        let last = self.layers.len() - 1;
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(last);
        let mut masks = Vec::with_capacity(last);
        for (l, layer) in self.layers[..last].iter().enumerate() {
            let mut a = if l == 0 { layer.forward_sparse(x) } else { layer.forward_dense(&hidden[l - 1]) };
            a.iter_mut().for_each(|v| *v = v.max(0.0));
            let mask = match rng.as_deref_mut() {
                Some(rng) if self.dropout > 0.0 => {
                    let keep = 1.0 / (1.0 - self.dropout);
                    let m: Vec<f64> =
                        (0..a.len()).map(|_| if rng.gen::<f64>() < self.dropout { 0.0 } else { keep }).collect();
                    a.iter_mut().zip(&m).for_each(|(v, m)| *v *= m);
                    Some(m)
                }
                _ => None,
            };
            hidden.push(a);
            masks.push(mask);
        }
        let logits = match hidden.last() {
            Some(h) => self.layers[last].forward_dense(h),
            None => self.layers[last].forward_sparse(x),
        };
        Trace { hidden, masks, probabilities: softmax(&logits) }
    }

    /// Mean cross-entropy over the batch and its gradient with respect to
    /// every parameter. Dropout is applied only when `rng` is given.
    pub fn loss_and_gradients(
        &self,
        batch: &[&SparseVector],
        labels: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (f64, Vec<Layer>) {
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (&x, &y) in batch.iter().zip(labels) {
            let trace = self.forward(x, rng.as_deref_mut());
            loss -= trace.probabilities[y].ln();

            // dL/dz for the softmax layer.
            let mut delta: Vec<f64> = trace.probabilities.clone();
            delta[y] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);

            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let grad = &mut grads[l];
                grad.biases.iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
                if l == 0 {
                    for &(i, a) in x.entries() {
                        let i = i as usize;
                        let row = &mut grad.weights[i * layer.outputs..(i + 1) * layer.outputs];
                        row.iter_mut().zip(&delta).for_each(|(g, d)| *g += a * d);
                    }
                    break;
                }
                let input = &trace.hidden[l - 1];
                let mut upstream = vec![0.0; layer.inputs];
                for (i, &a) in input.iter().enumerate() {
                    let w_row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                    if a != 0.0 {
                        let g_row = &mut grad.weights[i * layer.outputs..(i + 1) * layer.outputs];
                        g_row.iter_mut().zip(&delta).for_each(|(g, d)| *g += a * d);
                    }
                    upstream[i] = w_row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                }
                // Through dropout and ReLU: the stored activation is zero
                // exactly where either blocked the unit.
                let mask = trace.masks[l - 1].as_ref();
                for (i, u) in upstream.iter_mut().enumerate() {
                    if input[i] <= 0.0 {
                        *u = 0.0;
                    } else if let Some(m) = mask {
                        *u *= m[i];
                    }
                }
                delta = upstream;
            }
        }
        (loss * scale, grads)
    }

    pub fn probabilities(&self, x: &SparseVector) -> Vec<f64> {
        self.forward(x, None).probabilities
    }

    pub(crate) fn predict_index(&self, x: &SparseVector) -> usize {
        argmax(&self.probabilities(x))
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flat_parameters(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) {
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().chain(layer.biases.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
    }
}

/// Flattens parameters (or gradients) in [`Mlp::flat_parameters`] order.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
}

struct Adam {
    first: Vec<Layer>,
    second: Vec<Layer>,
    step: i32,
}

impl Adam {
    fn new(net: &Mlp) -> Adam {
        let zeros: Vec<Layer> = net.layers.iter().map(Layer::zeros_like).collect();
        Adam { first: zeros.clone(), second: zeros, step: 0 }
    }

    fn step(&mut self, net: &mut Mlp, grads: &[Layer], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let Layer { weights, biases, .. } = layer;
            let params = weights.iter_mut().chain(biases.iter_mut());
            let g = grads[l].weights.iter().chain(&grads[l].biases);
            let Layer { weights: mw, biases: mb, .. } = &mut self.first[l];
            let m = mw.iter_mut().chain(mb.iter_mut());
            let Layer { weights: vw, biases: vb, .. } = &mut self.second[l];
            let v = vw.iter_mut().chain(vb.iter_mut());
            for (((p, g), m), v) in params.zip(g).zip(m).zip(v) {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
            }
        }
    }
}
