use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|x| *x = x.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|x| *x = sigmoid(*x)),
            Activation::Softmax => softmax_in_place(z),
            Activation::Identity => {}
        }
    }

    /// Turn dL/d(output) into dL/d(pre-activation), given the output.
    pub fn backprop(self, out: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => grad.iter_mut().zip(out).for_each(|(g, &o)| {
                if o <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Sigmoid => grad.iter_mut().zip(out).for_each(|(g, &o)| *g *= o * (1.0 - o)),
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(out).map(|(g, o)| g * o).sum();
                grad.iter_mut().zip(out).for_each(|(g, &o)| *g = o * (*g - dot));
            }
            Activation::Identity => {}
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    z.iter_mut().for_each(|x| *x /= sum);
}

/// Affine map followed by an activation. Weights are row-major, `rows`
/// outputs by `cols` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize, activation: Activation) -> Self {
        Self { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows], activation }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// z = W x + b, without the activation.
    pub fn affine(&self, x: &[f64], z: &mut [f64]) {
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = self.bias[r] + dot(self.row(r), x);
        }
    }
}

/// Reverse pass through `layers`, where `values[i]` is the input of layer
/// `i` and `values[layers.len()]` the final output. `grad` is dL/d(output);
/// parameter gradients are added into `acc` and dL/d(input) is returned.
pub fn backprop_layers(layers: &[Layer], values: &[Vec<f64>], mut grad: Vec<f64>, acc: &mut [LayerGrad]) -> Vec<f64> {
    for (li, l) in layers.iter().enumerate().rev() {
        l.activation.backprop(&values[li + 1], &mut grad);
        let input = &values[li];
        let lg = &mut acc[li];
        let mut next = vec![0.0; l.cols];
        for r in 0..l.rows {
            let gr = grad[r];
            if gr == 0.0 {
                continue;
            }
            lg.bias[r] += gr;
            let row = &mut lg.weights[r * l.cols..(r + 1) * l.cols];
            row.iter_mut().zip(input).for_each(|(w, x)| *w += gr * x);
            next.iter_mut().zip(l.row(r)).for_each(|(n, w)| *n += gr * w);
        }
        grad = next;
    }
    grad
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// Every instance (clones included) carries its own identity and a
/// generation counter so tapes from other parameters are rejected.
#[derive(Debug)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    generation: u64,
    id: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        Self { layers: self.layers.clone(), generation: 0, id: fresh_id() }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations cached by a forward pass: `values[0]` is the input and
/// `values[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct Tape {
    pub values: Vec<Vec<f64>>,
    generation: u64,
    net_id: u64,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("tape holds the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, s: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += s * y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += s * y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x *= s);
            l.bias.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|&x| x == 0.0)
    }
}

impl DenseNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].rows != w[1].cols {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].rows,
                    i + 1,
                    w[1].cols
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::Shape(format!("layer {i} parameter lengths do not match {}x{}", l.rows, l.cols)));
            }
            if l.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(Error::Shape(format!("softmax on hidden layer {i}")));
            }
        }
        Ok(Self { layers, generation: 0, id: fresh_id() })
    }

    /// Xavier-uniform weights, zero biases. `dims` lists the widths from
    /// input to output.
    pub fn xavier<R: Rng>(dims: &[usize], hidden: Activation, last: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (cols, rows) = (dims[i], dims[i + 1]);
                let a = (6.0 / (cols + rows) as f64).sqrt();
                let weights = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
                let act = if i + 1 == n { last } else { hidden };
                Layer { rows, cols, weights, bias: vec![0.0; rows], activation: act }
            })
            .collect();
        Self::from_layers(layers).expect("dims chain by construction")
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.rows)).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Must be called after any direct mutation of the parameters so that
    /// older tapes are rejected.
    pub fn touch(&mut self) {
        self.generation += 1;
    }

    pub fn spec_string(&self) -> String {
        self.layers
            .iter()
            .map(|l| format!("{}x{}:{}", l.rows, l.cols, l.activation.name()))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn spec_hash(&self) -> String {
        hex::encode(Sha256::digest(self.spec_string().as_bytes()))
    }

    fn id(&self) -> u64 {
        self.id
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for l in &self.layers {
            let mut z = vec![0.0; l.rows];
            l.affine(&cur, &mut z);
            l.activation.apply(&mut z);
            cur = z;
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for l in &self.layers {
            let mut z = vec![0.0; l.rows];
            l.affine(values.last().unwrap(), &mut z);
            l.activation.apply(&mut z);
            values.push(z);
        }
        let out = values.last().unwrap().clone();
        Ok((out, Tape { values, generation: self.generation, net_id: self.id() }))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("input length {} but network expects {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<Gradients> {
        let mut g = Gradients::zeros_like(self);
        self.backward_into(tape, output_grad, 1.0, &mut g)?;
        Ok(g)
    }

    /// Accumulates `scale`·gradients into `acc` and returns dL/d(input).
    pub fn backward_into(&self, tape: &Tape, output_grad: &[f64], scale: f64, acc: &mut Gradients) -> Result<Vec<f64>> {
        if tape.generation != self.generation || tape.net_id != self.id() || tape.values.len() != self.layers.len() + 1 {
            return Err(Error::Contract("tape does not come from the current parameters".into()));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient length {} but network outputs {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        let grad: Vec<f64> = output_grad.iter().map(|g| g * scale).collect();
        Ok(backprop_layers(&self.layers, &tape.values, grad, &mut acc.layers))
    }

    /// params ← params − lr·grads
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= lr * d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= lr * d);
        }
        self.touch();
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    /// Flat view of parameter `idx` in (weights, bias) order per layer.
    pub fn param_mut(&mut self, mut idx: usize) -> &mut f64 {
        for l in &mut self.layers {
            if idx < l.weights.len() {
                return &mut l.weights[idx];
            }
            idx -= l.weights.len();
            if idx < l.bias.len() {
                return &mut l.bias[idx];
            }
            idx -= l.bias.len();
        }
        panic!("parameter index out of range")
    }
}
