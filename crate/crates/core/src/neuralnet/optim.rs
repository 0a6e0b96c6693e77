use super::dense::{DenseNet, Gradients};
use crate::config::OptimizerKind;

/// Learning rate after step decay: lr0·factor^⌊epoch/every⌋.
pub fn step_decay(lr0: f64, epoch: usize, every: usize, factor: f64) -> f64 {
    if every == 0 {
        return lr0;
    }
    lr0 * factor.powi((epoch / every) as i32)
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients, lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let g = &grads.layers[li];
            let m = &mut self.m.layers[li];
            let v = &mut self.v.layers[li];
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(g.bias.iter());
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, &gi), mi), vi) in params.zip(gs).zip(ms).zip(vs) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
        net.touch();
    }
}

/// Descent-convention optimizer owned by a trainer, one per network.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam(Box<Adam>),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &DenseNet) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(Box::new(Adam::new(net))),
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients, lr: f64) {
        match self {
            Optimizer::Sgd => net.sgd_step(grads, lr),
            Optimizer::Adam(a) => a.step(net, grads, lr),
        }
    }
}
