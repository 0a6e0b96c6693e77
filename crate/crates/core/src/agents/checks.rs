//! Finite-difference checks over the network shapes used in training plus
//! random architectures.

use rand::Rng;
use serde::Serialize;

use super::{new_sensing_net, PolicyNet};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::neuralnet::{gradient_check, Activation, DenseNet};
use crate::rng::sub_stream;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Parameters probed per layer; smaller layers are probed exhaustively.
pub const GRADCHECK_PER_LAYER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchCheck {
    pub name: String,
    pub dims: Vec<usize>,
    pub max_rel_err: f64,
    pub n_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn check_net<R: Rng>(name: &str, net: &DenseNet, rng: &mut R) -> Result<ArchCheck> {
    let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |o: &[f64]| (o.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>(), c.clone());
    let r = gradient_check(net, &x, loss, GRADCHECK_STEP, GRADCHECK_PER_LAYER, rng)?;
    Ok(ArchCheck {
        name: name.to_string(),
        dims: net.dims(),
        max_rel_err: r.max_rel_err,
        n_checked: r.n_checked,
        tolerance: GRADCHECK_TOL,
        passed: r.max_rel_err < GRADCHECK_TOL,
    })
}

/// The sensing net, both policy subnetworks, then random architectures
/// until `n` checks have run.
pub fn gradcheck_suite(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<ArchCheck>> {
    let mut rng = sub_stream(seed, 0);
    let policy = PolicyNet::new(cfg, &mut sub_stream(seed, 1));
    let sensing = new_sensing_net(cfg, &mut sub_stream(seed, 2));
    let mut out = vec![
        check_net("sensing", &sensing, &mut rng)?,
        check_net("policy_feature", &policy.feature, &mut rng)?,
        check_net("policy_head", &policy.head, &mut rng)?,
    ];
    let hidden = [Activation::Relu, Activation::Sigmoid, Activation::Identity];
    let last = [Activation::Softmax, Activation::Sigmoid, Activation::Identity, Activation::Relu];
    let mut i = 0;
    while out.len() < n {
        let depth = rng.random_range(1..=4);
        let dims: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=40)).collect();
        let h = hidden[rng.random_range(0..hidden.len())];
        let l = last[rng.random_range(0..last.len())];
        let mut init = sub_stream(seed, 100 + i);
        let mut net = DenseNet::xavier(&dims, h, l, &mut init);
        // Zero biases behind a dead unit put later ReLUs exactly on their
        // kink, where central differences are meaningless.
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = init.random_range(-0.5..0.5));
        }
        net.touch();
        out.push(check_net(&format!("random_{i}"), &net, &mut rng)?);
        i += 1;
    }
    out.truncate(n.max(3));
    Ok(out)
}

/// Checks the three networks of a trained model.
pub fn gradcheck_model(model: &super::TrainedModel, seed: u64) -> Result<Vec<ArchCheck>> {
    let mut rng = sub_stream(seed, 3);
    Ok(vec![
        check_net("checkpoint_sensing", &model.sensing, &mut rng)?,
        check_net("checkpoint_policy_feature", &model.policy.feature, &mut rng)?,
        check_net("checkpoint_policy_head", &model.policy.head, &mut rng)?,
    ])
}
