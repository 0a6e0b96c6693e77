use rand::Rng;

use super::dense::{DenseNet, Gradients};
use crate::error::Result;

/// Relative errors below this denominator are measured absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub n_checked: usize,
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Compares backward() against central differences of `loss(forward(x))`.
/// `loss` returns the value and its gradient with respect to the output.
/// At most `per_layer` weights and biases of each layer are probed (all of
/// them when the layer is smaller), plus every input coordinate.
pub fn gradient_check<R: Rng, F>(
    net: &DenseNet,
    x: &[f64],
    loss: F,
    step: f64,
    per_layer: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (out, tape) = net.forward(x)?;
    let (_, dout) = loss(&out);
    let mut grads = Gradients::zeros_like(net);
    let dx = net.backward_into(&tape, &dout, 1.0, &mut grads)?;

    let eval = |n: &DenseNet, input: &[f64]| -> Result<f64> { Ok(loss(&n.predict(input)?).0) };
    let mut worst = 0.0f64;
    let mut count = 0;

    let mut probe = net.clone();
    let mut offset = 0;
    for (li, layer) in net.layers.iter().enumerate() {
        let nw = layer.weights.len();
        let nb = layer.bias.len();
        let mut picks: Vec<usize> = if nw + nb <= per_layer {
            (0..nw + nb).collect()
        } else {
            (0..per_layer).map(|_| rng.random_range(0..nw + nb)).collect()
        };
        picks.sort_unstable();
        picks.dedup();
        for p in picks {
            let analytic = if p < nw { grads.layers[li].weights[p] } else { grads.layers[li].bias[p - nw] };
            let idx = offset + p;
            let orig = *probe.param_mut(idx);
            *probe.param_mut(idx) = orig + step;
            let up = eval(&probe, x)?;
            *probe.param_mut(idx) = orig - step;
            let down = eval(&probe, x)?;
            *probe.param_mut(idx) = orig;
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * step)));
            count += 1;
        }
        offset += nw + nb;
    }
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + step;
        let up = eval(net, &xp)?;
        xp[i] = orig - step;
        let down = eval(net, &xp)?;
        xp[i] = orig;
        worst = worst.max(rel_err(dx[i], (up - down) / (2.0 * step)));
        count += 1;
    }
    Ok(GradCheckReport { max_rel_err: worst, n_checked: count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::Activation;
    use crate::rng::sub_stream;

    fn weighted_sum(c: Vec<f64>) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
        move |o: &[f64]| (o.iter().zip(&c).map(|(a, b)| a * b).sum(), c.clone())
    }

    #[test]
    fn every_activation_passes() {
        let acts = [Activation::Relu, Activation::Sigmoid, Activation::Identity];
        let lasts = [Activation::Softmax, Activation::Sigmoid, Activation::Identity, Activation::Relu];
        let mut rng = sub_stream(21, 0);
        for (i, &h) in acts.iter().enumerate() {
            for (j, &l) in lasts.iter().enumerate() {
                let net = DenseNet::xavier(&[4, 6, 5, 3], h, l, &mut sub_stream(21, (i * 4 + j) as u64 + 1));
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = gradient_check(&net, &x, weighted_sum(c), 1e-5, 1000, &mut rng).unwrap();
                assert!(r.max_rel_err < 1e-4, "{h:?}/{l:?}: {}", r.max_rel_err);
                assert_eq!(r.n_checked, net.n_params() + 4);
            }
        }
    }

    #[test]
    fn detects_wrong_gradient() {
        let net = DenseNet::xavier(&[3, 4, 2], Activation::Sigmoid, Activation::Identity, &mut sub_stream(22, 0));
        // claimed output gradient disagrees with the loss value
        let bad = |o: &[f64]| (o[0] + o[1], vec![1.0, 2.0]);
        let r = gradient_check(&net, &[0.1, 0.2, 0.3], bad, 1e-5, 100, &mut sub_stream(22, 1)).unwrap();
        assert!(r.max_rel_err > 1e-2);
    }
}
