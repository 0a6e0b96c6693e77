//! Pseudoinverse decoding, the sensing network, and reward evaluation of a
//! control sequence.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use super::Objective;
use crate::beamforming::{compute_sinr, sinr_db, ControlSequence, JammerDraw, RadioSystem, ReceivedBatch, SelectedRows};
use crate::config::{CombinerMode, ExperimentConfig};
use crate::error::{Error, Result};
use crate::losses::{accuracy, cross_entropy_labels, scenario_accuracy, SensingOutput, PROB_CLIP};
use crate::neuralnet::{pinv, Activation, DenseNet, Gradients, Optimizer};
use crate::scene::{sample_jammer_position, Scenario};

/// v̂ = Γ_Tx⁺ ŷ
pub fn decode_measurement(batch: &ReceivedBatch) -> DVector<Complex64> {
    pinv(&batch.gamma_tx) * &batch.y_hat
}

/// (re v̂, im v̂) stacked.
pub fn sensing_input(v_hat: &[Complex64]) -> Vec<f64> {
    v_hat.iter().map(|z| z.re).chain(v_hat.iter().map(|z| z.im)).collect()
}

/// 2M → hidden (relu) → M (sigmoid).
pub fn new_sensing_net<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> DenseNet {
    let m = cfg.n_cells();
    let mut dims = vec![2 * m];
    dims.extend(&cfg.network.sensing_hidden);
    dims.push(m);
    DenseNet::xavier(&dims, Activation::Relu, Activation::Sigmoid, rng)
}

pub fn sense(net: &DenseNet, v_hat: &[Complex64]) -> Result<SensingOutput> {
    Ok(SensingOutput::new(&net.predict(&sensing_input(v_hat))?))
}

/// dL/dp of the clipped per-cell cross-entropy.
pub fn cross_entropy_grad(probs: &[f64], labels: &[f64], scale: f64) -> Vec<f64> {
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if p < PROB_CLIP || p > 1.0 - PROB_CLIP {
                0.0
            } else {
                scale * (p - y) / (p * (1.0 - p))
            }
        })
        .collect()
}

/// Gradient of the mean cross-entropy over `inputs`; returns the loss.
pub fn sensing_gradients(net: &DenseNet, inputs: &[&[f64]], labels: &[&[f64]]) -> Result<(f64, Gradients)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Shape("sensing batch needs matching, non-empty inputs and labels".into()));
    }
    let n = inputs.len() as f64;
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(labels) {
        let (out, tape) = net.forward(x)?;
        loss += cross_entropy_labels(&out, y);
        net.backward_into(&tape, &cross_entropy_grad(&out, y, 1.0 / n), 1.0, &mut grads)?;
    }
    Ok((loss / n, grads))
}

/// One descent step on the mean cross-entropy of the batch. Returns the
/// loss before the step.
pub fn sensing_update(
    net: &mut DenseNet,
    opt: &mut Optimizer,
    inputs: &[&[f64]],
    labels: &[&[f64]],
    lr: f64,
) -> Result<f64> {
    let (loss, grads) = sensing_gradients(net, inputs, labels)?;
    opt.step(net, &grads, lr);
    Ok(loss)
}

/// A decoded measurement ready for the sensing network.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub scenario: usize,
    pub input: Vec<f64>,
    pub sinr: f64,
}

/// Synthesis that falls back to summation when MRC has no channel to match.
pub fn synthesize_with_fallback<R: Rng>(
    system: &RadioSystem,
    rows: &SelectedRows,
    scenario: &Scenario,
    rng: &mut R,
    jammer: Option<JammerDraw>,
) -> Result<ReceivedBatch> {
    match system.synthesize(rows, scenario, rng, jammer) {
        Err(Error::DegenerateChannel) if system.combiner != CombinerMode::Sum => {
            let mut sum = system.clone();
            sum.combiner = CombinerMode::Sum;
            sum.synthesize(rows, scenario, rng, jammer)
        }
        r => r,
    }
}

/// Where the measurements of one reward estimate come from.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementPlan<'a> {
    pub system: &'a RadioSystem,
    pub scenarios: &'a [Scenario],
    pub subset: &'a [usize],
    pub n_mc: usize,
    /// Jamming power in watts; `None` for a clean link.
    pub jam_power_w: Option<f64>,
}

/// `n_mc` noise (and jammer) draws for each scenario in the subset, decoded
/// with the pseudoinverse of that scenario's Γ_Tx.
pub fn collect_measurements<R1: Rng, R2: Rng>(
    ctrl: &ControlSequence,
    plan: &MeasurementPlan,
    noise_rng: &mut R1,
    jammer_rng: &mut R2,
) -> Result<Vec<Measurement>> {
    let rows = plan.system.select_rows(ctrl);
    let mut out = Vec::with_capacity(plan.subset.len() * plan.n_mc);
    for &si in plan.subset {
        let scen = &plan.scenarios[si];
        let mut decoder: Option<DMatrix<Complex64>> = None;
        for _ in 0..plan.n_mc {
            let jam = plan.jam_power_w.map(|power_w| JammerDraw {
                pos: sample_jammer_position(&plan.system.scene, jammer_rng),
                power_w,
            });
            let batch = synthesize_with_fallback(plan.system, &rows, scen, noise_rng, jam)?;
            let p = decoder.get_or_insert_with(|| pinv(&batch.gamma_tx));
            let v_hat = &*p * &batch.y_hat;
            out.push(Measurement {
                scenario: si,
                input: sensing_input(v_hat.as_slice()),
                sinr: compute_sinr(&batch, scen),
            });
        }
    }
    Ok(out)
}

/// Averages over a set of measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub reward: f64,
    pub ce: f64,
    pub combined: f64,
    pub mean_sinr_db: f64,
    pub accuracy: f64,
    pub scenario_accuracy: f64,
}

pub fn score(
    net: &DenseNet,
    measurements: &[Measurement],
    scenarios: &[Scenario],
    objective: Objective,
    beta: f64,
) -> Result<Score> {
    if measurements.is_empty() {
        return Err(Error::Shape("no measurements to score".into()));
    }
    let n = measurements.len() as f64;
    let (mut ce, mut bonus, mut db, mut acc, mut sacc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for meas in measurements {
        let scen = &scenarios[meas.scenario];
        let out = SensingOutput::new(&net.predict(&meas.input)?);
        ce += cross_entropy_labels(&out.probs, &scen.labels());
        bonus += (1.0 + meas.sinr).log2();
        db += sinr_db(meas.sinr);
        acc += accuracy(&out, scen, 0.5);
        sacc += scenario_accuracy(&out, scen, 0.5);
    }
    let (ce, bonus) = (ce / n, bonus / n);
    let reward = match objective {
        Objective::P1 => -ce,
        Objective::P2 => -ce + beta * bonus,
    };
    Ok(Score {
        reward,
        ce,
        combined: ce - beta * bonus,
        mean_sinr_db: db / n,
        accuracy: acc / n,
        scenario_accuracy: sacc / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamforming::synthesize_batch;
    use crate::neuralnet::{gradient_check, Layer};
    use crate::rng::{stream, sub_stream, Stream};
    use crate::scene::sample_scenarios;

    #[test]
    fn noise_free_recovery_with_enough_frames() {
        let mut cfg = ExperimentConfig::default();
        cfg.n_frames = 30;
        cfg.noise_power_w = 1e-300;
        let sys = RadioSystem::from_config(&cfg).unwrap();
        let scens = sample_scenarios(&cfg, &mut stream(3, Stream::Scenarios));
        let seq = ControlSequence::random(&cfg, &mut sub_stream(3, 9));
        for scen in scens.iter().filter(|s| s.occupancy.iter().any(|&o| o)).take(5) {
            let b = synthesize_batch(&seq, &sys, scen, &mut sub_stream(0, 0), None).unwrap();
            let v = decode_measurement(&b);
            let truth = DVector::from_column_slice(&scen.reflection);
            assert!((&v - &truth).norm() < 1e-8 * truth.norm());
        }
    }

    #[test]
    fn identity_gamma_passes_through() {
        let y = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.0)]);
        let batch = ReceivedBatch {
            y_hat: y.clone(),
            gamma_tx: DMatrix::identity(2, 2),
            gamma_j: None,
            y_jlos: None,
            noise_power: vec![0.0; 2],
        };
        assert!((decode_measurement(&batch) - y).norm() < 1e-15);
    }

    #[test]
    fn zero_final_layer_gives_half() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid_dims = [2, 1, 1];
        let mut net = new_sensing_net(&cfg, &mut sub_stream(1, 1));
        let last = net.layers.last_mut().unwrap();
        *last = Layer::zeros(last.rows, last.cols, Activation::Sigmoid);
        net.touch();
        let v = [Complex64::new(0.3, 0.1), Complex64::new(-1.0, 0.0)];
        let out = sense(&net, &v).unwrap();
        assert_eq!(out.probs, vec![0.5, 0.5]);
        assert_eq!(sense(&net, &v).unwrap(), out);
    }

    #[test]
    fn sensing_gradient_matches_finite_differences() {
        let mut cfg = ExperimentConfig::default();
        cfg.network.sensing_hidden = vec![12, 8, 6];
        let net = new_sensing_net(&cfg, &mut sub_stream(2, 1));
        let mut rng = sub_stream(2, 2);
        let x: Vec<f64> = (0..54).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<f64> = (0..27).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let loss = |o: &[f64]| (cross_entropy_labels(o, &labels), cross_entropy_grad(o, &labels, 1.0));
        let r = gradient_check(&net, &x, loss, 1e-5, 300, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-4, "{}", r.max_rel_err);
    }

    #[test]
    fn small_step_descends() {
        let mut cfg = ExperimentConfig::default();
        cfg.network.sensing_hidden = vec![32, 16, 8];
        let mut rng = sub_stream(4, 4);
        for i in 0..20 {
            let mut net = new_sensing_net(&cfg, &mut sub_stream(4, i));
            let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..54).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<Vec<f64>> =
                (0..8).map(|_| (0..27).map(|_| rng.random_range(0..2) as f64).collect()).collect();
            let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
            let yr: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
            let mut opt = Optimizer::Sgd;
            let before = sensing_update(&mut net, &mut opt, &xr, &yr, 1e-4).unwrap();
            let (after, _) = sensing_gradients(&net, &xr, &yr).unwrap();
            assert!(after <= before, "{after} > {before}");
            let frozen = net.clone();
            sensing_update(&mut net, &mut opt, &xr, &yr, 0.0).unwrap();
            assert_eq!(net, frozen);
        }
    }
}
