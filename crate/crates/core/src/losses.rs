//! Sensing losses and accuracy.

use crate::scene::Scenario;

pub const PROB_CLIP: f64 = 1e-7;

pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// Per-cell occupancy probabilities, clipped into (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SensingOutput {
    pub probs: Vec<f64>,
}

impl SensingOutput {
    pub fn new(raw: &[f64]) -> Self {
        Self { probs: raw.iter().map(|&p| clip_prob(p)).collect() }
    }
}

/// Bernoulli cross-entropy summed over cells, natural log.
pub fn cross_entropy(output: &SensingOutput, scenario: &Scenario) -> f64 {
    cross_entropy_labels(&output.probs, &scenario.labels())
}

pub fn cross_entropy_labels(probs: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clip_prob(p);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

/// ce − β·log2(1 + SINR)
pub fn combined_loss(ce: f64, sinr_linear: f64, beta: f64) -> f64 {
    ce - beta * (1.0 + sinr_linear).log2()
}

/// Fraction of cells where the thresholded prediction matches occupancy.
/// Ties count as occupied.
pub fn accuracy(output: &SensingOutput, scenario: &Scenario, threshold: f64) -> f64 {
    assert_eq!(output.probs.len(), scenario.occupancy.len());
    let hits = output
        .probs
        .iter()
        .zip(&scenario.occupancy)
        .filter(|(&p, &occ)| (p >= threshold) == occ)
        .count();
    hits as f64 / output.probs.len().max(1) as f64
}

/// 1 if every cell is classified correctly, else 0.
pub fn scenario_accuracy(output: &SensingOutput, scenario: &Scenario, threshold: f64) -> f64 {
    if accuracy(output, scenario, threshold) == 1.0 {
        1.0
    } else {
        0.0
    }
}
