//! Policy network: a shared feature subnetwork embeds the real and
//! imaginary parts of every frame's C_k·A, and a softmax head maps the
//! position one-hots plus the 2K embeddings to a distribution over the
//! element configurations.

use num_complex::Complex64;
use rand::Rng;

use crate::beamforming::{ControlSequence, RadioSystem};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mdp::{EpisodeTrace, MdpState, Policy};
use crate::neuralnet::{backprop_layers, Activation, DenseNet, Gradients, Layer, Tape};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDims {
    pub n_frames: usize,
    pub n_rf: usize,
    pub n_elements: usize,
    pub n_states: usize,
    pub n_cells: usize,
    pub feature_dim: usize,
}

impl PolicyDims {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            n_frames: cfg.n_frames,
            n_rf: cfg.n_rf,
            n_elements: cfg.n_elements,
            n_states: cfg.n_states,
            n_cells: cfg.n_cells(),
            feature_dim: cfg.network.feature_dim,
        }
    }

    /// K + N + N_RF + 2K·d
    pub fn input_len(&self) -> usize {
        self.n_frames + self.n_elements + self.n_rf + 2 * self.n_frames * self.feature_dim
    }

    pub fn feature_input_len(&self) -> usize {
        self.n_rf * self.n_cells
    }

    pub fn element_col(&self, n: usize) -> usize {
        self.n_frames + n
    }

    pub fn chain_col(&self, c: usize) -> usize {
        self.n_frames + self.n_elements + c
    }

    /// First column of frame `k`'s (re, im) embedding pair.
    pub fn embedding_col(&self, k: usize) -> usize {
        self.n_frames + self.n_elements + self.n_rf + 2 * self.feature_dim * k
    }

    pub fn template(&self) -> ControlSequence {
        ControlSequence::initial(self.n_frames, self.n_rf, self.n_elements, self.n_states)
    }

    pub fn initial_state(&self) -> MdpState {
        MdpState::initial(self.n_frames, self.n_rf, self.n_elements, self.n_states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub dims: PolicyDims,
    pub feature: DenseNet,
    pub head: DenseNet,
}

impl PolicyNet {
    pub fn new<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Self {
        let dims = PolicyDims::from_config(cfg);
        let mut f = vec![dims.feature_input_len()];
        f.extend(&cfg.network.feature_hidden);
        f.push(dims.feature_dim);
        let mut feature = DenseNet::xavier(&f, Activation::Relu, Activation::Identity, rng);
        // 2K embeddings feed the head; shrink them so the initial softmax
        // stays close to uniform.
        let shrink = 1.0 / ((2 * dims.n_frames) as f64).sqrt();
        if let Some(last) = feature.layers.last_mut() {
            last.weights.iter_mut().for_each(|w| *w *= shrink);
        }
        let mut h = vec![dims.input_len()];
        h.extend(&cfg.network.policy_hidden);
        h.push(dims.n_states);
        let head = DenseNet::xavier(&h, Activation::Relu, Activation::Softmax, rng);
        Self { dims, feature, head }
    }

    pub fn from_parts(dims: PolicyDims, feature: DenseNet, head: DenseNet) -> Result<Self> {
        if feature.input_dim() != dims.feature_input_len() || feature.output_dim() != dims.feature_dim {
            return Err(Error::IncompatibleCheckpoint(format!(
                "feature network {:?} does not fit {}→{}",
                feature.dims(),
                dims.feature_input_len(),
                dims.feature_dim
            )));
        }
        if head.input_dim() != dims.input_len() || head.output_dim() != dims.n_states {
            return Err(Error::IncompatibleCheckpoint(format!(
                "policy head {:?} does not fit {}→{}",
                head.dims(),
                dims.input_len(),
                dims.n_states
            )));
        }
        if head.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
            return Err(Error::IncompatibleCheckpoint("policy head must end in softmax".into()));
        }
        Ok(Self { dims, feature, head })
    }

    /// (re, im) embedding of one frame's rows.
    pub fn embed(&self, rows: &[Complex64]) -> Result<Vec<f64>> {
        let (re, im) = split_parts(rows);
        let mut e = self.feature.predict(&re)?;
        e.extend(self.feature.predict(&im)?);
        Ok(e)
    }
}

pub fn split_parts(rows: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (rows.iter().map(|z| z.re).collect(), rows.iter().map(|z| z.im).collect())
}

/// The transmitter projection rows of every (chain, element, configuration),
/// scaled to order one for the feature subnetwork.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub n_rf: usize,
    pub n_elements: usize,
    pub n_states: usize,
    pub n_cells: usize,
    pub scale: f64,
    /// `[chain][n][s][m]`, flattened.
    alpha: Vec<Complex64>,
}

impl FrameFeatures {
    pub fn from_system(system: &RadioSystem) -> Self {
        let rx = &system.rx;
        let (n_rf, n_el, n_s, m) = (rx.n_rf, rx.n_elements, rx.n_states(), rx.n_cells);
        let mut alpha = Vec::with_capacity(n_rf * n_el * n_s * m);
        for c in 0..n_rf {
            for n in 0..n_el {
                let b = rx.element(c, n);
                for s in 0..n_s {
                    let r = rx.response[s];
                    alpha.extend(b.iter().zip(&system.tx.per_cell).map(|(bm, t)| r * bm * t));
                }
            }
        }
        let rms = (alpha.iter().map(|z| z.norm_sqr()).sum::<f64>() / alpha.len().max(1) as f64).sqrt();
        let scale = if rms > 0.0 { 1.0 / (rms * (n_el as f64).sqrt()) } else { 1.0 };
        alpha.iter_mut().for_each(|z| *z *= scale);
        Self { n_rf, n_elements: n_el, n_states: n_s, n_cells: m, scale, alpha }
    }

    fn alpha(&self, chain: usize, n: usize, s: usize) -> &[Complex64] {
        let off = ((chain * self.n_elements + n) * self.n_states + s) * self.n_cells;
        &self.alpha[off..off + self.n_cells]
    }

    /// Scaled C_k·A, `[chain][m]`.
    pub fn frame_rows(&self, ctrl: &ControlSequence, k: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.n_rf * self.n_cells];
        for c in 0..self.n_rf {
            let row = &mut out[c * self.n_cells..(c + 1) * self.n_cells];
            for n in 0..self.n_elements {
                let a = self.alpha(c, n, ctrl.get(k, c, n));
                row.iter_mut().zip(a).for_each(|(o, x)| *o += x);
            }
        }
        out
    }
}

/// Full policy input for a non-terminal state.
pub fn encode_policy_input(state: &MdpState, net: &PolicyNet, feats: &FrameFeatures) -> Result<Vec<f64>> {
    if state.is_terminal() {
        return Err(Error::Contract("terminal states have no policy input".into()));
    }
    let d = net.dims;
    let mut x = vec![0.0; d.input_len()];
    x[state.frame] = 1.0;
    x[d.element_col(state.element)] = 1.0;
    x[d.chain_col(state.chain)] = 1.0;
    for k in 0..d.n_frames {
        let e = net.embed(&feats.frame_rows(&state.control, k))?;
        let off = d.embedding_col(k);
        x[off..off + e.len()].copy_from_slice(&e);
    }
    Ok(x)
}

pub fn policy_distribution(net: &PolicyNet, input: &[f64]) -> Result<Vec<f64>> {
    net.head.predict(input)
}

/// Everything a replayed step needs for its backward pass.
struct StepCache {
    tape_re: Tape,
    tape_im: Tape,
    emb: Vec<f64>,
    /// Head activations from the first hidden layer on.
    values: Vec<Vec<f64>>,
}

/// Incremental evaluator for one episode. Only the current frame's
/// embedding is recomputed per step; the first head layer is assembled
/// from column picks for the one-hots and cached per-frame block products.
pub struct PolicyEvaluator<'a> {
    net: &'a PolicyNet,
    feats: &'a FrameFeatures,
    init_emb: Vec<f64>,
    emb: Vec<Vec<f64>>,
    contrib: Vec<Vec<f64>>,
    frames_done: usize,
}

impl<'a> PolicyEvaluator<'a> {
    pub fn new(net: &'a PolicyNet, feats: &'a FrameFeatures) -> Result<Self> {
        let template = net.dims.template();
        let init_emb = net.embed(&feats.frame_rows(&template, 0))?;
        let mut ev = Self { net, feats, init_emb, emb: Vec::new(), contrib: Vec::new(), frames_done: 0 };
        ev.reset();
        Ok(ev)
    }

    fn first(&self) -> &Layer {
        &self.net.head.layers[0]
    }

    fn block_product(&self, k: usize, e: &[f64]) -> Vec<f64> {
        let l = self.first();
        let off = self.net.dims.embedding_col(k);
        (0..l.rows).map(|r| crate::neuralnet::dense_dot(&l.row(r)[off..off + e.len()], e)).collect()
    }

    fn set_frame_embedding(&mut self, k: usize, e: Vec<f64>) {
        self.contrib[k] = self.block_product(k, &e);
        self.emb[k] = e;
    }

    /// Freeze frames that were completed since the last call.
    fn catch_up(&mut self, state: &MdpState) -> Result<()> {
        while self.frames_done < state.frame.min(self.net.dims.n_frames) {
            let k = self.frames_done;
            let e = self.net.embed(&self.feats.frame_rows(&state.control, k))?;
            self.set_frame_embedding(k, e);
            self.frames_done += 1;
        }
        Ok(())
    }

    fn forward(&mut self, state: &MdpState) -> Result<StepCache> {
        if state.is_terminal() {
            return Err(Error::Contract("no decision at a terminal state".into()));
        }
        self.catch_up(state)?;
        let k = state.frame;
        let (re, im) = split_parts(&self.feats.frame_rows(&state.control, k));
        let (mut emb, tape_re) = self.net.feature.forward(&re)?;
        let (e_im, tape_im) = self.net.feature.forward(&im)?;
        emb.extend(e_im);
        self.set_frame_embedding(k, emb.clone());

        let d = self.net.dims;
        let l = self.first();
        let cols = [k, d.element_col(state.element), d.chain_col(state.chain)];
        let mut z: Vec<f64> = (0..l.rows)
            .map(|r| {
                let w = l.row(r);
                l.bias[r] + cols.iter().map(|&c| w[c]).sum::<f64>()
            })
            .collect();
        for c in &self.contrib {
            z.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        l.activation.apply(&mut z);
        let mut values = vec![z];
        for layer in &self.net.head.layers[1..] {
            let mut next = vec![0.0; layer.rows];
            layer.affine(values.last().unwrap(), &mut next);
            layer.activation.apply(&mut next);
            values.push(next);
        }
        Ok(StepCache { tape_re, tape_im, emb, values })
    }

    pub fn probabilities(&mut self, state: &MdpState) -> Result<Vec<f64>> {
        Ok(self.forward(state)?.values.pop().unwrap())
    }
}

impl Policy for PolicyEvaluator<'_> {
    fn reset(&mut self) {
        let k = self.net.dims.n_frames;
        self.emb = vec![self.init_emb.clone(); k];
        self.contrib = (0..k).map(|f| self.block_product(f, &self.init_emb)).collect();
        self.frames_done = 0;
    }

    fn distribution(&mut self, state: &MdpState) -> Vec<f64> {
        self.probabilities(state).expect("policy input built from a consistent state")
    }

    fn observe(&mut self, _: &MdpState, _: usize) {}
}

/// Gradients for the feature subnetwork and the head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradients {
    pub feature: Gradients,
    pub head: Gradients,
}

impl PolicyGradients {
    pub fn zeros_like(net: &PolicyNet) -> Self {
        Self { feature: Gradients::zeros_like(&net.feature), head: Gradients::zeros_like(&net.head) }
    }

    pub fn norm(&self) -> f64 {
        (self.feature.norm().powi(2) + self.head.norm().powi(2)).sqrt()
    }
}

/// Gradient of Σ_t coef·(−log π(a_t | s_t)) along the action sequence,
/// accumulated into `acc`.
pub fn accumulate_log_prob_grad(
    net: &PolicyNet,
    feats: &FrameFeatures,
    actions: &[u8],
    coef: f64,
    acc: &mut PolicyGradients,
) -> Result<()> {
    let d = net.dims;
    let mut state = d.initial_state();
    if actions.len() != state.n_steps() {
        return Err(Error::Shape(format!("trace has {} actions, episode has {}", actions.len(), state.n_steps())));
    }
    let head = &net.head;
    let first = &head.layers[0];
    let h1 = first.rows;
    let width = 2 * d.feature_dim;
    let mut frame_sums = vec![vec![0.0; h1]; d.n_frames];
    let mut ev = PolicyEvaluator::new(net, feats)?;
    ev.reset();

    for &a in actions {
        let cache = ev.forward(&state)?;
        let probs = cache.values.last().unwrap();
        // d(−coef·log π_a)/dp, pushed through the softmax by backprop
        let mut g = vec![0.0; probs.len()];
        g[a as usize] = -coef / probs[a as usize];
        let dh1 = backprop_layers(&head.layers[1..], &cache.values, g, &mut acc.head.layers[1..]);
        let mut dz = dh1;
        first.activation.backprop(&cache.values[0], &mut dz);

        let k = state.frame;
        let off = d.embedding_col(k);
        let cols = [k, d.element_col(state.element), d.chain_col(state.chain)];
        let lg = &mut acc.head.layers[0];
        let mut de = vec![0.0; width];
        for (r, &gz) in dz.iter().enumerate() {
            if gz == 0.0 {
                continue;
            }
            lg.bias[r] += gz;
            let wrow = &mut lg.weights[r * first.cols..(r + 1) * first.cols];
            for &c in &cols {
                wrow[c] += gz;
            }
            for j in 0..width {
                wrow[off + j] += gz * cache.emb[j];
            }
            let prow = first.row(r);
            for j in 0..width {
                de[j] += gz * prow[off + j];
            }
        }
        net.feature.backward_into(&cache.tape_re, &de[..d.feature_dim], 1.0, &mut acc.feature)?;
        net.feature.backward_into(&cache.tape_im, &de[d.feature_dim..], 1.0, &mut acc.feature)?;
        frame_sums[k].iter_mut().zip(&dz).for_each(|(s, x)| *s += x);
        state.step_in_place(a as usize)?;
    }

    // Frames seen in their initial version (by earlier frames' steps) and in
    // their final version (by later frames' steps).
    let template = d.template();
    let mut de_init = vec![0.0; width];
    let mut before = vec![0.0; h1];
    let mut after: Vec<f64> = vec![0.0; h1];
    for s in &frame_sums {
        after.iter_mut().zip(s).for_each(|(a, x)| *a += x);
    }
    let init_rows = feats.frame_rows(&template, 0);
    for k in 0..d.n_frames {
        after.iter_mut().zip(&frame_sums[k]).for_each(|(a, x)| *a -= x);
        let off = d.embedding_col(k);
        // `before` holds steps of frames < k, which saw frame k's initial embedding
        let groups: [(&Vec<f64>, bool); 2] = [(&before, true), (&after, false)];
        for (g, initial) in groups {
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            let rows = if initial { init_rows.clone() } else { feats.frame_rows(&state.control, k) };
            let (re, im) = split_parts(&rows);
            let (mut emb, tape_re) = net.feature.forward(&re)?;
            let (e_im, tape_im) = net.feature.forward(&im)?;
            emb.extend(e_im);
            let lg = &mut acc.head.layers[0];
            let mut de = vec![0.0; width];
            for (r, &gz) in g.iter().enumerate() {
                if gz == 0.0 {
                    continue;
                }
                let wrow = &mut lg.weights[r * first.cols..(r + 1) * first.cols];
                let prow = first.row(r);
                for j in 0..width {
                    wrow[off + j] += gz * emb[j];
                    de[j] += gz * prow[off + j];
                }
            }
            if initial {
                de_init.iter_mut().zip(&de).for_each(|(a, b)| *a += b);
            } else {
                net.feature.backward_into(&tape_re, &de[..d.feature_dim], 1.0, &mut acc.feature)?;
                net.feature.backward_into(&tape_im, &de[d.feature_dim..], 1.0, &mut acc.feature)?;
            }
        }
        before.iter_mut().zip(&frame_sums[k]).for_each(|(a, x)| *a += x);
    }
    if de_init.iter().any(|&x| x != 0.0) {
        let (re, im) = split_parts(&init_rows);
        let (_, tape_re) = net.feature.forward(&re)?;
        let (_, tape_im) = net.feature.forward(&im)?;
        net.feature.backward_into(&tape_re, &de_init[..d.feature_dim], 1.0, &mut acc.feature)?;
        net.feature.backward_into(&tape_im, &de_init[d.feature_dim..], 1.0, &mut acc.feature)?;
    }
    Ok(())
}

/// Running-mean reward baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub enabled: bool,
    pub momentum: f64,
    pub value: Option<f64>,
}

impl Baseline {
    pub fn new(enabled: bool, momentum: f64) -> Self {
        Self { enabled, momentum, value: None }
    }

    /// Baseline for rewards whose mean is `mean_reward`; the first call
    /// starts the running mean at that value.
    pub fn current(&self, mean_reward: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        self.value.unwrap_or(mean_reward)
    }

    pub fn update(&mut self, mean_reward: f64) {
        if self.enabled {
            self.value = Some(match self.value {
                None => mean_reward,
                Some(b) => self.momentum * b + (1.0 - self.momentum) * mean_reward,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyUpdateStats {
    pub mean_reward: f64,
    pub baseline: f64,
    pub grad_norm: f64,
}

/// REINFORCE gradient (descent convention) of the traces, averaged.
pub fn policy_gradients(
    net: &PolicyNet,
    feats: &FrameFeatures,
    traces: &[EpisodeTrace],
    baseline: f64,
) -> Result<PolicyGradients> {
    let mut acc = PolicyGradients::zeros_like(net);
    let n = traces.len() as f64;
    for t in traces {
        let r = t.terminal_reward.ok_or_else(|| Error::Contract("trace without terminal reward".into()))?;
        let coef = (r - baseline) / n;
        if coef != 0.0 {
            accumulate_log_prob_grad(net, feats, &t.actions, coef, &mut acc)?;
        }
    }
    Ok(acc)
}

/// One ascent step on expected reward. The replay buffer is drained.
pub fn policy_update(
    net: &mut PolicyNet,
    opt: &mut PolicyOptimizers,
    feats: &FrameFeatures,
    buffer: &mut Vec<EpisodeTrace>,
    lr: f64,
    baseline: &mut Baseline,
) -> Result<PolicyUpdateStats> {
    if buffer.is_empty() {
        return Err(Error::Contract("empty replay buffer".into()));
    }
    let rewards: Vec<f64> = buffer
        .iter()
        .map(|t| t.terminal_reward.ok_or_else(|| Error::Contract("trace without terminal reward".into())))
        .collect::<Result<_>>()?;
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let b = baseline.current(mean);
    let grads = policy_gradients(net, feats, buffer, b)?;
    opt.feature.step(&mut net.feature, &grads.feature, lr);
    opt.head.step(&mut net.head, &grads.head, lr);
    baseline.update(mean);
    buffer.clear();
    Ok(PolicyUpdateStats { mean_reward: mean, baseline: b, grad_norm: grads.norm() })
}

#[derive(Debug, Clone)]
pub struct PolicyOptimizers {
    pub feature: crate::neuralnet::Optimizer,
    pub head: crate::neuralnet::Optimizer,
}

impl PolicyOptimizers {
    pub fn new(kind: crate::config::OptimizerKind, net: &PolicyNet) -> Self {
        Self {
            feature: crate::neuralnet::Optimizer::new(kind, &net.feature),
            head: crate::neuralnet::Optimizer::new(kind, &net.head),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rollout;
    use crate::rng::sub_stream;
    use std::f64::consts::PI;

    pub(crate) fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.n_frames = 3;
        cfg.n_rf = 2;
        cfg.n_elements = 4;
        cfg.n_states = 3;
        cfg.phase_set = vec![0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
        cfg.grid_dims = [2, 1, 1];
        cfg.network.feature_hidden = vec![5];
        cfg.network.feature_dim = 3;
        cfg.network.policy_hidden = vec![7, 4];
        cfg
    }

    fn setup(cfg: &ExperimentConfig, seed: u64) -> (PolicyNet, FrameFeatures) {
        let sys = RadioSystem::from_config(cfg).unwrap();
        (PolicyNet::new(cfg, &mut sub_stream(seed, 2)), FrameFeatures::from_system(&sys))
    }

    fn random_state(cfg: &ExperimentConfig, steps: usize, seed: u64) -> MdpState {
        let mut rng = sub_stream(seed, 9);
        let mut s = PolicyDims::from_config(cfg).initial_state();
        for _ in 0..steps {
            s.step_in_place(rng.random_range(0..cfg.n_states)).unwrap();
        }
        s
    }

    #[test]
    fn input_layout() {
        let cfg = ExperimentConfig::default();
        let (net, feats) = setup(&cfg, 0);
        assert_eq!(net.dims.input_len(), 679);
        let s = random_state(&cfg, 100, 1);
        let x = encode_policy_input(&s, &net, &feats).unwrap();
        assert_eq!(x.len(), 679);
        assert_eq!(&x[..20].iter().filter(|&&v| v == 1.0).count(), &1);
        assert_eq!(x[s.frame], 1.0);
        assert_eq!(x[20 + s.element], 1.0);
        assert_eq!(x[36 + s.chain], 1.0);
        assert_eq!(x[..39].iter().sum::<f64>(), 3.0);
        // imaginary half of a frame is the embedding of Im(C_k·A)
        let rows = feats.frame_rows(&s.control, 4);
        let im: Vec<f64> = rows.iter().map(|z| z.im).collect();
        let e = net.feature.predict(&im).unwrap();
        let off = net.dims.embedding_col(4) + 16;
        assert_eq!(&x[off..off + 16], e.as_slice());
    }

    #[test]
    fn incremental_matches_full_encoding() {
        for cfg in [small_cfg(), ExperimentConfig::default()] {
            let (net, feats) = setup(&cfg, 3);
            let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
            let mut s = PolicyDims::from_config(&cfg).initial_state();
            let mut rng = sub_stream(3, 3);
            let stride = if cfg.n_elements > 4 { 37 } else { 1 };
            let mut t = 0;
            while !s.is_terminal() {
                let fast = ev.distribution(&s);
                if t % stride == 0 {
                    let slow = policy_distribution(&net, &encode_policy_input(&s, &net, &feats).unwrap()).unwrap();
                    for (a, b) in fast.iter().zip(&slow) {
                        assert!((a - b).abs() < 1e-12, "step {t}: {a} vs {b}");
                    }
                }
                s.step_in_place(rng.random_range(0..cfg.n_states)).unwrap();
                t += 1;
            }
        }
    }

    #[test]
    fn distribution_properties() {
        let cfg = small_cfg();
        let (mut net, feats) = setup(&cfg, 4);
        let s = random_state(&cfg, 5, 4);
        let x = encode_policy_input(&s, &net, &feats).unwrap();
        let p = policy_distribution(&net, &x).unwrap();
        assert!(p.iter().all(|&v| v > 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let last = net.head.layers.len() - 1;
        net.head.layers[last].bias.iter_mut().for_each(|b| *b += 3.5);
        net.head.touch();
        let shifted = policy_distribution(&net, &x).unwrap();
        for (a, b) in p.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
        let l = &mut net.head.layers[last];
        *l = Layer::zeros(l.rows, l.cols, Activation::Softmax);
        net.head.touch();
        let u = policy_distribution(&net, &x).unwrap();
        assert!(u.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    fn objective(net: &PolicyNet, feats: &FrameFeatures, actions: &[u8], coef: f64) -> f64 {
        let mut s = net.dims.initial_state();
        let mut j = 0.0;
        for &a in actions {
            let p = policy_distribution(net, &encode_policy_input(&s, net, feats).unwrap()).unwrap();
            j -= coef * p[a as usize].ln();
            s.step_in_place(a as usize).unwrap();
        }
        j
    }

    #[test]
    fn structured_gradient_matches_finite_differences() {
        let cfg = small_cfg();
        let (net, feats) = setup(&cfg, 5);
        let mut rng = sub_stream(5, 5);
        let actions: Vec<u8> = (0..24).map(|_| rng.random_range(0..3) as u8).collect();
        let coef = 0.7;
        let mut acc = PolicyGradients::zeros_like(&net);
        accumulate_log_prob_grad(&net, &feats, &actions, coef, &mut acc).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for which in 0..2 {
            let n_params = if which == 0 { net.feature.n_params() } else { net.head.n_params() };
            let analytic: Vec<f64> =
                if which == 0 { acc.feature.iter().cloned().collect() } else { acc.head.iter().cloned().collect() };
            for i in 0..n_params {
                let mut p = net.clone();
                let target = if which == 0 { &mut p.feature } else { &mut p.head };
                let orig = *target.param_mut(i);
                *target.param_mut(i) = orig + h;
                let up = objective(&p, &feats, &actions, coef);
                let target = if which == 0 { &mut p.feature } else { &mut p.head };
                *target.param_mut(i) = orig - h;
                let down = objective(&p, &feats, &actions, coef);
                let fd = (up - down) / (2.0 * h);
                worst = worst.max(crate::neuralnet::rel_err(analytic[i], fd));
            }
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn stored_log_probs_match_distribution() {
        let cfg = small_cfg();
        let (net, feats) = setup(&cfg, 6);
        let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
        let trace = rollout(&mut ev, net.dims.initial_state(), false, &mut sub_stream(6, 1)).unwrap();
        let mut s = net.dims.initial_state();
        for (&a, &lp) in trace.actions.iter().zip(&trace.log_probs) {
            let p = policy_distribution(&net, &encode_policy_input(&s, &net, &feats).unwrap()).unwrap();
            assert!((lp.exp() - p[a as usize]).abs() < 1e-9);
            s.step_in_place(a as usize).unwrap();
        }
    }

    #[test]
    fn centered_rewards_and_duplicate_traces() {
        let cfg = small_cfg();
        let (net, feats) = setup(&cfg, 7);
        let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
        let mut t = rollout(&mut ev, net.dims.initial_state(), false, &mut sub_stream(7, 1)).unwrap();
        t.terminal_reward = Some(-3.0);
        let g = policy_gradients(&net, &feats, &[t.clone()], -3.0).unwrap();
        assert!(g.feature.is_zero() && g.head.is_zero());

        let one = policy_gradients(&net, &feats, &[t.clone()], -1.0).unwrap();
        let two = policy_gradients(&net, &feats, &[t.clone(), t.clone()], -1.0).unwrap();
        for (a, b) in one.head.iter().zip(two.head.iter()).chain(one.feature.iter().zip(two.feature.iter())) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        }

        t.terminal_reward = None;
        assert!(matches!(policy_gradients(&net, &feats, &[t], 0.0), Err(Error::Contract(_))));
    }

    pub(crate) fn bandit_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.n_frames = 1;
        cfg.n_rf = 1;
        cfg.n_elements = 1;
        cfg.n_states = 2;
        cfg.phase_set = vec![0.0, PI];
        cfg.grid_dims = [1, 1, 1];
        cfg.network.feature_hidden = vec![4];
        cfg.network.feature_dim = 2;
        cfg.network.policy_hidden = vec![8];
        cfg
    }

    #[test]
    fn bandit_learns_better_arm() {
        let cfg = bandit_cfg();
        let (mut net, feats) = setup(&cfg, 8);
        let mut opt = PolicyOptimizers::new(crate::config::OptimizerKind::Sgd, &net);
        let mut baseline = Baseline::new(true, 0.9);
        let mut rng = sub_stream(8, 1);
        let p0 = |net: &PolicyNet| PolicyEvaluator::new(net, &feats).unwrap().probabilities(&net.dims.initial_state()).unwrap()[0];
        let start = p0(&net);
        for _ in 0..100 {
            let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
            let mut t = rollout(&mut ev, net.dims.initial_state(), false, &mut rng).unwrap();
            t.terminal_reward = Some(if t.actions[0] == 0 { 1.0 } else { 0.0 });
            let mut buf = vec![t];
            policy_update(&mut net, &mut opt, &feats, &mut buf, 0.1, &mut baseline).unwrap();
            assert!(buf.is_empty());
        }
        assert!(p0(&net) > start, "{} -> {}", start, p0(&net));
    }

    #[test]
    fn estimator_unbiased_on_bandit() {
        let cfg = bandit_cfg();
        let (net, feats) = setup(&cfg, 9);
        let rewards = [1.0, 0.0];
        let mut ev = PolicyEvaluator::new(&net, &feats).unwrap();
        let pi = ev.probabilities(&net.dims.initial_state()).unwrap();
        // descent gradient of −E[R] wrt the output bias
        let exact: Vec<f64> = (0..2)
            .map(|j| -(0..2).map(|a| rewards[a] * pi[a] * ((a == j) as u8 as f64 - pi[j])).sum::<f64>())
            .collect();
        let mut rng = sub_stream(9, 1);
        let draws = 100_000;
        let (mut sum, mut sq) = ([0.0; 2], [0.0; 2]);
        for _ in 0..draws {
            let a = crate::mdp::choose_action(&pi, false, &mut rng);
            // per-episode estimate R·(π − e_a) for the output bias
            for j in 0..2 {
                let g = rewards[a] * (pi[j] - (a == j) as u8 as f64);
                sum[j] += g;
                sq[j] += g * g;
            }
        }
        // the analytic per-episode value agrees with the backprop path
        let mut acc = PolicyGradients::zeros_like(&net);
        accumulate_log_prob_grad(&net, &feats, &[0], rewards[0], &mut acc).unwrap();
        let bias = &acc.head.layers.last().unwrap().bias;
        for j in 0..2 {
            assert!((bias[j] - rewards[0] * (pi[j] - (j == 0) as u8 as f64)).abs() < 1e-12);
        }
        for j in 0..2 {
            let mean = sum[j] / draws as f64;
            let var = sq[j] / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            assert!((mean - exact[j]).abs() < 3.0 * se, "{mean} vs {}", exact[j]);
        }
    }
}
