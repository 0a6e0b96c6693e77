//! The configuration-selection decision process. One step fixes the
//! configuration of one element; elements advance fastest, then chains,
//! then frames. Reward arrives only at the terminal state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::ControlSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpState {
    /// Zero-based; equals `n_frames` once terminal.
    pub frame: usize,
    pub chain: usize,
    pub element: usize,
    pub step: usize,
    pub control: ControlSequence,
}

impl MdpState {
    pub fn initial(n_frames: usize, n_rf: usize, n_elements: usize, n_states: usize) -> Self {
        Self {
            frame: 0,
            chain: 0,
            element: 0,
            step: 0,
            control: ControlSequence::initial(n_frames, n_rf, n_elements, n_states),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.control.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.frame >= self.control.n_frames
    }

    /// Sets the current slot to `action` and advances the indices.
    pub fn step_in_place(&mut self, action: usize) -> Result<()> {
        if self.is_terminal() {
            return Err(Error::Contract("transition from a terminal state".into()));
        }
        if action >= self.control.n_states {
            return Err(Error::OutOfRange(format!("action {action} outside [0, {})", self.control.n_states)));
        }
        self.control.set(self.frame, self.chain, self.element, action);
        self.step += 1;
        self.element += 1;
        if self.element == self.control.n_elements {
            self.element = 0;
            self.chain += 1;
            if self.chain == self.control.n_rf {
                self.chain = 0;
                self.frame += 1;
            }
        }
        Ok(())
    }
}

pub fn initial_state(cfg: &crate::config::ExperimentConfig) -> MdpState {
    MdpState::initial(cfg.n_frames, cfg.n_rf, cfg.n_elements, cfg.n_states)
}

pub fn transition(s: &MdpState, action: usize) -> Result<MdpState> {
    let mut next = s.clone();
    next.step_in_place(action)?;
    Ok(next)
}

pub fn is_terminal(s: &MdpState) -> bool {
    s.is_terminal()
}

/// Reward of a state: the terminal value if terminal, zero otherwise.
pub fn state_reward(s: &MdpState, terminal_value: f64) -> f64 {
    if s.is_terminal() {
        terminal_value
    } else {
        0.0
    }
}

/// The sampled decisions of one episode. States are implied by the action
/// prefix, so step `t` is identified by its index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub actions: Vec<u8>,
    pub log_probs: Vec<f64>,
    pub terminal_control: ControlSequence,
    pub terminal_reward: Option<f64>,
}

/// Anything that yields an action distribution for a state. `observe` is
/// called with the pre-transition state and the chosen action so that
/// implementations can maintain incremental caches.
pub trait Policy {
    fn reset(&mut self);
    fn distribution(&mut self, state: &MdpState) -> Vec<f64>;
    fn observe(&mut self, state: &MdpState, action: usize);
}

/// Uniform over the configurations.
pub struct UniformPolicy;

impl Policy for UniformPolicy {
    fn reset(&mut self) {}

    fn distribution(&mut self, state: &MdpState) -> Vec<f64> {
        vec![1.0 / state.control.n_states as f64; state.control.n_states]
    }

    fn observe(&mut self, _: &MdpState, _: usize) {}
}

/// Categorical draw; the greedy variant takes the first maximum.
pub fn choose_action<R: Rng>(probs: &[f64], greedy: bool, rng: &mut R) -> usize {
    if greedy {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        return best;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn rollout<P: Policy, R: Rng>(policy: &mut P, start: MdpState, greedy: bool, rng: &mut R) -> Result<EpisodeTrace> {
    policy.reset();
    let mut state = start;
    let mut actions = Vec::with_capacity(state.n_steps());
    let mut log_probs = Vec::with_capacity(state.n_steps());
    while !state.is_terminal() {
        let probs = policy.distribution(&state);
        if probs.len() != state.control.n_states {
            return Err(Error::Shape(format!(
                "policy yields {} probabilities for {} configurations",
                probs.len(),
                state.control.n_states
            )));
        }
        let a = choose_action(&probs, greedy, rng);
        actions.push(a as u8);
        log_probs.push(probs[a].ln());
        policy.observe(&state, a);
        state.step_in_place(a)?;
    }
    Ok(EpisodeTrace { actions, log_probs, terminal_control: state.control, terminal_reward: None })
}

/// The control sequence produced by replaying `actions` from C_0.
pub fn replay_control(template: &ControlSequence, actions: &[u8]) -> ControlSequence {
    let mut c = template.clone();
    c.configs.copy_from_slice(actions);
    c
}

/// Monte-Carlo terminal reward of a control sequence: the mean over
/// (scenario, draw) pairs of −CE, plus β·log2(1 + SINR) under P2.
pub fn terminal_reward<R1: Rng, R2: Rng>(
    ctrl: &ControlSequence,
    sensing_net: &crate::neuralnet::DenseNet,
    plan: &crate::agents::MeasurementPlan,
    objective: crate::agents::Objective,
    beta: f64,
    noise_rng: &mut R1,
    jammer_rng: &mut R2,
) -> Result<f64> {
    if plan.subset.is_empty() || plan.n_mc == 0 {
        return Err(Error::Validation(vec!["reward needs at least one scenario and one draw".into()]));
    }
    let meas = crate::agents::collect_measurements(ctrl, plan, noise_rng, jammer_rng)?;
    Ok(crate::agents::score(sensing_net, &meas, plan.scenarios, objective, beta)?.reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::rng::sub_stream;

    #[test]
    fn initial_state_is_first_configuration() {
        let s = initial_state(&ExperimentConfig::default());
        assert_eq!((s.frame, s.chain, s.element, s.step), (0, 0, 0, 0));
        assert!(s.control.configs.iter().all(|&c| c == 0));
        assert!(!s.is_terminal());
    }

    #[test]
    fn traversal_and_wrap() {
        let s = initial_state(&ExperimentConfig::default());
        let t = transition(&s, 2).unwrap();
        assert_eq!((t.frame, t.chain, t.element), (0, 0, 1));
        assert_eq!(t.control.get(0, 0, 0), 2);
        assert_eq!(s.control.get(0, 0, 0), 0);

        let mut s = s;
        while (s.frame, s.chain, s.element) != (0, 2, 15) {
            s.step_in_place(1).unwrap();
        }
        let t = transition(&s, 3).unwrap();
        assert_eq!((t.frame, t.chain, t.element), (1, 0, 0));

        while (s.frame, s.chain, s.element) != (19, 2, 15) {
            s.step_in_place(1).unwrap();
        }
        assert!(!s.is_terminal());
        assert_eq!(s.step, 959);
        let t = transition(&s, 0).unwrap();
        assert!(t.is_terminal());
        assert_eq!((t.frame, t.chain, t.element), (20, 0, 0));
        assert!(matches!(transition(&t, 0), Err(Error::Contract(_))));
        assert!(matches!(transition(&s, 4), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn rollout_length_and_determinism() {
        let cfg = ExperimentConfig::default();
        let a = rollout(&mut UniformPolicy, initial_state(&cfg), false, &mut sub_stream(1, 3)).unwrap();
        let b = rollout(&mut UniformPolicy, initial_state(&cfg), false, &mut sub_stream(1, 3)).unwrap();
        assert_eq!(a.actions.len(), 960);
        assert_eq!(a, b);
        assert_eq!(replay_control(&ControlSequence::for_config(&cfg), &a.actions), a.terminal_control);
        assert!(a.terminal_reward.is_none());
    }

    #[test]
    fn greedy_ties_take_lowest_index() {
        let mut rng = sub_stream(0, 0);
        assert_eq!(choose_action(&[0.25; 4], true, &mut rng), 0);
        assert_eq!(choose_action(&[0.1, 0.4, 0.4, 0.1], true, &mut rng), 1);
    }

    #[test]
    fn uniform_policy_frequencies() {
        let cfg = ExperimentConfig::default();
        let mut rng = sub_stream(2, 3);
        let mut counts = [0usize; 4];
        let mut steps = 0;
        while steps < 10_000 {
            let t = rollout(&mut UniformPolicy, initial_state(&cfg), false, &mut rng).unwrap();
            for &a in &t.actions {
                counts[a as usize] += 1;
            }
            steps += t.actions.len();
        }
        let n = steps as f64;
        let sd = (n * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n / 4.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn reward_only_at_terminal() {
        let s = initial_state(&ExperimentConfig::default());
        assert_eq!(state_reward(&s, -5.0), 0.0);
        let mut t = s;
        for _ in 0..960 {
            t.step_in_place(0).unwrap();
        }
        assert_eq!(state_reward(&t, -5.0), -5.0);
    }

    #[test]
    fn terminal_reward_cases() {
        use crate::agents::{new_sensing_net, MeasurementPlan, Objective};
        use crate::beamforming::RadioSystem;
        use crate::neuralnet::{Activation, Layer};
        use crate::rng::{stream, Stream};
        use crate::scene::sample_scenarios;

        let mut cfg = ExperimentConfig::default();
        cfg.n_frames = 4;
        cfg.network.sensing_hidden = vec![8, 8, 8];
        let sys = RadioSystem::from_config(&cfg).unwrap();
        let scen = sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios));
        let subset = [0, 3, 7];
        let plan = MeasurementPlan { system: &sys, scenarios: &scen, subset: &subset, n_mc: 2, jam_power_w: Some(0.1) };
        let ctrl = ControlSequence::random(&cfg, &mut sub_stream(0, 1));

        let mut half = new_sensing_net(&cfg, &mut sub_stream(0, 2));
        let l = half.layers.last_mut().unwrap();
        *l = Layer::zeros(l.rows, l.cols, Activation::Sigmoid);
        half.touch();
        let r = terminal_reward(&ctrl, &half, &plan, Objective::P1, 1.0, &mut sub_stream(1, 1), &mut sub_stream(1, 2)).unwrap();
        assert!((r + 27.0 * std::f64::consts::LN_2).abs() < 1e-9);

        let net = new_sensing_net(&cfg, &mut sub_stream(0, 3));
        let p1 = terminal_reward(&ctrl, &net, &plan, Objective::P1, 0.0, &mut sub_stream(2, 1), &mut sub_stream(2, 2)).unwrap();
        let p2 = terminal_reward(&ctrl, &net, &plan, Objective::P2, 0.0, &mut sub_stream(2, 1), &mut sub_stream(2, 2)).unwrap();
        assert_eq!(p1, p2);
        let again = terminal_reward(&ctrl, &net, &plan, Objective::P2, 0.0, &mut sub_stream(2, 1), &mut sub_stream(2, 2)).unwrap();
        assert_eq!(p2, again);
        let bonus = terminal_reward(&ctrl, &net, &plan, Objective::P2, 1.0, &mut sub_stream(2, 1), &mut sub_stream(2, 2)).unwrap();
        assert!(bonus > p1);
    }
}
