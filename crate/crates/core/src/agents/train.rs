//! Joint training of the policy and sensing networks.

use std::time::Instant;

use rand::seq::{index::sample, SliceRandom};
use serde::{Deserialize, Serialize};

use super::policy::{Baseline, FrameFeatures, PolicyDims, PolicyEvaluator, PolicyNet, PolicyOptimizers};
use super::policy::policy_update;
use super::sensing::{collect_measurements, new_sensing_net, score, sensing_update, MeasurementPlan, Score};
use super::Objective;
use crate::beamforming::{ControlSequence, RadioSystem};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mdp::rollout;
use crate::neuralnet::{step_decay, CheckpointDoc, DenseNet, Optimizer};
use crate::rng::{stream, sub_stream, SimRng, Stream};
use crate::scene::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRunConfig {
    pub objective: Objective,
    pub epochs: usize,
    pub subset_size: usize,
    pub n_mc: usize,
    pub baseline_enabled: bool,
    pub eval_every: usize,
    /// Jammer present during training, at the configured jamming power.
    pub jammed: bool,
    /// Record wall-clock time per epoch (otherwise the column is zero).
    pub timing: bool,
}

impl TrainRunConfig {
    /// P2 runs are jammed, P1 runs are clean.
    pub fn from_config(cfg: &ExperimentConfig, objective: Objective, epochs: usize) -> Self {
        Self {
            objective,
            epochs,
            subset_size: cfg.subset_size,
            n_mc: cfg.n_mc,
            baseline_enabled: cfg.training.baseline,
            eval_every: cfg.training.eval_every,
            jammed: objective == Objective::P2,
            timing: false,
        }
    }

    pub fn validate(&self, n_scenarios: usize) -> Result<()> {
        let mut v = Vec::new();
        if self.subset_size == 0 || self.subset_size > n_scenarios {
            v.push(format!("subset_size must lie in [1, {n_scenarios}], got {}", self.subset_size));
        }
        if self.n_mc == 0 {
            v.push("n_mc must be at least 1".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub ce_loss: f64,
    pub combined_loss: f64,
    pub mean_sinr_db: f64,
    pub accuracy: f64,
    pub wall_ms: u64,
    pub scenario_accuracy: f64,
}

impl MetricsRow {
    fn from_score(epoch: usize, s: &Score, wall_ms: u64) -> Self {
        Self {
            epoch,
            ce_loss: s.ce,
            combined_loss: s.combined,
            mean_sinr_db: s.mean_sinr_db,
            accuracy: s.accuracy,
            wall_ms,
            scenario_accuracy: s.scenario_accuracy,
        }
    }
}

/// Both networks of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub policy: PolicyNet,
    pub sensing: DenseNet,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    policy_feature: CheckpointDoc,
    policy_head: CheckpointDoc,
    sensing: CheckpointDoc,
}

impl TrainedModel {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let mut rng = stream(cfg.seed, Stream::Init);
        let policy = PolicyNet::new(cfg, &mut rng);
        let sensing = new_sensing_net(cfg, &mut rng);
        Self { policy, sensing }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDoc {
            policy_feature: CheckpointDoc::from_net(&self.policy.feature),
            policy_head: CheckpointDoc::from_net(&self.policy.head),
            sensing: CheckpointDoc::from_net(&self.sensing),
        })
        .expect("plain data serializes")
    }

    pub fn from_json(text: &str, cfg: &ExperimentConfig) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::CheckpointParse(e.to_string()))?;
        let policy = PolicyNet::from_parts(
            PolicyDims::from_config(cfg),
            doc.policy_feature.into_net()?,
            doc.policy_head.into_net()?,
        )?;
        let sensing = doc.sensing.into_net()?;
        let m = cfg.n_cells();
        if sensing.input_dim() != 2 * m || sensing.output_dim() != m {
            return Err(Error::IncompatibleCheckpoint(format!(
                "sensing network {:?} does not fit {} cells",
                sensing.dims(),
                m
            )));
        }
        Ok(Self { policy, sensing })
    }

    /// Control sequence chosen greedily by the policy.
    pub fn greedy_control(&self, feats: &FrameFeatures) -> Result<ControlSequence> {
        let mut ev = PolicyEvaluator::new(&self.policy, feats)?;
        let t = rollout(&mut ev, self.policy.dims.initial_state(), true, &mut sub_stream(0, 0))?;
        Ok(t.terminal_control)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<MetricsRow>,
    pub model: TrainedModel,
}

impl RunReport {
    /// Mean of a column over the last `n` epochs (epoch 0 excluded unless
    /// it is the only row).
    pub fn tail_mean(&self, n: usize, f: impl Fn(&MetricsRow) -> f64) -> f64 {
        let trained: Vec<&MetricsRow> = self.rows.iter().filter(|r| r.epoch > 0).collect();
        let rows: Vec<&MetricsRow> = if trained.is_empty() { self.rows.iter().collect() } else { trained };
        let take = n.min(rows.len()).max(1);
        rows[rows.len() - take..].iter().map(|r| f(r)).sum::<f64>() / take as f64
    }
}

/// Stateful trainer; `train` drives it to completion.
pub struct Trainer<'a> {
    pub cfg: ExperimentConfig,
    pub run: TrainRunConfig,
    pub system: &'a RadioSystem,
    pub scenarios: &'a [Scenario],
    pub feats: FrameFeatures,
    pub model: TrainedModel,
    policy_opt: PolicyOptimizers,
    sensing_opt: Optimizer,
    baseline: Baseline,
    policy_rng: SimRng,
    subset_rng: SimRng,
    noise_rng: SimRng,
    jammer_rng: SimRng,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: &ExperimentConfig,
        run: &TrainRunConfig,
        system: &'a RadioSystem,
        scenarios: &'a [Scenario],
    ) -> Result<Self> {
        Self::from_model(cfg, run, system, scenarios, TrainedModel::new(cfg))
    }

    /// Continues training `model` (warm start) with fresh optimizer state.
    pub fn from_model(
        cfg: &ExperimentConfig,
        run: &TrainRunConfig,
        system: &'a RadioSystem,
        scenarios: &'a [Scenario],
        model: TrainedModel,
    ) -> Result<Self> {
        run.validate(scenarios.len())?;
        let seed = cfg.seed;
        Ok(Self {
            feats: FrameFeatures::from_system(system),
            policy_opt: PolicyOptimizers::new(cfg.training.optimizer, &model.policy),
            sensing_opt: Optimizer::new(cfg.training.optimizer, &model.sensing),
            baseline: Baseline::new(run.baseline_enabled, cfg.training.baseline_momentum),
            policy_rng: stream(seed, Stream::Policy),
            subset_rng: stream(seed, Stream::Subset),
            noise_rng: stream(seed, Stream::Noise),
            jammer_rng: stream(seed, Stream::Jammer),
            cfg: cfg.clone(),
            run: run.clone(),
            system,
            scenarios,
            model,
            epoch: 0,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn jam_power(&self) -> Option<f64> {
        self.run.jammed.then(|| self.cfg.jam_power_w())
    }

    /// One epoch (or, before the first epoch, the initial evaluation).
    pub fn step(&mut self) -> Result<MetricsRow> {
        let started = Instant::now();
        let evaluation_only = self.epoch == 0;
        let mut ev = PolicyEvaluator::new(&self.model.policy, &self.feats)?;
        let mut trace = rollout(&mut ev, self.model.policy.dims.initial_state(), false, &mut self.policy_rng)?;

        let mut subset: Vec<usize> = sample(&mut self.subset_rng, self.scenarios.len(), self.run.subset_size).into_vec();
        subset.sort_unstable();
        let plan = MeasurementPlan {
            system: self.system,
            scenarios: self.scenarios,
            subset: &subset,
            n_mc: self.run.n_mc,
            jam_power_w: self.jam_power(),
        };
        let mut meas = collect_measurements(&trace.terminal_control, &plan, &mut self.noise_rng, &mut self.jammer_rng)?;

        let decay = |lr: f64, e: usize| step_decay(lr, e, self.cfg.training.lr_decay_every, self.cfg.training.lr_decay_factor);
        if !evaluation_only {
            let lr = decay(self.cfg.sensing_learning_rate(), self.epoch - 1);
            let labels: Vec<Vec<f64>> = self.scenarios.iter().map(|s| s.labels()).collect();
            let batch = match self.cfg.training.sensing_batch {
                0 => meas.len(),
                b => b,
            };
            if batch < meas.len() {
                meas.shuffle(&mut self.subset_rng);
            }
            for chunk in meas.chunks(batch) {
                let xs: Vec<&[f64]> = chunk.iter().map(|m| m.input.as_slice()).collect();
                let ys: Vec<&[f64]> = chunk.iter().map(|m| labels[m.scenario].as_slice()).collect();
                sensing_update(&mut self.model.sensing, &mut self.sensing_opt, &xs, &ys, lr)?;
            }
        }

        let s = score(&self.model.sensing, &meas, self.scenarios, self.run.objective, self.cfg.beta)?;
        if !evaluation_only {
            trace.terminal_reward = Some(s.reward);
            let lr = decay(self.cfg.policy_learning_rate(), self.epoch - 1);
            let mut buffer = vec![trace];
            policy_update(&mut self.model.policy, &mut self.policy_opt, &self.feats, &mut buffer, lr, &mut self.baseline)?;
        }
        let wall = if self.run.timing { started.elapsed().as_millis() as u64 } else { 0 };
        let row = MetricsRow::from_score(self.epoch, &s, wall);
        self.epoch += 1;
        Ok(row)
    }
}

/// Trains for `run.epochs` epochs. `on_checkpoint` sees the model every
/// `eval_every` epochs and after the last one.
pub fn train_with(
    cfg: &ExperimentConfig,
    run: &TrainRunConfig,
    system: &RadioSystem,
    scenarios: &[Scenario],
    on_checkpoint: &mut dyn FnMut(usize, &TrainedModel) -> Result<()>,
) -> Result<RunReport> {
    train_from(cfg, run, system, scenarios, TrainedModel::new(cfg), on_checkpoint)
}

/// Like `train_with`, starting from an existing model.
pub fn train_from(
    cfg: &ExperimentConfig,
    run: &TrainRunConfig,
    system: &RadioSystem,
    scenarios: &[Scenario],
    model: TrainedModel,
    on_checkpoint: &mut dyn FnMut(usize, &TrainedModel) -> Result<()>,
) -> Result<RunReport> {
    let mut trainer = Trainer::from_model(cfg, run, system, scenarios, model)?;
    let mut rows = Vec::with_capacity(run.epochs + 1);
    for _ in 0..=run.epochs {
        let row = trainer.step()?;
        let e = row.epoch;
        rows.push(row);
        if e > 0 && ((run.eval_every > 0 && e % run.eval_every == 0) || e == run.epochs) {
            on_checkpoint(e, &trainer.model)?;
        }
    }
    Ok(RunReport { rows, model: trainer.model })
}

pub fn train(
    cfg: &ExperimentConfig,
    run: &TrainRunConfig,
    system: &RadioSystem,
    scenarios: &[Scenario],
) -> Result<RunReport> {
    train_with(cfg, run, system, scenarios, &mut |_, _| Ok(()))
}

/// Scores a trained model's greedy configuration on every scenario with
/// `n_mc` draws from the evaluation stream of `seed`.
pub fn evaluate(
    model: &TrainedModel,
    cfg: &ExperimentConfig,
    system: &RadioSystem,
    scenarios: &[Scenario],
    jam_power_w: Option<f64>,
    n_mc: usize,
    seed: u64,
) -> Result<Score> {
    let feats = FrameFeatures::from_system(system);
    let ctrl = model.greedy_control(&feats)?;
    let subset: Vec<usize> = (0..scenarios.len()).collect();
    let plan = MeasurementPlan { system, scenarios, subset: &subset, n_mc, jam_power_w };
    let mut noise = sub_stream(seed, Stream::Evaluation as u64 * 1000 + 1);
    let mut jam = sub_stream(seed, Stream::Evaluation as u64 * 1000 + 2);
    let meas = collect_measurements(&ctrl, &plan, &mut noise, &mut jam)?;
    let objective = if jam_power_w.is_some() { Objective::P2 } else { Objective::P1 };
    score(&model.sensing, &meas, scenarios, objective, cfg.beta)
}
