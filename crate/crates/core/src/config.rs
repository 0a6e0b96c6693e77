//! Experiment configuration.
//!
//! Every tunable of a run lives in [`ExperimentConfig`]. A TOML document
//! overrides any subset of the fields; missing fields fall back to the
//! reference simulation parameters (21 dBi transmitter, 100 mW, three RF
//! chains of 16 four-state elements at 3.198 GHz, 20 frames per period).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Transmitter antenna gain, dBi.
    pub tx_gain_dbi: f64,
    /// Jammer antenna gain, dBi.
    pub jammer_gain_dbi: f64,
    /// Probe transmit power, mW.
    pub tx_power_mw: f64,
    /// Jamming power, mW. Only used by jammed runs.
    pub jam_power_mw: f64,
    pub n_rf: usize,
    /// Reconfigurable elements per RF chain.
    pub n_elements: usize,
    /// Configurations per element.
    pub n_states: usize,
    /// Element phase per configuration, radians in [0, 2π).
    pub phase_set: Vec<f64>,
    pub carrier_hz: f64,
    /// Frames per sensing period.
    pub n_frames: usize,
    /// Probability that a grid cell is occupied.
    pub p_occupied: f64,
    /// Size of the scenario set.
    pub n_scenarios: usize,
    /// Scenarios drawn per reward estimate.
    pub subset_size: usize,
    /// Per-chain receiver noise power, W.
    pub noise_power_w: f64,
    pub cell_size_m: [f64; 3],
    pub grid_dims: [usize; 3],
    pub learning_rate: f64,
    /// Weight of the SINR term in the anti-jamming objective.
    pub beta: f64,
    /// Noise draws per scenario in a reward estimate.
    pub n_mc: usize,
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub scenario: ScenarioConfig,
    pub receiver: ReceiverConfig,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub tx_pos: [f64; 3],
    pub panel_centers: Vec<[f64; 3]>,
    pub target_center: [f64; 3],
    pub jammer_center: [f64; 3],
    pub jammer_side_m: [f64; 3],
    /// Zero-based index of the chain hit by the jammer's direct path.
    /// Defaults to the panel nearest the jammer-region center.
    pub attacked_chain: Option<usize>,
    /// Element spacing in wavelengths.
    pub element_spacing_wavelengths: f64,
    /// Explicit per-chain element offsets (meters, relative to the panel
    /// center). Replaces the square lattice when present.
    pub element_offsets: Option<Vec<Vec<[f64; 3]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Range of |v_m| for occupied cells; equal bounds give a fixed magnitude.
    pub reflection_magnitude: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerMode {
    /// MRC weights from the true channel of the sensed scenario.
    Mrc,
    /// MRC weights from a nominal all-ones reflection vector.
    NominalMrc,
    /// Unweighted sum of the chain outputs.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamSignal {
    /// Unit constant symbol z = 1.
    Constant,
    /// Unit-power circular complex Gaussian symbol per frame.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub combiner: CombinerMode,
    pub jam_signal: JamSignal,
    /// Element response per configuration as (re, im) pairs. Defaults to
    /// unit-magnitude phasors at `phase_set`.
    pub response_table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub sensing_hidden: Vec<usize>,
    pub feature_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub policy_hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Policy learning rate; `learning_rate` when absent.
    pub policy_learning_rate: Option<f64>,
    /// Sensing learning rate; `learning_rate` when absent.
    pub sensing_learning_rate: Option<f64>,
    pub optimizer: OptimizerKind,
    /// Halve (by `lr_decay_factor`) the learning rates every this many
    /// epochs. Zero disables the schedule.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    /// Running-mean reward baseline for the policy gradient.
    pub baseline: bool,
    /// Smoothing of the running-mean baseline.
    pub baseline_momentum: f64,
    /// Sensing mini-batch size; zero means one step over the whole epoch.
    pub sensing_batch: usize,
    pub eval_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tx_gain_dbi: 21.0,
            jammer_gain_dbi: 21.0,
            tx_power_mw: 100.0,
            jam_power_mw: 100.0,
            n_rf: 3,
            n_elements: 16,
            n_states: 4,
            phase_set: vec![PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0],
            carrier_hz: 3.198e9,
            n_frames: 20,
            p_occupied: 0.5,
            n_scenarios: 100,
            subset_size: 100,
            // 1e-9 mW
            noise_power_w: 1e-12,
            cell_size_m: [0.1, 0.1, 0.1],
            grid_dims: [3, 3, 3],
            learning_rate: 0.001,
            beta: 1.0,
            n_mc: 10,
            seed: 0,
            geometry: GeometryConfig::default(),
            scenario: ScenarioConfig::default(),
            receiver: ReceiverConfig::default(),
            network: NetworkConfig::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            tx_pos: [0.87, -0.84, 0.0],
            panel_centers: vec![[0.0, 2.0, 2.0], [2.0, 2.0, 2.0], [1.0, 1.0, 3.0]],
            target_center: [1.0, 0.5, 1.5],
            jammer_center: [-1.0, 0.0, 0.0],
            jammer_side_m: [1.0, 1.0, 1.0],
            attacked_chain: None,
            element_spacing_wavelengths: 0.5,
            element_offsets: None,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { reflection_magnitude: [0.8, 0.8] }
    }
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            combiner: CombinerMode::Mrc,
            jam_signal: JamSignal::Constant,
            response_table: None,
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            sensing_hidden: vec![256, 128, 64],
            feature_hidden: vec![64],
            feature_dim: 16,
            policy_hidden: vec![256, 128],
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            policy_learning_rate: None,
            sensing_learning_rate: None,
            optimizer: OptimizerKind::Adam,
            lr_decay_every: 500,
            lr_decay_factor: 0.5,
            baseline: true,
            baseline_momentum: 0.9,
            sensing_batch: 0,
            eval_every: 100,
        }
    }
}

impl ExperimentConfig {
    /// Number of grid cells M.
    pub fn n_cells(&self) -> usize {
        self.grid_dims.iter().product()
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn tx_power_w(&self) -> f64 {
        self.tx_power_mw * 1e-3
    }

    pub fn jam_power_w(&self) -> f64 {
        self.jam_power_mw * 1e-3
    }

    pub fn tx_gain_linear(&self) -> f64 {
        db_to_linear(self.tx_gain_dbi)
    }

    pub fn jammer_gain_linear(&self) -> f64 {
        db_to_linear(self.jammer_gain_dbi)
    }

    pub fn policy_learning_rate(&self) -> f64 {
        self.training.policy_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn sensing_learning_rate(&self) -> f64 {
        self.training.sensing_learning_rate.unwrap_or(self.learning_rate)
    }

    /// Number of sequential decisions in one episode, K·N_RF·N.
    pub fn episode_len(&self) -> usize {
        self.n_frames * self.n_rf * self.n_elements
    }

    /// Check every invariant, collecting all violations.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.n_states != self.phase_set.len() {
            v.push(format!(
                "n_states ({}) must equal the length of phase_set ({})",
                self.n_states,
                self.phase_set.len()
            ));
        }
        if self.phase_set.iter().any(|p| !(0.0..2.0 * PI).contains(p)) {
            v.push("phase_set entries must lie in [0, 2π)".into());
        }
        if self.n_states == 0 {
            v.push("n_states must be at least 1".into());
        }
        if self.n_frames == 0 {
            v.push("n_frames must be at least 1".into());
        }
        if self.n_rf == 0 {
            v.push("n_rf must be at least 1".into());
        }
        if self.n_elements == 0 {
            v.push("n_elements must be at least 1".into());
        }
        if self.n_cells() == 0 {
            v.push("grid_dims must all be at least 1".into());
        }
        if !(self.tx_power_mw > 0.0) {
            v.push("tx_power_mw must be positive".into());
        }
        if !(self.jam_power_mw >= 0.0) {
            v.push("jam_power_mw must be non-negative".into());
        }
        if !(self.noise_power_w > 0.0) {
            v.push("noise_power_w must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_occupied) {
            v.push("p_occupied must lie in [0, 1]".into());
        }
        if !(self.carrier_hz > 0.0) {
            v.push("carrier_hz must be positive".into());
        }
        if self.cell_size_m.iter().any(|c| !(*c > 0.0)) {
            v.push("cell_size_m entries must be positive".into());
        }
        if self.n_scenarios == 0 {
            v.push("n_scenarios must be at least 1".into());
        }
        if self.subset_size == 0 || self.subset_size > self.n_scenarios {
            v.push(format!(
                "subset_size ({}) must lie in [1, n_scenarios = {}]",
                self.subset_size, self.n_scenarios
            ));
        }
        if self.n_mc == 0 {
            v.push("n_mc must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0) {
            v.push("learning_rate must be non-negative".into());
        }
        if !(self.beta >= 0.0) {
            v.push("beta must be non-negative".into());
        }
        let [lo, hi] = self.scenario.reflection_magnitude;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            v.push("scenario.reflection_magnitude must satisfy 0 < lo <= hi <= 1".into());
        }
        if self.geometry.jammer_side_m.iter().any(|s| !(*s >= 0.0)) {
            v.push("geometry.jammer_side_m entries must be non-negative".into());
        }
        if let Some(c) = self.geometry.attacked_chain {
            if c >= self.n_rf {
                v.push(format!("geometry.attacked_chain ({c}) must be below n_rf ({})", self.n_rf));
            }
        }
        if let Some(table) = &self.receiver.response_table {
            if table.len() != self.n_states {
                v.push(format!(
                    "receiver.response_table has {} entries, expected n_states = {}",
                    table.len(),
                    self.n_states
                ));
            }
            if table.iter().any(|[re, im]| re.hypot(*im) > 1.0 + 1e-12) {
                v.push("receiver.response_table entries must have magnitude <= 1".into());
            }
        }
        if self.network.feature_dim == 0 {
            v.push("network.feature_dim must be at least 1".into());
        }
        if !(self.training.lr_decay_factor > 0.0) {
            v.push("training.lr_decay_factor must be positive".into());
        }
        if !(0.0..1.0).contains(&self.training.baseline_momentum) {
            v.push("training.baseline_momentum must lie in [0, 1)".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Parse a TOML document into a validated configuration. Missing fields
/// take their defaults.
pub fn load_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Malformed {
        key: offending_key(text, e.span()),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    load_config(&text)
}

/// Recover the dotted key whose value produced a parse error from the span
/// the TOML parser reports.
fn offending_key(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    let Some(span) = span else {
        return "<document>".into();
    };
    let start = span.start.min(text.len());
    let mut table = String::new();
    let mut key = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        let line_end = offset + line.len();
        if trimmed.starts_with('[') {
            table = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if start < line_end || line_end == text.len() {
            if let Some((lhs, _)) = line.split_once('=') {
                key = Some(lhs.trim().to_string());
            } else if !trimmed.starts_with('[') && !trimmed.is_empty() {
                key = Some(trimmed.to_string());
            }
            break;
        }
        offset = line_end;
    }
    match (table.is_empty(), key) {
        (_, None) if !table.is_empty() => table,
        (true, Some(k)) => k,
        (false, Some(k)) => format!("{table}.{k}"),
        _ => "<document>".into(),
    }
}
