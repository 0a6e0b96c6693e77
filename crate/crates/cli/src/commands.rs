use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rfsense_core::agents::{
    evaluate, gradcheck_model, gradcheck_suite, train_from, train_with, ArchCheck, Objective, TrainRunConfig, TrainedModel,
};
use rfsense_core::baselines::{
    proposed_sinr, tiny_config, tiny_oracle, variant_config, zero_forcing_sinr, OracleReport, OracleSettings, SinrTable,
    Variant,
};
use rfsense_core::beamforming::RadioSystem;
use rfsense_core::config::{load_config_file, ExperimentConfig};
use rfsense_core::rng::{stream, Stream};
use rfsense_core::scene::{sample_scenarios, Scenario};

use crate::manifest::{inventory, unix_now, verify_dir, RunManifest};
use crate::metrics::{column, metrics_csv, read_metrics, METRICS_FILE};
use crate::plot::{line_chart, Series};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const MODEL_FILE: &str = "model.json";

/// Loads `path` (defaults when absent) and applies a seed override.
pub fn effective_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config_file(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").with_context(|| format!("{} is not writable", dir.display()))?;
    fs::remove_file(probe)?;
    Ok(())
}

fn finish_run(dir: &Path, command: &str, cfg: &ExperimentConfig, mode: &str, started: u64) -> Result<RunManifest> {
    fs::write(dir.join(CONFIG_SNAPSHOT), cfg.to_toml())?;
    let m = RunManifest {
        command: command.to_string(),
        config: CONFIG_SNAPSHOT.to_string(),
        seed: cfg.seed,
        mode: mode.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        files: inventory(dir)?,
    };
    m.write(dir)?;
    Ok(m)
}

fn world(cfg: &ExperimentConfig) -> Result<(RadioSystem, Vec<Scenario>)> {
    let system = RadioSystem::from_config(cfg)?;
    let scenarios = sample_scenarios(cfg, &mut stream(cfg.seed, Stream::Scenarios));
    Ok((system, scenarios))
}

pub fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::P1 => "p1",
        Objective::P2 => "p2",
    }
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub mode: Objective,
    pub epochs: usize,
    /// Jam the measurements even when training on P1.
    pub jammed: bool,
    pub timing: bool,
    pub variant: Variant,
    /// Warm start from a saved model.
    pub init: Option<PathBuf>,
}

pub fn cmd_train(a: &TrainArgs) -> Result<RunManifest> {
    let started = unix_now();
    let cfg = variant_config(&effective_config(a.config.as_deref(), a.seed)?, a.variant)?;
    prepare_out(&a.out)?;
    let (system, scenarios) = world(&cfg)?;
    let mut run = TrainRunConfig::from_config(&cfg, a.mode, a.epochs);
    run.jammed |= a.jammed;
    run.timing = a.timing;
    let ckpt_dir = a.out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let start = match &a.init {
        Some(p) => load_model(p, &cfg)?,
        None => TrainedModel::new(&cfg),
    };
    let report = train_from(&cfg, &run, &system, &scenarios, start, &mut |epoch, model| {
        fs::write(ckpt_dir.join(format!("epoch_{epoch:05}.json")), model.to_json())?;
        Ok(())
    })?;
    fs::write(a.out.join(METRICS_FILE), metrics_csv(&report.rows)?)?;
    fs::write(a.out.join(MODEL_FILE), report.model.to_json())?;
    let mut mode = objective_name(a.mode).to_string();
    if run.jammed && a.mode == Objective::P1 {
        mode.push_str("+jammed");
    }
    finish_run(&a.out, "train", &cfg, &mode, started)
}

pub fn load_model(path: &Path, cfg: &ExperimentConfig) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TrainedModel::from_json(&text, cfg).with_context(|| format!("loading checkpoint {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub jam_powers_mw: Vec<f64>,
    /// Plain model, then anti-jam model.
    pub checkpoints: [PathBuf; 2],
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub jam_power_mw: f64,
    pub model: String,
    pub accuracy: f64,
    pub mean_sinr_db: f64,
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub plain_monotone: bool,
}

/// Accuracy and SINR of both models at each jam power on the fixed
/// evaluation stream.
pub fn sweep(cfg: &ExperimentConfig, models: [&TrainedModel; 2], powers: &[f64], trials: usize) -> Result<SweepResult> {
    let (system, scenarios) = world(cfg)?;
    let n_mc = trials.div_ceil(scenarios.len()).max(1);
    let mut rows = Vec::new();
    for (name, model) in ["plain", "antijam"].iter().zip(models) {
        for &p in powers {
            let jam = (p > 0.0).then_some(p * 1e-3);
            let s = evaluate(model, cfg, &system, &scenarios, jam, n_mc, cfg.seed)?;
            rows.push(SweepRow { jam_power_mw: p, model: name.to_string(), accuracy: s.accuracy, mean_sinr_db: s.mean_sinr_db });
        }
    }
    let plain: Vec<f64> = rows.iter().filter(|r| r.model == "plain").map(|r| r.accuracy).collect();
    let plain_monotone = plain.windows(2).all(|w| w[1] <= w[0]);
    Ok(SweepResult { rows, plain_monotone })
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<SweepResult> {
    let started = unix_now();
    let cfg = effective_config(a.config.as_deref(), a.seed)?;
    prepare_out(&a.out)?;
    let plain = load_model(&a.checkpoints[0], &cfg)?;
    let anti = load_model(&a.checkpoints[1], &cfg)?;
    let res = sweep(&cfg, [&plain, &anti], &a.jam_powers_mw, a.trials)?;
    fs::write(a.out.join("sweep.csv"), sweep_csv(&res.rows)?)?;
    finish_run(&a.out, "sweep", &cfg, "eval", started)?;
    Ok(res)
}

#[derive(Debug, Clone)]
pub struct BaselineArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub jam_powers_mw: Vec<f64>,
    pub trials: usize,
    /// Anti-jam model for the proposed rows; trained here when absent.
    pub checkpoint: Option<PathBuf>,
    pub epochs: usize,
}

/// The three-method table: conventional MRC, conventional zero forcing and
/// the proposed receiver under `model`.
pub fn baseline_table(cfg: &ExperimentConfig, model: &TrainedModel, powers: &[f64], trials: usize) -> Result<SinrTable> {
    let (system, scenarios) = world(cfg)?;
    let mut table = zero_forcing_sinr(cfg, &system.scene, &scenarios, powers, trials, cfg.seed)?;
    let proposed = proposed_sinr(model, cfg, &system, &scenarios, powers, trials, cfg.seed)?;
    table.rows.extend(proposed.rows);
    Ok(table)
}

pub fn cmd_baseline(a: &BaselineArgs) -> Result<SinrTable> {
    let started = unix_now();
    let cfg = effective_config(a.config.as_deref(), a.seed)?;
    prepare_out(&a.out)?;
    let model = match &a.checkpoint {
        Some(p) => load_model(p, &cfg)?,
        None => {
            let (system, scenarios) = world(&cfg)?;
            let run = TrainRunConfig::from_config(&cfg, Objective::P2, a.epochs);
            let report = train_with(&cfg, &run, &system, &scenarios, &mut |_, _| Ok(()))?;
            fs::write(a.out.join(MODEL_FILE), report.model.to_json())?;
            report.model
        }
    };
    let table = baseline_table(&cfg, &model, &a.jam_powers_mw, a.trials)?;
    fs::write(a.out.join("sinr_table.csv"), table.to_csv()?)?;
    finish_run(&a.out, "baseline", &cfg, "eval", started)?;
    Ok(table)
}

pub const ORACLE_TARGET: f64 = 0.95;

pub struct OracleOutcome {
    pub reports: Vec<OracleReport>,
    pub required: usize,
    pub passed: bool,
}

impl OracleOutcome {
    pub fn successes(&self) -> usize {
        self.reports.iter().filter(|r| r.normalized >= ORACLE_TARGET).count()
    }
}

/// Policy training against exhaustive search on the tiny instance for
/// `seeds`; passes when at least `required` seeds reach the target and no
/// seed beats the exhaustive optimum.
pub fn oracle(seeds: &[u64], required: usize) -> Result<OracleOutcome> {
    let cfg = tiny_config();
    let set = OracleSettings { target: ORACLE_TARGET, ..OracleSettings::default() };
    let reports = seeds
        .iter()
        .map(|&s| tiny_oracle(&cfg, s, &set))
        .collect::<rfsense_core::Result<Vec<_>>>()?;
    let dominated = reports.iter().all(|r| r.achieved <= r.best_reward);
    let ok = reports.iter().filter(|r| r.normalized >= ORACLE_TARGET).count();
    Ok(OracleOutcome { passed: dominated && ok >= required, reports, required })
}

pub struct GradcheckOutcome {
    pub checks: Vec<ArchCheck>,
    pub passed: bool,
}

/// The architecture suite, plus the three networks of a checkpoint when
/// one is given.
pub fn gradcheck(cfg: &ExperimentConfig, n: usize, checkpoint: Option<&Path>) -> Result<GradcheckOutcome> {
    let mut checks = gradcheck_suite(cfg, n, cfg.seed)?;
    if let Some(p) = checkpoint {
        let model = load_model(p, cfg)?;
        checks.extend(gradcheck_model(&model, cfg.seed)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradcheckOutcome { checks, passed })
}

#[derive(Debug, Clone)]
pub struct PlotArgs {
    pub metrics: Vec<PathBuf>,
    pub column: String,
    pub out: PathBuf,
    pub title: Option<String>,
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    if a.metrics.is_empty() {
        bail!("at least one metrics file is required");
    }
    let mut series = Vec::new();
    for p in &a.metrics {
        let rows = read_metrics(p)?;
        let points = rows
            .iter()
            .map(|r| column(r, &a.column).map(|y| (r.epoch as f64, y)))
            .collect::<Option<Vec<_>>>()
            .with_context(|| format!("unknown column '{}'", a.column))?;
        let label = p
            .parent()
            .and_then(|d| d.file_name())
            .or_else(|| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        series.push(Series { label, points });
    }
    let title = a.title.clone().unwrap_or_else(|| format!("{} vs epoch", a.column));
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(&a.out, line_chart(&title, "epoch", &a.column, &series))?;
    Ok(())
}

pub fn cmd_verify(dir: &Path) -> Result<Vec<String>> {
    verify_dir(dir)
}
