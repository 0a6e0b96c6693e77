use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use rfsense_cli::*;
use rfsense_core::agents::Objective;
use rfsense_core::baselines::Variant;

#[derive(Parser)]
#[command(name = "rfsense", version, about = "Metasurface RF sensing: training, sweeps and baselines")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    P1,
    P2,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Distributed,
    Centralized,
    NoCombiner,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn check_powers(p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        anyhow::bail!("jam powers must be finite and non-negative");
    }
    Ok(())
}

#[derive(Subcommand)]
enum Cmd {
    /// Train policy and sensing networks; writes metrics, checkpoints and a manifest.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "p1")]
        mode: Mode,
        #[arg(long)]
        epochs: usize,
        /// Jam the measurements during P1 training as well.
        #[arg(long)]
        jammed: bool,
        /// Record wall-clock time per epoch (makes metrics.csv non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long, value_enum, default_value = "distributed")]
        variant: VariantArg,
        /// Start from this model instead of a fresh initialization.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Accuracy and SINR of a plain and an anti-jam model over jam powers.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated powers in mW.
        #[arg(long, value_delimiter = ',', default_value = "0,100,200,300")]
        jam_powers: Vec<f64>,
        /// Plain model first, anti-jam model second.
        #[arg(long, num_args = 1, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Mean SINR of no defense, zero forcing and the proposed receiver.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100,200,300")]
        jam_powers: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Anti-jam model; one is trained with --epochs when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 1500)]
        epochs: usize,
    },
    /// Policy training against exhaustive search on a tiny instance.
    Oracle {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 4)]
        required: usize,
    },
    /// Finite-difference gradient checks.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        architectures: usize,
        /// Also check the networks stored in this model file.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Render metrics.csv columns as an SVG line chart.
    Plot {
        #[arg(long, num_args = 1, required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value = "ce_loss")]
        column: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
    /// Check a run directory against its manifest.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Train { common, out, mode, epochs, jammed, timing, variant, init } => {
            let m = cmd_train(&TrainArgs {
                config: common.config,
                seed: common.seed,
                out: out.clone(),
                mode: match mode {
                    Mode::P1 => Objective::P1,
                    Mode::P2 => Objective::P2,
                },
                epochs,
                jammed,
                timing,
                variant: match variant {
                    VariantArg::Distributed => Variant::Distributed,
                    VariantArg::Centralized => Variant::Centralized,
                    VariantArg::NoCombiner => Variant::NoCombiner,
                },
                init,
            })?;
            println!("wrote {} files to {}", m.files.len() + 1, out.display());
            Ok(true)
        }
        Cmd::Sweep { common, out, jam_powers, checkpoint, trials } => {
            check_powers(&jam_powers)?;
            let [plain, anti]: [PathBuf; 2] = checkpoint
                .try_into()
                .map_err(|_| anyhow::anyhow!("--checkpoint must be given exactly twice (plain, anti-jam)"))?;
            let res = cmd_sweep(&SweepArgs {
                config: common.config,
                seed: common.seed,
                out,
                jam_powers_mw: jam_powers,
                checkpoints: [plain, anti],
                trials,
            })?;
            for r in &res.rows {
                println!("{:>8} mW  {:<8} accuracy {:.4}  sinr {:.2} dB", r.jam_power_mw, r.model, r.accuracy, r.mean_sinr_db);
            }
            println!(
                "plain accuracy non-increasing in jam power: {}",
                if res.plain_monotone { "yes" } else { "no" }
            );
            Ok(true)
        }
        Cmd::Baseline { common, out, jam_powers, trials, checkpoint, epochs } => {
            check_powers(&jam_powers)?;
            let t = cmd_baseline(&BaselineArgs {
                config: common.config,
                seed: common.seed,
                out,
                jam_powers_mw: jam_powers,
                trials,
                checkpoint,
                epochs,
            })?;
            for r in &t.rows {
                println!("{:>8} mW  {:<13} {:8.2} dB", r.jam_power_mw, r.method.as_str(), r.mean_sinr_db);
            }
            Ok(true)
        }
        Cmd::Oracle { seeds, required } => {
            let o = oracle(&seeds, required)?;
            for r in &o.reports {
                println!(
                    "seed {:>3}: best {:.4}  uniform {:.4}  greedy {:.4}  normalized {:.3} (target {ORACLE_TARGET}) after {} epochs",
                    r.seed, r.best_reward, r.uniform_mean, r.achieved, r.normalized, r.epochs_used
                );
            }
            println!("{}/{} seeds reached the target, {} required", o.successes(), o.reports.len(), o.required);
            Ok(o.passed)
        }
        Cmd::Gradcheck { common, architectures, checkpoint } => {
            let cfg = effective_config(common.config.as_deref(), common.seed)?;
            let g = gradcheck(&cfg, architectures, checkpoint.as_deref())?;
            for c in &g.checks {
                println!(
                    "{:<28} {:?}  max rel err {:.2e}  tol {:.0e}  {} params  {}",
                    c.name,
                    c.dims,
                    c.max_rel_err,
                    c.tolerance,
                    c.n_checked,
                    if c.passed { "ok" } else { "FAIL" }
                );
            }
            Ok(g.passed)
        }
        Cmd::Plot { metrics, column, out, title } => {
            cmd_plot(&PlotArgs { metrics, column, out, title })?;
            Ok(true)
        }
        Cmd::Verify { run } => {
            let problems = cmd_verify(&run)?;
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!("all files match the manifest");
            }
            Ok(problems.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
