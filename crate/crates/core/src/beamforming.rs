//! Beamforming patterns, control matrices, MRC combining and synthesis of
//! the combined measurements of one sensing period.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{build_jammer_los, ProjectionMatrix, ReceiveGains, Source, SourceGains};
use crate::config::{CombinerMode, ExperimentConfig, JamSignal};
use crate::error::{Error, Result};
use crate::scene::{ElementResponseTable, Scenario, Scene, Vec3};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Configuration choice for each element of one panel. Indices are
/// zero-based: `configs[n] ∈ [0, n_states)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamformerPattern {
    pub configs: Vec<usize>,
    pub n_states: usize,
}

impl BeamformerPattern {
    /// Binary vector of length N·N_s with a single one per element block.
    pub fn onehot(&self) -> Vec<u8> {
        let mut v = vec![0u8; self.configs.len() * self.n_states];
        for (n, &c) in self.configs.iter().enumerate() {
            v[n * self.n_states + c] = 1;
        }
        v
    }
}

pub fn encode_pattern(configs: &[usize], n_states: usize) -> Result<BeamformerPattern> {
    if let Some((n, c)) = configs.iter().enumerate().find(|(_, &c)| c >= n_states) {
        return Err(Error::OutOfRange(format!(
            "element {n} configuration {c} outside [0, {n_states})"
        )));
    }
    Ok(BeamformerPattern { configs: configs.to_vec(), n_states })
}

/// One frame: a pattern per RF chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMatrix {
    pub patterns: Vec<BeamformerPattern>,
}

/// Patterns of every chain over the K frames of a period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlSequence {
    pub n_frames: usize,
    pub n_rf: usize,
    pub n_elements: usize,
    pub n_states: usize,
    /// `[k][chain][n]`, flattened.
    pub configs: Vec<u8>,
}

impl ControlSequence {
    /// Every element in its first configuration.
    pub fn initial(n_frames: usize, n_rf: usize, n_elements: usize, n_states: usize) -> Self {
        assert!(n_states <= u8::MAX as usize + 1);
        Self { n_frames, n_rf, n_elements, n_states, configs: vec![0; n_frames * n_rf * n_elements] }
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self::initial(cfg.n_frames, cfg.n_rf, cfg.n_elements, cfg.n_states)
    }

    pub fn random<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Self {
        let mut seq = Self::for_config(cfg);
        for c in seq.configs.iter_mut() {
            *c = rng.random_range(0..cfg.n_states) as u8;
        }
        seq
    }

    /// Sequence number `index` in lexicographic order of the flattened
    /// configurations (last slot fastest).
    pub fn from_index(template: &Self, mut index: u128) -> Self {
        let mut seq = template.clone();
        for c in seq.configs.iter_mut().rev() {
            *c = (index % seq.n_states as u128) as u8;
            index /= seq.n_states as u128;
        }
        seq
    }

    pub fn slot(&self, k: usize, chain: usize, n: usize) -> usize {
        (k * self.n_rf + chain) * self.n_elements + n
    }

    pub fn get(&self, k: usize, chain: usize, n: usize) -> usize {
        self.configs[self.slot(k, chain, n)] as usize
    }

    pub fn set(&mut self, k: usize, chain: usize, n: usize, config: usize) {
        let s = self.slot(k, chain, n);
        self.configs[s] = config as u8;
    }

    pub fn pattern(&self, k: usize, chain: usize) -> BeamformerPattern {
        let start = self.slot(k, chain, 0);
        BeamformerPattern {
            configs: self.configs[start..start + self.n_elements].iter().map(|&c| c as usize).collect(),
            n_states: self.n_states,
        }
    }

    pub fn frame(&self, k: usize) -> ControlMatrix {
        ControlMatrix { patterns: (0..self.n_rf).map(|c| self.pattern(k, c)).collect() }
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// h[chain] = c_chainᵀ · A_chain · v
pub fn effective_channel(c: &ControlMatrix, a: &ProjectionMatrix, v: &[Complex64]) -> Vec<Complex64> {
    c.patterns
        .iter()
        .zip(&a.blocks)
        .map(|(pattern, block)| {
            let mut h = ZERO;
            for (n, &cfg) in pattern.configs.iter().enumerate() {
                let row = n * pattern.n_states + cfg;
                for (m, vm) in v.iter().enumerate() {
                    h += block[(row, m)] * vm;
                }
            }
            h
        })
        .collect()
}

/// wᵀ = hᴴ / ‖h‖²
pub fn mrc_weights(h: &[Complex64]) -> Result<Vec<Complex64>> {
    let power: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    Ok(h.iter().map(|z| z.conj() / power).collect())
}

/// Combined measurements of one period and the matrices that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBatch {
    /// ŷ, or ŷ_J when jammed.
    pub y_hat: DVector<Complex64>,
    /// Γ_Tx, K × M, including √P_Tx and the probe symbol.
    pub gamma_tx: DMatrix<Complex64>,
    /// Γ_J, K × M, including √P_J and the jamming symbol.
    pub gamma_j: Option<DMatrix<Complex64>>,
    /// Combined direct jamming path per frame, including √P_J z.
    pub y_jlos: Option<DVector<Complex64>>,
    /// Post-combining noise power per frame, ε‖w_k‖².
    pub noise_power: Vec<f64>,
}

impl ReceivedBatch {
    pub fn jammed(&self) -> bool {
        self.gamma_j.is_some() && self.y_jlos.is_some()
    }

    pub fn total_noise_power(&self) -> f64 {
        self.noise_power.iter().sum()
    }
}

/// Jammer position and power for one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JammerDraw {
    pub pos: Vec3,
    pub power_w: f64,
}

/// Precomputed channel state of a scene: the factored gains plus the
/// receiver settings needed to synthesize measurements.
#[derive(Debug, Clone)]
pub struct RadioSystem {
    pub scene: Scene,
    pub table: ElementResponseTable,
    pub rx: ReceiveGains,
    pub tx: SourceGains,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    pub jammer_gain: f64,
    pub combiner: CombinerMode,
    pub jam_signal: JamSignal,
}

/// Per-frame, per-chain selected receive rows c_{k,chain}ᵀ·B_chain (the
/// source factor not yet applied), plus the same rows with the transmitter
/// factor applied.
#[derive(Debug, Clone)]
pub struct SelectedRows {
    pub n_frames: usize,
    pub n_rf: usize,
    pub n_cells: usize,
    /// `[k][chain][m]`
    pub receive: Vec<Complex64>,
    /// `[k][chain][m]`, rows of C_k·A.
    pub tx: Vec<Complex64>,
}

impl SelectedRows {
    pub fn tx_row(&self, k: usize, chain: usize) -> &[Complex64] {
        let s = (k * self.n_rf + chain) * self.n_cells;
        &self.tx[s..s + self.n_cells]
    }

    pub fn receive_row(&self, k: usize, chain: usize) -> &[Complex64] {
        let s = (k * self.n_rf + chain) * self.n_cells;
        &self.receive[s..s + self.n_cells]
    }
}

impl RadioSystem {
    pub fn new(cfg: &ExperimentConfig, scene: Scene) -> Self {
        let table = ElementResponseTable::from_config(cfg);
        let rx = ReceiveGains::new(&scene, &table);
        let tx = SourceGains::new(&scene, &Source::transmitter(&scene, cfg));
        Self {
            rx,
            tx,
            table,
            tx_power_w: cfg.tx_power_w(),
            noise_power_w: cfg.noise_power_w,
            jammer_gain: cfg.jammer_gain_linear(),
            combiner: cfg.receiver.combiner,
            jam_signal: cfg.receiver.jam_signal,
            scene,
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self::new(cfg, crate::scene::build_scene(cfg)?))
    }

    pub fn n_cells(&self) -> usize {
        self.rx.n_cells
    }

    /// Receive row of one chain for a pattern: Σ_n r(c_n) b_{chain,n}.
    pub fn pattern_row(&self, chain: usize, configs: &[u8], out: &mut [Complex64]) {
        out.fill(ZERO);
        for (n, &c) in configs.iter().enumerate() {
            let r = self.rx.response[c as usize];
            for (o, b) in out.iter_mut().zip(self.rx.element(chain, n)) {
                *o += r * b;
            }
        }
    }

    pub fn select_rows(&self, seq: &ControlSequence) -> SelectedRows {
        let m = self.n_cells();
        let mut receive = vec![ZERO; seq.n_frames * seq.n_rf * m];
        for k in 0..seq.n_frames {
            for c in 0..seq.n_rf {
                let s = seq.slot(k, c, 0);
                let off = (k * seq.n_rf + c) * m;
                self.pattern_row(c, &seq.configs[s..s + seq.n_elements], &mut receive[off..off + m]);
            }
        }
        let tx = receive
            .chunks(m)
            .flat_map(|row| row.iter().zip(&self.tx.per_cell).map(|(r, s)| r * s))
            .collect();
        SelectedRows { n_frames: seq.n_frames, n_rf: seq.n_rf, n_cells: m, receive, tx }
    }

    /// Combining weights for frame `k`.
    pub fn combiner_weights(&self, rows: &SelectedRows, k: usize, v: &[Complex64]) -> Result<Vec<Complex64>> {
        match self.combiner {
            CombinerMode::Sum => Ok(vec![Complex64::new(1.0, 0.0); rows.n_rf]),
            CombinerMode::Mrc => {
                let h: Vec<Complex64> =
                    (0..rows.n_rf).map(|c| dot_u(rows.tx_row(k, c), v)).collect();
                mrc_weights(&h)
            }
            CombinerMode::NominalMrc => {
                let h: Vec<Complex64> =
                    (0..rows.n_rf).map(|c| rows.tx_row(k, c).iter().sum()).collect();
                mrc_weights(&h)
            }
        }
    }

    /// Combined measurements of one period for a scenario.
    pub fn synthesize<R: Rng>(
        &self,
        rows: &SelectedRows,
        scenario: &Scenario,
        rng: &mut R,
        jammer: Option<JammerDraw>,
    ) -> Result<ReceivedBatch> {
        let (k_frames, n_rf, m) = (rows.n_frames, rows.n_rf, rows.n_cells);
        let v = &scenario.reflection;
        if v.len() != m {
            return Err(Error::Shape(format!("scenario has {} cells, system has {m}", v.len())));
        }
        let sqrt_ptx = self.tx_power_w.sqrt();
        let noise_sigma = (self.noise_power_w / 2.0).sqrt();

        let mut gamma_tx = DMatrix::zeros(k_frames, m);
        let mut y_hat = DVector::zeros(k_frames);
        let mut noise_power = Vec::with_capacity(k_frames);

        let jam_state = jammer.map(|j| {
            let src = Source { kind: crate::channel::SourceKind::Jammer, pos: j.pos, gain: self.jammer_gain };
            let gains = SourceGains::new(&self.scene, &src);
            let los = build_jammer_los(&self.scene, j.pos, self.jammer_gain);
            (j.power_w.sqrt(), gains, los, DMatrix::zeros(k_frames, m), DVector::zeros(k_frames))
        });
        let mut jam_state = jam_state;

        for k in 0..k_frames {
            let w = self.combiner_weights(rows, k, v)?;
            let mut y = ZERO;
            for mi in 0..m {
                let mut g = ZERO;
                for (c, wc) in w.iter().enumerate() {
                    g += wc * rows.tx_row(k, c)[mi];
                }
                let g = g * sqrt_ptx;
                gamma_tx[(k, mi)] = g;
                y += g * v[mi];
            }
            if let Some((sqrt_pj, gains, los, gamma_j, y_jlos)) = jam_state.as_mut() {
                let z = match self.jam_signal {
                    JamSignal::Constant => Complex64::new(1.0, 0.0),
                    JamSignal::Gaussian => {
                        let s = std::f64::consts::FRAC_1_SQRT_2;
                        Complex64::new(
                            s * rng.sample::<f64, _>(StandardNormal),
                            s * rng.sample::<f64, _>(StandardNormal),
                        )
                    }
                };
                let amp = z * *sqrt_pj;
                for mi in 0..m {
                    let mut g = ZERO;
                    for (c, wc) in w.iter().enumerate() {
                        g += wc * rows.receive_row(k, c)[mi];
                    }
                    let g = g * gains.per_cell[mi] * amp;
                    gamma_j[(k, mi)] = g;
                    y += g * v[mi];
                }
                let direct: Complex64 = w.iter().zip(&los.h).map(|(a, b)| a * b).sum::<Complex64>() * amp;
                y_jlos[k] = direct;
                y += direct;
            }
            let mut sigma = ZERO;
            let mut w_norm2 = 0.0;
            for wc in &w {
                let n = Complex64::new(
                    noise_sigma * rng.sample::<f64, _>(StandardNormal),
                    noise_sigma * rng.sample::<f64, _>(StandardNormal),
                );
                sigma += wc * n;
                w_norm2 += wc.norm_sqr();
            }
            noise_power.push(self.noise_power_w * w_norm2);
            y_hat[k] = y + sigma;
        }
        let (gamma_j, y_jlos) = match jam_state {
            Some((_, _, _, g, y)) => (Some(g), Some(y)),
            None => (None, None),
        };
        let _ = n_rf;
        Ok(ReceivedBatch { y_hat, gamma_tx, gamma_j, y_jlos, noise_power })
    }
}

fn dot_u(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Synthesize one period for `seq` from scratch.
pub fn synthesize_batch<R: Rng>(
    seq: &ControlSequence,
    system: &RadioSystem,
    scenario: &Scenario,
    rng: &mut R,
    jammer: Option<JammerDraw>,
) -> Result<ReceivedBatch> {
    let rows = system.select_rows(seq);
    system.synthesize(&rows, scenario, rng, jammer)
}

/// SINR of a batch, linear:
/// ‖Γ_Tx v‖² / (‖Γ_J v + y_J,los‖² + Σ_k ε‖w_k‖²).
/// The matrices already carry the source powers.
pub fn compute_sinr(batch: &ReceivedBatch, scenario: &Scenario) -> f64 {
    let v = DVector::from_column_slice(&scenario.reflection);
    let signal = (&batch.gamma_tx * &v).norm_squared();
    let interference = match (&batch.gamma_j, &batch.y_jlos) {
        (Some(gj), Some(yl)) => (gj * &v + yl).norm_squared(),
        _ => 0.0,
    };
    signal / (interference + batch.total_noise_power())
}

pub fn sinr_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_projection;
    use crate::rng::{stream, sub_stream, Stream};
    use crate::scene::{sample_jammer_position, sample_scenarios};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn onehot_layout() {
        let p = encode_pattern(&[0, 2], 4).unwrap();
        assert_eq!(p.onehot(), vec![1, 0, 0, 0, 0, 0, 1, 0]);
        let p = encode_pattern(&[0; 5], 4).unwrap();
        let ones: Vec<usize> = p.onehot().iter().enumerate().filter(|(_, b)| **b == 1).map(|(i, _)| i).collect();
        assert_eq!(ones, vec![0, 4, 8, 12, 16]);
        assert!(matches!(encode_pattern(&[4], 4), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn mrc_identity_and_scaling() {
        let h = vec![c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.5)];
        let w = mrc_weights(&h).unwrap();
        let wh: Complex64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
        assert!((wh - c(1.0, 0.0)).norm() < 1e-12);
        let h2: Vec<_> = h.iter().map(|z| z * 3.0).collect();
        let w2 = mrc_weights(&h2).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            assert!((a / 3.0 - b).norm() < 1e-15);
        }
        assert!(matches!(mrc_weights(&[c(0.0, 0.0); 3]), Err(Error::DegenerateChannel)));
    }

    fn system() -> (ExperimentConfig, RadioSystem) {
        let cfg = ExperimentConfig::default();
        let sys = RadioSystem::from_config(&cfg).unwrap();
        (cfg, sys)
    }

    #[test]
    fn effective_channel_linearity_and_selection() {
        let (cfg, sys) = system();
        let a = build_projection(&sys.scene, &sys.table, &Source::transmitter(&sys.scene, &cfg)).unwrap();
        let seq = ControlSequence::random(&cfg, &mut sub_stream(1, 1));
        let frame = seq.frame(3);
        let zero = vec![c(0.0, 0.0); 27];
        assert!(effective_channel(&frame, &a, &zero).iter().all(|z| z.norm() == 0.0));

        let mut single = zero.clone();
        single[5] = c(1.0, 0.0);
        let h = effective_channel(&frame, &a, &single);
        for (chain, p) in frame.patterns.iter().enumerate() {
            let direct: Complex64 = p.configs.iter().enumerate().map(|(n, &cf)| a.blocks[chain][(n * 4 + cf, 5)]).sum();
            assert!((h[chain] - direct).norm() <= 1e-12 * direct.norm());
        }

        let scen = &sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios))[0];
        let s = c(0.3, -1.2);
        let scaled: Vec<_> = scen.reflection.iter().map(|z| z * s).collect();
        let h1 = effective_channel(&frame, &a, &scen.reflection);
        let h2 = effective_channel(&frame, &a, &scaled);
        for (x, y) in h1.iter().zip(&h2) {
            assert!((x * s - y).norm() <= 1e-12 * y.norm());
        }
        // factored rows agree with the assembled projection matrix
        let rows = sys.select_rows(&seq);
        for chain in 0..3 {
            let hv = dot_u(rows.tx_row(3, chain), &scen.reflection);
            assert!((hv - h1[chain]).norm() <= 1e-10 * h1[chain].norm());
        }
    }

    #[test]
    fn noise_free_batch_is_exact() {
        let (mut cfg, _) = system();
        cfg.noise_power_w = 1e-300;
        let sys = RadioSystem::from_config(&cfg).unwrap();
        let scen = &sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios))[1];
        let seq = ControlSequence::random(&cfg, &mut sub_stream(2, 1));
        let b = synthesize_batch(&seq, &sys, scen, &mut sub_stream(0, 5), None).unwrap();
        assert_eq!(b.y_hat.len(), 20);
        assert_eq!(b.gamma_tx.shape(), (20, 27));
        assert!(!b.jammed());
        let v = DVector::from_column_slice(&scen.reflection);
        let resid = &b.y_hat - &b.gamma_tx * v;
        assert!(resid.norm() < 1e-12 * b.y_hat.norm());
        // genie MRC normalizes every frame to √P_Tx
        for y in b.y_hat.iter() {
            assert!((y - c(cfg.tx_power_w().sqrt(), 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_jam_power_matches_clean_batch() {
        let (cfg, sys) = system();
        let scen = &sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios))[2];
        let seq = ControlSequence::random(&cfg, &mut sub_stream(3, 1));
        let pos = sample_jammer_position(&sys.scene, &mut stream(0, Stream::Jammer));
        let clean = synthesize_batch(&seq, &sys, scen, &mut sub_stream(9, 5), None).unwrap();
        let jammed = synthesize_batch(&seq, &sys, scen, &mut sub_stream(9, 5), Some(JammerDraw { pos, power_w: 0.0 }))
            .unwrap();
        assert!(jammed.jammed());
        assert_eq!(clean.y_hat, jammed.y_hat);
        let s1 = compute_sinr(&clean, scen);
        let s2 = compute_sinr(&jammed, scen);
        assert!((s1 - s2).abs() <= 1e-12 * s1);
    }

    #[test]
    fn sinr_ratio_and_scaling() {
        let scen = Scenario::from_reflection(vec![c(1.0, 0.0)]);
        let batch = ReceivedBatch {
            y_hat: DVector::from_element(1, c(0.0, 0.0)),
            gamma_tx: DMatrix::from_element(1, 1, c(2.0, 0.0)),
            gamma_j: Some(DMatrix::from_element(1, 1, c(0.5, 0.0))),
            y_jlos: Some(DVector::from_element(1, c(0.25, 0.0))),
            noise_power: vec![1.0 - 0.5625],
        };
        let s = compute_sinr(&batch, &scen);
        assert!((s - 4.0).abs() < 1e-12);
        assert!((sinr_db(s) - 6.0206).abs() < 1e-4);
        let mut doubled = batch.clone();
        doubled.gamma_tx *= Complex64::new(2f64.sqrt(), 0.0);
        assert!((compute_sinr(&doubled, &scen) - 8.0).abs() < 1e-12);
        let clean = ReceivedBatch { gamma_j: None, y_jlos: None, ..batch };
        assert!((compute_sinr(&clean, &scen) - 4.0 / 0.4375).abs() < 1e-12);
    }

    #[test]
    fn mrc_maximizes_snr() {
        let mut rng = sub_stream(11, 0);
        let gauss = |rng: &mut crate::rng::SimRng| c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        for _ in 0..50 {
            let h: Vec<Complex64> = (0..3).map(|_| gauss(&mut rng)).collect();
            let w = mrc_weights(&h).unwrap();
            let snr = |u: &[Complex64]| {
                let s: Complex64 = u.iter().zip(&h).map(|(a, b)| a * b).sum();
                s.norm_sqr() / u.iter().map(|z| z.norm_sqr()).sum::<f64>()
            };
            let best = snr(&w);
            for _ in 0..200 {
                let u: Vec<Complex64> = (0..3).map(|_| gauss(&mut rng)).collect();
                assert!(snr(&u) <= best * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn noise_statistics() {
        let (cfg, sys) = system();
        let scen = &sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios))[3];
        let seq = ControlSequence::random(&cfg, &mut sub_stream(4, 1));
        let rows = sys.select_rows(&seq);
        let mut rng = sub_stream(4, 2);
        let clean = {
            let mut cfg0 = cfg.clone();
            cfg0.noise_power_w = 1e-300;
            let sys0 = RadioSystem::new(&cfg0, sys.scene.clone());
            sys0.synthesize(&rows, scen, &mut rng, None).unwrap()
        };
        let mut acc = 0.0;
        let mut expect = 0.0;
        let draws = 500;
        for _ in 0..draws {
            let b = sys.synthesize(&rows, scen, &mut rng, None).unwrap();
            acc += (&b.y_hat - &clean.y_hat).norm_squared();
            expect += b.total_noise_power();
        }
        // 10^4 frames
        assert!((acc / expect - 1.0).abs() < 0.05, "{}", acc / expect);
    }

    #[test]
    fn doubling_reflections_quadruples_signal_energy() {
        let (cfg, sys) = system();
        let scen = sample_scenarios(&cfg, &mut stream(0, Stream::Scenarios))[4].clone();
        let seq = ControlSequence::random(&cfg, &mut sub_stream(5, 1));
        let rows = sys.select_rows(&seq);
        let mut cfg_sum = cfg.clone();
        cfg_sum.receiver.combiner = CombinerMode::Sum;
        let sys_sum = RadioSystem::new(&cfg_sum, sys.scene.clone());
        let b = sys_sum.synthesize(&rows, &scen, &mut sub_stream(0, 0), None).unwrap();
        let v1 = DVector::from_column_slice(&scen.reflection);
        let v2 = &v1 * c(2.0, 0.0);
        let e1 = (&b.gamma_tx * v1).norm_squared();
        let e2 = (&b.gamma_tx * v2).norm_squared();
        assert!((e2 / e1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sequence_indexing() {
        let t = ControlSequence::initial(1, 1, 2, 2);
        let all: Vec<Vec<u8>> = (0..4).map(|i| ControlSequence::from_index(&t, i).configs).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
